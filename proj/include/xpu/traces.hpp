/* Copyright 2026 The xpuscope Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xpu/catalog.hpp"
#include "xpu/csv.hpp"
#include "xpu/error.hpp"

namespace xpu {

// ===========================================================================
// Power traces

struct PowerSample {
  double timestamp_s = 0.0;
  double power_w = 0.0;

  bool operator==(const PowerSample&) const = default;
};

struct PowerTrace {
  std::string platform;
  std::vector<PowerSample> samples;
  double sample_period_s = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline void validate(const PowerTrace& t) {
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (!(t.samples[i].power_w >= 0))
      throw ValidationError("power trace: negative power at sample " + std::to_string(i));
    if (i > 0 && !(t.samples[i].timestamp_s > t.samples[i - 1].timestamp_s))
      throw ValidationError("power trace: timestamps must be strictly increasing (sample " +
                            std::to_string(i) + ")");
  }
}

// Builds a trace and infers the sample period as the median timestamp step.
inline PowerTrace make_trace(std::string platform, std::vector<PowerSample> samples) {
  PowerTrace t{std::move(platform), std::move(samples), 0.0};
  validate(t);
  std::vector<double> steps;
  for (std::size_t i = 1; i < t.samples.size(); ++i)
    steps.push_back(t.samples[i].timestamp_s - t.samples[i - 1].timestamp_s);
  t.sample_period_s = steps.empty() ? 0.0 : median(steps);
  return t;
}

// CSV with header "timestamp_s,power_w" and an optional "# platform: <name>" line.
inline PowerTrace parse_power_trace_csv(std::string_view text) {
  const auto l = csv::lines(text);
  csv::expect_header(l, "timestamp_s,power_w", "power trace");
  std::string platform;
  for (const auto& c : l.comments) {
    auto body = csv::trim(c.text.substr(1));
    constexpr std::string_view key = "platform:";
    if (body.substr(0, key.size()) == key) platform = std::string(csv::trim(body.substr(key.size())));
  }
  std::vector<PowerSample> samples;
  for (std::size_t i = 1; i < l.data.size(); ++i) {
    const auto f = csv::split(l.data[i].text);
    if (f.size() != 2)
      throw ParseError("row " + std::to_string(l.data[i].line_no) + ": expected 2 columns");
    samples.push_back({csv::to_double(f[0], l.data[i].line_no, "timestamp_s"),
                       csv::to_double(f[1], l.data[i].line_no, "power_w")});
  }
  return make_trace(std::move(platform), std::move(samples));
}

enum class SegmentPhase { kIdle, kPrefill, kDecode, kTransition };

inline std::string_view to_string(SegmentPhase p) {
  switch (p) {
    case SegmentPhase::kIdle: return "idle";
    case SegmentPhase::kPrefill: return "prefill";
    case SegmentPhase::kDecode: return "decode";
    case SegmentPhase::kTransition: return "transition";
  }
  return "?";
}

struct PhaseSegment {
  SegmentPhase phase = SegmentPhase::kIdle;
  double start_s = 0.0;
  double end_s = 0.0;
  double peak_power_w = 0.0;
  double mean_power_w = 0.0;
  double fraction_of_tdp = std::numeric_limits<double>::quiet_NaN();  // NaN without a TDP

  double duration_s() const { return end_s - start_s; }
};

struct SegmentationOptions {
  std::optional<double> idle_power_hint_w;
  double threshold_multiplier = 1.15;
  double merge_gap_periods = 2.0;
};

struct Segmentation {
  std::vector<PhaseSegment> segments;
  double idle_power_w = 0.0;   // median of the samples at or below threshold
  double threshold_w = 0.0;
  std::size_t burst_count = 0;
  bool ambiguous = false;      // burst count outside {1, 2}; bursts left as Transition
  std::optional<double> tdp_w;

  std::optional<PhaseSegment> first(SegmentPhase p) const {
    for (const auto& s : segments)
      if (s.phase == p) return s;
    return std::nullopt;
  }
  double idle_fraction() const {
    return tdp_w ? idle_power_w / *tdp_w : std::numeric_limits<double>::quiet_NaN();
  }
};

// Splits a trace into idle stretches and activity bursts.
//
// The threshold is threshold_multiplier times the idle hint, or times the
// trace minimum without one. Runs of samples above it are bursts; bursts
// separated by at most merge_gap_periods sample periods are merged. Two
// bursts are labeled prefill then decode (the system idles in between); a
// single burst is labeled prefill. Any other count leaves the bursts as
// Transition and sets `ambiguous`.
inline Segmentation segment_trace(const PowerTrace& trace, const SegmentationOptions& opts = {},
                                  std::optional<double> tdp_w = std::nullopt) {
  validate(trace);
  const auto& s = trace.samples;
  if (s.size() < 3) throw ValidationError("power trace needs at least 3 samples");
  if (tdp_w && !(*tdp_w > 0)) throw ValidationError("tdp must be > 0");

  double lo = s.front().power_w;
  for (const auto& x : s) lo = std::min(lo, x.power_w);
  Segmentation out;
  out.tdp_w = tdp_w;
  out.threshold_w = opts.threshold_multiplier * opts.idle_power_hint_w.value_or(lo);

  std::vector<double> idle;
  for (const auto& x : s)
    if (x.power_w <= out.threshold_w) idle.push_back(x.power_w);
  out.idle_power_w = idle.empty() ? lo : median(idle);

  // Active runs as [first, last] sample index pairs.
  std::vector<std::pair<std::size_t, std::size_t>> bursts;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].power_w <= out.threshold_w) continue;
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1].power_w > out.threshold_w) ++j;
    const double max_gap = opts.merge_gap_periods * trace.sample_period_s;
    if (!bursts.empty() && s[i].timestamp_s - s[bursts.back().second].timestamp_s <= max_gap)
      bursts.back().second = j;
    else
      bursts.emplace_back(i, j);
    i = j;
  }
  if (bursts.empty()) {
    throw ValidationError("no sample exceeds the idle threshold of " +
                              std::to_string(out.threshold_w) + " W",
                          "NoActivity");
  }
  out.burst_count = bursts.size();
  out.ambiguous = bursts.size() > 2;

  auto end_time = [&](std::size_t last) {
    return last + 1 < s.size() ? s[last + 1].timestamp_s
                               : s[last].timestamp_s + trace.sample_period_s;
  };
  auto make = [&](SegmentPhase phase, std::size_t first, std::size_t last) {
    PhaseSegment seg;
    seg.phase = phase;
    seg.start_s = s[first].timestamp_s;
    seg.end_s = end_time(last);
    double sum = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
      seg.peak_power_w = std::max(seg.peak_power_w, s[k].power_w);
      sum += s[k].power_w;
    }
    seg.mean_power_w = sum / static_cast<double>(last - first + 1);
    if (tdp_w) seg.fraction_of_tdp = seg.peak_power_w / *tdp_w;
    return seg;
  };

  std::size_t cursor = 0;
  for (std::size_t b = 0; b < bursts.size(); ++b) {
    const auto [first, last] = bursts[b];
    if (first > cursor) out.segments.push_back(make(SegmentPhase::kIdle, cursor, first - 1));
    SegmentPhase label = SegmentPhase::kTransition;
    if (!out.ambiguous) label = b == 0 ? SegmentPhase::kPrefill : SegmentPhase::kDecode;
    out.segments.push_back(make(label, first, last));
    cursor = last + 1;
  }
  if (cursor < s.size()) out.segments.push_back(make(SegmentPhase::kIdle, cursor, s.size() - 1));
  return out;
}

// Energy of a segment assuming its observed peak power holds for the whole
// duration (or for duration_override when given).
inline double phase_energy(const PhaseSegment& seg,
                           std::optional<double> duration_override = std::nullopt) {
  const double d = duration_override.value_or(seg.duration_s());
  if (!(d > 0)) throw ValidationError("segment duration must be > 0");
  return seg.peak_power_w * d;
}

// ===========================================================================
// Communication energy

struct CommEnergyMeasurement {
  std::string platform;
  double p_benchmark_w = 0.0;
  double p_idle_w = 0.0;
  double duration_s = 0.0;
  double bytes = 0.0;
  std::optional<double> distance_mm;
};

struct CommEnergy {
  double joules = 0.0;
  double joules_per_byte = 0.0;
};

// Energy above idle for a transfer: (P_benchmark - P_idle) * duration. The
// power delta is multiplied by the transfer time; dividing by it would not
// yield joules.
inline CommEnergy comm_energy(const CommEnergyMeasurement& m) {
  if (m.p_benchmark_w < m.p_idle_w) {
    throw ValidationError("benchmark power " + std::to_string(m.p_benchmark_w) +
                              " W is below idle power " + std::to_string(m.p_idle_w) + " W",
                          "NegativeDelta");
  }
  if (!(m.duration_s > 0)) throw ValidationError("duration must be > 0");
  if (!(m.bytes > 0)) throw ValidationError("bytes must be > 0");
  const double j = (m.p_benchmark_w - m.p_idle_w) * m.duration_s;
  return {j, j / m.bytes};
}

// CSV: platform,p_benchmark_w,p_idle_w,duration_s,bytes,distance_mm
inline std::vector<CommEnergyMeasurement> parse_comm_energy_csv(std::string_view text) {
  const auto l = csv::lines(text);
  csv::expect_header(l, "platform,p_benchmark_w,p_idle_w,duration_s,bytes,distance_mm",
                     "comm-energy");
  std::vector<CommEnergyMeasurement> out;
  for (std::size_t i = 1; i < l.data.size(); ++i) {
    const auto n = l.data[i].line_no;
    const auto f = csv::split(l.data[i].text);
    if (f.size() != 6) throw ParseError("row " + std::to_string(n) + ": expected 6 columns");
    out.push_back({std::string(f[0]), csv::to_double(f[1], n, "p_benchmark_w"),
                   csv::to_double(f[2], n, "p_idle_w"), csv::to_double(f[3], n, "duration_s"),
                   csv::to_double(f[4], n, "bytes"), csv::to_optional_double(f[5], n, "distance_mm")});
  }
  return out;
}

struct CommEnergyRow {
  CommEnergyMeasurement measurement;
  CommEnergy energy;
  // J/B of this row over the reference platform's J/B at the same distance.
  std::optional<double> ratio_to_reference;
};

struct CommEnergyReport {
  std::string reference;
  std::vector<CommEnergyRow> rows;
  // Per platform, the largest J/B ratio against any reference distance.
  std::map<std::string, double> max_ratio_to_reference;
};

inline CommEnergyReport comm_energy_report(const std::vector<CommEnergyMeasurement>& ms,
                                           const std::string& reference) {
  if (ms.empty()) throw ValidationError("no comm-energy measurements");
  CommEnergyReport r;
  r.reference = reference;
  std::vector<std::pair<std::optional<double>, double>> ref;  // distance, J/B
  for (const auto& m : ms) {
    r.rows.push_back({m, comm_energy(m), std::nullopt});
    if (m.platform == reference) ref.emplace_back(m.distance_mm, r.rows.back().energy.joules_per_byte);
  }
  if (!reference.empty() && ref.empty())
    throw NotFoundError("reference platform", reference, {});
  for (auto& row : r.rows) {
    if (row.measurement.platform == reference) continue;
    for (const auto& [dist, jpb] : ref) {
      const double ratio = row.energy.joules_per_byte / jpb;
      if (dist == row.measurement.distance_mm) row.ratio_to_reference = ratio;
      auto [it, inserted] = r.max_ratio_to_reference.emplace(row.measurement.platform, ratio);
      if (!inserted) it->second = std::max(it->second, ratio);
    }
  }
  return r;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares y = slope * x + intercept.
inline LinearFit linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("linear regression needs at least two (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw ValidationError("linear regression needs distinct x values");
  LinearFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

// CSV: distance_mm,cycles
inline LinearFit fit_cycles_vs_distance(std::string_view text,
                                        std::vector<std::pair<double, double>>* table = nullptr) {
  const auto l = csv::lines(text);
  csv::expect_header(l, "distance_mm,cycles", "cycles-vs-distance");
  std::vector<double> x, y;
  for (std::size_t i = 1; i < l.data.size(); ++i) {
    const auto n = l.data[i].line_no;
    const auto f = csv::split(l.data[i].text);
    if (f.size() != 2) throw ParseError("row " + std::to_string(n) + ": expected 2 columns");
    x.push_back(csv::to_double(f[0], n, "distance_mm"));
    y.push_back(csv::to_double(f[1], n, "cycles"));
    if (table) table->emplace_back(x.back(), y.back());
  }
  return linear_regression(x, y);
}

// ===========================================================================
// Duty-cycle parity

struct DutyCycleSide {
  std::string platform;
  std::int64_t n_devices = 1;
  double tdp_w = 0.0;
  double idle_fraction = 0.0;
  double active_fraction = 1.0;
  double throughput_tok_s = 0.0;  // whole cluster, while active
};

inline DutyCycleSide duty_side(const AcceleratorSpec& p, std::int64_t n_devices,
                               double throughput_tok_s, double active_fraction) {
  return {p.name, n_devices, p.tdp_w, p.idle_fraction, active_fraction, throughput_tok_s};
}

// Energy per token when active for a fraction d of wall-clock time:
//   n * tdp * (d * active + (1 - d) * idle) / (d * throughput)
inline double energy_per_token_at_duty(const DutyCycleSide& s, double duty) {
  const double avg_w = static_cast<double>(s.n_devices) * s.tdp_w *
                       (duty * s.active_fraction + (1.0 - duty) * s.idle_fraction);
  return avg_w / (duty * s.throughput_tok_s);
}

// Duty cycle d in (0, 1] at which side A's energy per token equals side B's at
// full duty. A's energy per token falls monotonically with d, so the root is
// bracketed on (0, 1] and found by bisection.
inline double duty_cycle_parity(const DutyCycleSide& a, const DutyCycleSide& b) {
  for (const auto* s : {&a, &b}) {
    if (!(s->throughput_tok_s > 0) || !(s->tdp_w > 0) || s->n_devices < 1 ||
        s->idle_fraction < 0 || s->active_fraction < s->idle_fraction)
      throw ValidationError("duty-cycle inputs for '" + s->platform + "' are degenerate",
                            "DegenerateInputs");
  }
  const double target = energy_per_token_at_duty(b, 1.0);
  auto f = [&](double d) { return energy_per_token_at_duty(a, d) - target; };

  const double at_full = f(1.0);
  if (at_full == 0.0) return 1.0;
  if (at_full > 0.0 || a.idle_fraction == 0.0) {
    throw ValidationError("'" + a.platform + "' never reaches energy-per-token parity with '" +
                              b.platform + "' for a duty cycle in (0, 1]",
                          "NoParity");
  }
  // f(d) -> +inf as d -> 0 when A draws idle power.
  double lo = 1.0, hi = 1.0;
  do {
    lo *= 0.5;
    if (lo < 1e-300) throw ValidationError("duty-cycle root not bracketed", "NoParity");
  } while (f(lo) < 0.0);
  for (int it = 0; it < 2000 && hi - lo > 0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

// ===========================================================================
// Microbenchmark aggregation

struct BenchRecord {
  std::string platform;
  std::string op;
  std::string shape;                    // dash-joined dims, e.g. "4096-4096"
  std::optional<double> latency_s;      // absent: op unsupported on this platform
  std::optional<double> power_w;
  std::optional<double> temperature_c;
  std::optional<double> mem_util;
  std::optional<double> clock_hz;
};

// CSV: platform,op,shape,latency_s,power_w,temperature_c,mem_util[,clock_hz]
// Empty / NA / "unsupported" cells are absent values.
inline std::vector<BenchRecord> parse_bench_csv(std::string_view text) {
  constexpr std::string_view kHeader = "platform,op,shape,latency_s,power_w,temperature_c,mem_util";
  const auto l = csv::lines(text);
  std::size_t cols = 7;
  if (!l.data.empty() && csv::split(l.data.front().text).size() == 8) {
    csv::expect_header(l, std::string(kHeader) + ",clock_hz", "benchmark");
    cols = 8;
  } else {
    csv::expect_header(l, kHeader, "benchmark");
  }
  std::vector<BenchRecord> out;
  for (std::size_t i = 1; i < l.data.size(); ++i) {
    const auto n = l.data[i].line_no;
    const auto f = csv::split(l.data[i].text);
    if (f.size() != cols)
      throw ParseError("row " + std::to_string(n) + ": expected " + std::to_string(cols) + " columns");
    BenchRecord r{std::string(f[0]), std::string(f[1]), std::string(f[2]),
                  csv::to_optional_double(f[3], n, "latency_s"),
                  csv::to_optional_double(f[4], n, "power_w"),
                  csv::to_optional_double(f[5], n, "temperature_c"),
                  csv::to_optional_double(f[6], n, "mem_util"),
                  cols == 8 ? csv::to_optional_double(f[7], n, "clock_hz") : std::nullopt};
    if (r.latency_s && !(*r.latency_s > 0))
      throw ValidationError("row " + std::to_string(n) + ": latency_s must be > 0");
    out.push_back(std::move(r));
  }
  return out;
}

enum class BenchMetric { kLatency, kPower };

inline BenchMetric parse_bench_metric(std::string_view s) {
  if (s == "latency") return BenchMetric::kLatency;
  if (s == "power") return BenchMetric::kPower;
  throw ValidationError("unknown bench metric '" + std::string(s) + "' (latency or power)");
}

struct SpeedupEntry {
  std::string op;
  std::string shape;
  std::string platform;
  std::optional<double> ratio;  // absent when the op is unsupported
};

struct SpeedupMatrix {
  std::string baseline;
  BenchMetric metric = BenchMetric::kLatency;
  std::vector<SpeedupEntry> entries;
  // op -> platform -> largest ratio over that op's shapes (absent if never supported).
  std::map<std::string, std::map<std::string, std::optional<double>>> by_op;
};

// Latency: baseline / platform (speedup). Power: platform / baseline
// (overhead). Shapes are matched exactly against the baseline rows.
inline SpeedupMatrix speedup_matrix(const std::vector<BenchRecord>& records,
                                    const std::string& baseline, BenchMetric metric) {
  if (records.empty()) throw ValidationError("no benchmark records");
  auto value = [&](const BenchRecord& r) {
    return metric == BenchMetric::kLatency ? r.latency_s : r.power_w;
  };
  std::map<std::pair<std::string, std::string>, const BenchRecord*> base;
  for (const auto& r : records)
    if (r.platform == baseline) base[{r.op, r.shape}] = &r;

  SpeedupMatrix m;
  m.baseline = baseline;
  m.metric = metric;
  std::set<std::string> missing;
  for (const auto& r : records) {
    auto it = base.find({r.op, r.shape});
    if (it == base.end()) {
      missing.insert(r.op + "@" + r.shape);
      continue;
    }
    std::optional<double> ratio;
    const auto v = value(r), b = value(*it->second);
    if (v && b && *v > 0 && *b > 0) ratio = metric == BenchMetric::kLatency ? *b / *v : *v / *b;
    m.entries.push_back({r.op, r.shape, r.platform, ratio});
    auto& cell = m.by_op[r.op][r.platform];
    if (ratio && (!cell || *ratio > *cell)) cell = ratio;
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& k : missing) list += (list.empty() ? "" : ", ") + k;
    throw ValidationError("baseline '" + baseline + "' has no rows for: " + list,
                          "MissingBaseline");
  }
  return m;
}

struct LatencyRecord {
  std::string platform;
  std::string model;
  double latency_per_token_s = 0.0;
};

// CSV: platform,model,latency_per_token_s
inline std::vector<LatencyRecord> parse_latency_csv(std::string_view text) {
  const auto l = csv::lines(text);
  csv::expect_header(l, "platform,model,latency_per_token_s", "latency");
  std::vector<LatencyRecord> out;
  for (std::size_t i = 1; i < l.data.size(); ++i) {
    const auto n = l.data[i].line_no;
    const auto f = csv::split(l.data[i].text);
    if (f.size() != 3) throw ParseError("row " + std::to_string(n) + ": expected 3 columns");
    out.push_back({std::string(f[0]), std::string(f[1]), csv::to_double(f[2], n, "latency_per_token_s")});
    if (!(out.back().latency_per_token_s > 0))
      throw ValidationError("row " + std::to_string(n) + ": latency must be > 0");
  }
  return out;
}

// model -> platform -> latency / baseline latency.
inline std::map<std::string, std::map<std::string, double>> latency_report(
    const std::vector<LatencyRecord>& records, const std::string& baseline) {
  if (records.empty()) throw ValidationError("no latency records");
  std::map<std::string, double> base;
  for (const auto& r : records)
    if (r.platform == baseline) base[r.model] = r.latency_per_token_s;
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& r : records) {
    auto it = base.find(r.model);
    if (it == base.end()) {
      throw ValidationError("baseline '" + baseline + "' has no latency for model '" + r.model + "'",
                            "MissingBaseline");
    }
    out[r.model][r.platform] = r.latency_per_token_s / it->second;
  }
  return out;
}

// ===========================================================================
// JSON

inline Json to_json(const PhaseSegment& s) {
  return Json{{"phase", std::string(to_string(s.phase))},
              {"start", s.start_s},
              {"end", s.end_s},
              {"peak_power", s.peak_power_w},
              {"mean_power", s.mean_power_w},
              {"fraction_of_tdp", s.fraction_of_tdp},
              {"energy_j", phase_energy(s)}};
}

inline Json to_json(const Segmentation& seg) {
  Json segs = Json::array();
  for (const auto& s : seg.segments) segs.push_back(to_json(s));
  Json j{{"idle_power_w", seg.idle_power_w},
         {"idle_fraction_of_tdp", seg.idle_fraction()},
         {"threshold_w", seg.threshold_w},
         {"burst_count", seg.burst_count},
         {"ambiguous", seg.ambiguous},
         {"segments", segs}};
  return j;
}

inline Json to_json(const CommEnergyReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    const auto& m = row.measurement;
    rows.push_back(Json{{"platform", m.platform},
                        {"p_benchmark_w", m.p_benchmark_w},
                        {"p_idle_w", m.p_idle_w},
                        {"duration_s", m.duration_s},
                        {"bytes", m.bytes},
                        {"distance_mm", m.distance_mm ? Json(*m.distance_mm) : Json(nullptr)},
                        {"joules", row.energy.joules},
                        {"joules_per_byte", row.energy.joules_per_byte},
                        {"ratio_to_reference",
                         row.ratio_to_reference ? Json(*row.ratio_to_reference) : Json(nullptr)}});
  }
  Json maxr = Json::object();
  for (const auto& [p, v] : r.max_ratio_to_reference) maxr[p] = v;
  return Json{{"reference", r.reference},
              {"rows", rows},
              {"max_ratio_to_reference", maxr},
              {"note", "energy = (p_benchmark_w - p_idle_w) * duration_s; joules_per_byte = energy / bytes"}};
}

inline Json to_json(const SpeedupMatrix& m) {
  Json entries = Json::array();
  for (const auto& e : m.entries)
    entries.push_back(Json{{"op", e.op},
                           {"shape", e.shape},
                           {"platform", e.platform},
                           {"ratio", e.ratio ? Json(*e.ratio) : Json(nullptr)}});
  Json by_op = Json::object();
  for (const auto& [op, row] : m.by_op) {
    Json r = Json::object();
    for (const auto& [p, v] : row) r[p] = v ? Json(*v) : Json(nullptr);
    by_op[op] = r;
  }
  return Json{{"baseline", m.baseline},
              {"metric", m.metric == BenchMetric::kLatency ? "latency" : "power"},
              {"by_op", by_op},
              {"entries", entries}};
}

}  // namespace xpu
