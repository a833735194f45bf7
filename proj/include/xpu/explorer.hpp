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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "xpu/catalog.hpp"
#include "xpu/distmodel.hpp"
#include "xpu/error.hpp"

namespace xpu {

// ---------------------------------------------------------------------------
// Pareto extraction

// Indices of the non-dominated items when minimizing both x(item) and
// y(item). An item is dominated when another is <= on both axes and < on at
// least one. Exact duplicates are all kept. Result is ordered by x ascending
// (y strictly decreasing between distinct points). O(n log n).
template <class T, class XFn, class YFn>
std::vector<std::size_t> pareto_indices(std::span<const T> items, XFn x, YFn y) {
  if (items.empty()) throw ValidationError("pareto input is empty", "EmptyInput");
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i : order) {
    if (!std::isfinite(x(items[i])) || !std::isfinite(y(items[i])))
      throw ValidationError("pareto input must be finite");
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double xa = x(items[a]), xb = x(items[b]);
    if (xa != xb) return xa < xb;
    return y(items[a]) < y(items[b]);
  });

  std::vector<std::size_t> front;
  double best_y = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    // Items sharing this x; the first has the smallest y.
    const double gx = x(items[order[i]]);
    const double gy = y(items[order[i]]);
    std::size_t j = i;
    while (j < order.size() && x(items[order[j]]) == gx) ++j;
    if (gy < best_y) {
      for (std::size_t k = i; k < j && y(items[order[k]]) == gy; ++k) front.push_back(order[k]);
      best_y = gy;
    }
    i = j;
  }
  return front;
}

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;

  bool operator==(const LabeledPoint&) const = default;
};

inline std::vector<LabeledPoint> pareto(std::span<const LabeledPoint> points) {
  auto idx = pareto_indices(points, [](const LabeledPoint& p) { return p.x; },
                            [](const LabeledPoint& p) { return p.y; });
  std::vector<LabeledPoint> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(points[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class ModeSelection { kOptimistic, kRealistic, kBoth };

inline std::vector<CommMode> modes_of(ModeSelection m) {
  switch (m) {
    case ModeSelection::kOptimistic: return {CommMode::kOptimistic};
    case ModeSelection::kRealistic: return {CommMode::kRealistic};
    case ModeSelection::kBoth: break;
  }
  return {CommMode::kOptimistic, CommMode::kRealistic};
}

struct SweepSpec {
  std::vector<std::string> platforms;
  std::vector<std::string> models;
  std::vector<std::int64_t> batches;
  std::vector<std::int64_t> context_lens;  // prompt length equals context length
  std::vector<Phase> phases{Phase::kPrefill, Phase::kDecode};
  ModeSelection mode = ModeSelection::kBoth;
  double headroom = 0.9;
  PrecisionOverrides overrides;
  std::map<std::string, PrecisionOverrides> platform_overrides;
};

inline void validate(const SweepSpec& s) {
  if (s.platforms.empty() || s.models.empty() || s.batches.empty() || s.context_lens.empty() ||
      s.phases.empty())
    throw ValidationError("sweep lists must be non-empty");
  for (auto b : s.batches)
    if (b < 1) throw ValidationError("sweep batches must be positive");
  for (auto t : s.context_lens)
    if (t < 1) throw ValidationError("sweep context_lens must be positive");
  if (!(s.headroom > 0 && s.headroom <= 1)) throw ValidationError("headroom must be in (0, 1]");
}

inline ScenarioOptions options_for(const SweepSpec& s, const std::string& platform) {
  ScenarioOptions o;
  o.headroom = s.headroom;
  o.precision = s.overrides;
  if (auto it = s.platform_overrides.find(platform); it != s.platform_overrides.end()) {
    if (it->second.bytes_per_param) o.precision.bytes_per_param = it->second.bytes_per_param;
    if (it->second.bytes_per_kv_elem) o.precision.bytes_per_kv_elem = it->second.bytes_per_kv_elem;
    if (it->second.bytes_per_act) o.precision.bytes_per_act = it->second.bytes_per_act;
  }
  return o;
}

// Every feasible plan over the candidate device counts of one scenario, in
// (n_devices, tp) order. A scenario with no feasible plan yields exactly one
// infeasible estimate carrying the reason.
inline std::vector<ScenarioEstimate> evaluate_scenario(const AcceleratorSpec& p,
                                                       const LlmModelConfig& base,
                                                       const InferencePoint& point, CommMode mode,
                                                       const ScenarioOptions& opts) {
  const LlmModelConfig m = with_precision(base, opts.precision);
  std::int64_t min_n = 0;
  try {
    min_n = min_devices(p, m, point.batch, point.context_len, opts.headroom, opts.max_devices);
  } catch (const InfeasibleError& e) {
    return {infeasible_estimate(p, m, point, {1, 1}, mode, e.reason())};
  }
  std::vector<ScenarioEstimate> out;
  std::string first_reason;
  for (std::int64_t n : candidate_device_counts(p, min_n, opts.max_devices)) {
    std::vector<ParallelismPlan> plans;
    try {
      plans = enumerate_plans(p, m, n);
    } catch (const InfeasibleError& e) {
      if (first_reason.empty()) first_reason = e.reason();
      continue;
    }
    for (const auto& plan : plans) {
      auto e = estimate(p, base, point, plan, mode, opts);
      if (e.feasible) out.push_back(std::move(e));
      else if (first_reason.empty()) first_reason = e.reason;
    }
  }
  if (out.empty()) {
    out.push_back(infeasible_estimate(p, m, point, {1, min_n}, mode,
                                      first_reason.empty() ? "divisibility" : first_reason));
  }
  return out;
}

// Cartesian grid model x platform x batch x context x phase x mode, evaluated
// concurrently and merged in grid order.
inline std::vector<ScenarioEstimate> run_sweep(const Catalog& catalog, const SweepSpec& spec,
                                               unsigned threads = 0) {
  validate(spec);
  struct Cell {
    const AcceleratorSpec* platform;
    const LlmModelConfig* model;
    InferencePoint point;
    CommMode mode;
  };
  std::vector<Cell> cells;
  for (const auto& mname : spec.models) {
    const auto& model = catalog.model(mname);
    for (const auto& pname : spec.platforms) {
      const auto& platform = catalog.platform(pname);
      for (auto b : spec.batches)
        for (auto t : spec.context_lens)
          for (auto ph : spec.phases)
            for (auto mode : modes_of(spec.mode))
              cells.push_back({&platform, &model, InferencePoint{b, t, t, ph}, mode});
    }
  }

  std::vector<std::vector<ScenarioEstimate>> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      results[i] = evaluate_scenario(*c.platform, *c.model, c.point, c.mode,
                                     options_for(spec, c.platform->name));
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<ScenarioEstimate> out;
  for (auto& r : results)
    for (auto& e : r) out.push_back(std::move(e));
  return out;
}

// ---------------------------------------------------------------------------
// Frontiers

struct FrontierPoint {
  double x = 0.0;  // latency (s): TTFT for prefill, TPOT for decode
  double y = 0.0;  // energy per token (J): per input token for prefill, per output for decode
  std::string platform;
  ParallelismPlan plan;
  std::int64_t n_devices = 0;
  CommMode mode = CommMode::kRealistic;
};

struct ParetoFrontier {
  Phase phase = Phase::kDecode;
  std::string axis_x;
  std::string axis_y;
  std::vector<FrontierPoint> points;

  bool contains(std::string_view platform) const {
    return std::any_of(points.begin(), points.end(),
                       [&](const FrontierPoint& p) { return p.platform == platform; });
  }
};

// Frontier over the feasible, finite estimates of the given phase and mode.
// Estimates tagged with another phase are skipped.
inline ParetoFrontier frontier(std::span<const ScenarioEstimate> estimates, Phase phase,
                               CommMode mode) {
  std::vector<FrontierPoint> pts;
  for (const auto& e : estimates) {
    if (!e.feasible || e.mode != mode || e.point.phase != phase) continue;
    const double x = e.latency(phase), y = e.energy_per_token(phase);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    pts.push_back({x, y, e.platform, e.plan, e.n_devices_allocated, e.mode});
  }
  ParetoFrontier f;
  f.phase = phase;
  f.axis_x = phase == Phase::kPrefill ? "ttft_s" : "tpot_s";
  f.axis_y = phase == Phase::kPrefill ? "energy_per_input_token_j" : "energy_per_output_token_j";
  if (pts.empty()) return f;
  const std::span<const FrontierPoint> view(pts);
  for (auto i : pareto_indices(view, [](const FrontierPoint& p) { return p.x; },
                               [](const FrontierPoint& p) { return p.y; }))
    f.points.push_back(pts[i]);
  return f;
}

inline bool frontier_membership(std::span<const ScenarioEstimate> estimates, Phase phase,
                                std::string_view platform, CommMode mode) {
  return frontier(estimates, phase, mode).contains(platform);
}

inline bool frontier_membership(const Catalog& catalog, const SweepSpec& spec, Phase phase,
                                std::string_view platform, CommMode mode) {
  const auto estimates = run_sweep(catalog, spec);
  return frontier_membership(estimates, phase, platform, mode);
}

// Per platform, the feasible estimate with the lowest latency for the phase
// (ties broken by energy). Platforms without one are absent.
inline std::map<std::string, ScenarioEstimate> best_per_platform(
    std::span<const ScenarioEstimate> estimates, Phase phase) {
  std::map<std::string, ScenarioEstimate> best;
  for (const auto& e : estimates) {
    if (!e.feasible || e.point.phase != phase) continue;
    auto it = best.find(e.platform);
    if (it == best.end()) {
      best.emplace(e.platform, e);
      continue;
    }
    const auto& b = it->second;
    if (e.latency(phase) < b.latency(phase) ||
        (e.latency(phase) == b.latency(phase) &&
         e.energy_per_token(phase) < b.energy_per_token(phase)))
      it->second = e;
  }
  return best;
}

inline Json to_json(const ParetoFrontier& f) {
  Json pts = Json::array();
  for (const auto& p : f.points) {
    pts.push_back(Json{{"x", p.x},
                       {"y", p.y},
                       {"platform", p.platform},
                       {"tp", p.plan.tp},
                       {"pp", p.plan.pp},
                       {"n_devices", p.n_devices},
                       {"mode", std::string(to_string(p.mode))}});
  }
  return Json{{"phase", std::string(to_string(f.phase))},
              {"axis_x", f.axis_x},
              {"axis_y", f.axis_y},
              {"points", pts}};
}

inline std::string to_csv(const ParetoFrontier& f) {
  std::ostringstream os;
  os.precision(17);
  os << "x,y,platform,tp,pp,n_devices,mode\n";
  for (const auto& p : f.points)
    os << p.x << ',' << p.y << ',' << p.platform << ',' << p.plan.tp << ',' << p.plan.pp << ','
       << p.n_devices << ',' << to_string(p.mode) << '\n';
  return os.str();
}

}  // namespace xpu
