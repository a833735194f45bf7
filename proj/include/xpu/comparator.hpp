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
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xpu/catalog.hpp"
#include "xpu/error.hpp"

namespace xpu {

struct RooflinePoint {
  double arithmetic_intensity = 0.0;  // FLOP/byte
  double attainable_flops = 0.0;      // FLOP/s
};

struct Roofline {
  std::string platform;
  double peak_flops = 0.0;
  double mem_bw_bytes_per_s = 0.0;
  double ridge_point = 0.0;
  std::vector<RooflinePoint> points;
};

inline double attainable_flops(const AcceleratorSpec& p, double arithmetic_intensity) {
  return std::min(p.peak_flops, arithmetic_intensity * p.mem_bw_bytes_per_s);
}

inline Roofline roofline(const AcceleratorSpec& p, std::span<const double> ai_samples) {
  Roofline r{p.name, p.peak_flops, p.mem_bw_bytes_per_s, p.ridge_point(), {}};
  r.points.reserve(ai_samples.size());
  for (double ai : ai_samples) {
    if (!(ai > 0) || !std::isfinite(ai))
      throw ValidationError("arithmetic intensity samples must be positive and finite");
    r.points.push_back({ai, attainable_flops(p, ai)});
  }
  return r;
}

// n samples spaced evenly in log10 between lo and hi (inclusive).
inline std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0) || !(hi >= lo) || n < 1)
    throw ValidationError("log_spaced requires 0 < lo <= hi and n >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  if (n == 1) return {lo};
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
  out.back() = hi;
  return out;
}

enum class EquivMetric { kPowerPerFlops, kBwPerCapacity, kAreaEfficiency };

inline std::string_view to_string(EquivMetric m) {
  switch (m) {
    case EquivMetric::kPowerPerFlops: return "PowerPerFlops";
    case EquivMetric::kBwPerCapacity: return "BwPerCapacity";
    case EquivMetric::kAreaEfficiency: return "AreaEfficiency";
  }
  return "?";
}

// Accepts the canonical names and the short CLI spellings (power, bwcap, area).
inline EquivMetric parse_equiv_metric(std::string_view s) {
  if (s == "PowerPerFlops" || s == "power") return EquivMetric::kPowerPerFlops;
  if (s == "BwPerCapacity" || s == "bwcap" || s == "bandwidth") return EquivMetric::kBwPerCapacity;
  if (s == "AreaEfficiency" || s == "area") return EquivMetric::kAreaEfficiency;
  throw ValidationError("unknown metric '" + std::string(s) +
                        "' (expected power, bwcap or area)");
}

struct PairwiseMatrix {
  EquivMetric metric = EquivMetric::kPowerPerFlops;
  std::vector<std::string> platforms;
  std::vector<std::vector<double>> values;  // values[a][b]

  double at(std::string_view a, std::string_view b) const {
    auto idx = [&](std::string_view n) {
      auto it = std::find(platforms.begin(), platforms.end(), n);
      if (it == platforms.end())
        throw NotFoundError("platform", std::string(n), {});
      return static_cast<std::size_t>(it - platforms.begin());
    };
    return values[idx(a)][idx(b)];
  }
};

namespace detail {

// Per-platform score whose ratio gives the matrix entry.
//  PowerPerFlops: tdp/peak. Scaling platform a to platform b's FLOPS takes
//    peak_b/peak_a copies of a, so a's power relative to b is
//    (tdp_a * peak_b/peak_a) / tdp_b = (tdp_a/peak_a) / (tdp_b/peak_b).
//  BwPerCapacity: bw/cap. The FLOPS-equalizing factor multiplies bandwidth and
//    capacity alike and cancels.
//  AreaEfficiency: peak/area.
inline double equiv_score(EquivMetric m, const AcceleratorSpec& p) {
  switch (m) {
    case EquivMetric::kPowerPerFlops:
      if (!(p.tdp_w > 0)) throw ValidationError("platform '" + p.name + "' lacks tdp_w", "MissingField");
      return p.tdp_w / p.peak_flops;
    case EquivMetric::kBwPerCapacity:
      return p.mem_bw_bytes_per_s / p.mem_capacity_bytes;
    case EquivMetric::kAreaEfficiency:
      if (!(p.die_area_mm2 > 0))
        throw ValidationError("platform '" + p.name + "' lacks die_area_mm2", "MissingField");
      return p.peak_flops / p.die_area_mm2;
  }
  return 0.0;
}

}  // namespace detail

inline PairwiseMatrix equivalency_matrix(EquivMetric metric,
                                         const std::vector<AcceleratorSpec>& platforms) {
  if (platforms.empty()) throw ValidationError("equivalency matrix needs at least one platform");
  PairwiseMatrix out;
  out.metric = metric;
  std::vector<double> score;
  for (const auto& p : platforms) {
    out.platforms.push_back(p.name);
    score.push_back(detail::equiv_score(metric, p));
  }
  const std::size_t n = platforms.size();
  out.values.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) out.values[a][b] = score[a] / score[b];
  return out;
}

inline Json to_json(const Roofline& r) {
  Json pts = Json::array();
  for (const auto& p : r.points)
    pts.push_back(Json{{"arithmetic_intensity", p.arithmetic_intensity},
                       {"attainable_flops", p.attainable_flops}});
  return Json{{"platform", r.platform},
              {"peak_flops", r.peak_flops},
              {"mem_bw_bytes_per_s", r.mem_bw_bytes_per_s},
              {"ridge_point", r.ridge_point},
              {"points", pts}};
}

inline Json to_json(const PairwiseMatrix& m) {
  Json values = Json::array();
  for (const auto& row : m.values) values.push_back(row);
  return Json{{"metric", std::string(to_string(m.metric))},
              {"platforms", m.platforms},
              {"values", values}};
}

inline std::string to_csv(const std::vector<Roofline>& rooflines) {
  std::ostringstream os;
  os.precision(17);
  os << "platform,arithmetic_intensity,attainable_flops\n";
  for (const auto& r : rooflines)
    for (const auto& p : r.points)
      os << r.platform << ',' << p.arithmetic_intensity << ',' << p.attainable_flops << '\n';
  return os.str();
}

inline std::string to_csv(const PairwiseMatrix& m) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(m.metric);
  for (const auto& p : m.platforms) os << ',' << p;
  os << '\n';
  for (std::size_t a = 0; a < m.platforms.size(); ++a) {
    os << m.platforms[a];
    for (double v : m.values[a]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace xpu
