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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"
#include "xpu/explorer.hpp"

namespace xpu {
namespace {

using testing::bundled;

// A point stays unless another is no worse on both axes and better on one.
std::vector<std::size_t> pareto_by_dominance(const std::vector<LabeledPoint>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      dominated = pts[j].x <= pts[i].x && pts[j].y <= pts[i].y &&
                  (pts[j].x < pts[i].x || pts[j].y < pts[i].y);
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

std::vector<LabeledPoint> random_points(std::mt19937_64& rng) {
  const auto n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
  const bool grid = std::bernoulli_distribution(0.5)(rng);  // coarse grid forces ties
  std::vector<LabeledPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    double x, y;
    if (grid) {
      x = static_cast<double>(std::uniform_int_distribution<int>(0, 10)(rng));
      y = static_cast<double>(std::uniform_int_distribution<int>(0, 10)(rng));
    } else {
      x = std::uniform_real_distribution<double>(0, 1)(rng);
      y = std::uniform_real_distribution<double>(0, 1)(rng);
    }
    pts.push_back({x, y, std::to_string(i)});
  }
  return pts;
}

TEST(Pareto, MatchesDominanceOracle) {
  std::mt19937_64 rng(2024);
  for (int inst = 0; inst < 200; ++inst) {
    const auto pts = random_points(rng);
    auto got = pareto_indices(std::span<const LabeledPoint>(pts), [](const auto& p) { return p.x; },
                              [](const auto& p) { return p.y; });
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, pareto_by_dominance(pts)) << "instance " << inst;
  }
}

TEST(Pareto, FrontierIsMutuallyNonDominatedAndCoversEveryPoint) {
  std::mt19937_64 rng(99);
  for (int inst = 0; inst < 50; ++inst) {
    const auto pts = random_points(rng);
    const auto front = pareto(pts);
    ASSERT_FALSE(front.empty());
    for (const auto& a : front)
      for (const auto& b : front)
        EXPECT_FALSE(b.x <= a.x && b.y <= a.y && (b.x < a.x || b.y < a.y));
    for (const auto& p : pts) {
      const bool covered = std::any_of(front.begin(), front.end(),
                                       [&](const auto& f) { return f.x <= p.x && f.y <= p.y; });
      EXPECT_TRUE(covered);
    }
  }
}

TEST(Pareto, EdgeCases) {
  EXPECT_THROW(pareto(std::vector<LabeledPoint>{}), ValidationError);
  const std::vector<LabeledPoint> one{{1, 1, "a"}};
  EXPECT_EQ(pareto(one), one);
  const std::vector<LabeledPoint> dup{{1, 1, "a"}, {1, 1, "b"}, {2, 2, "c"}};
  EXPECT_EQ(pareto(dup).size(), 2u);
  const std::vector<LabeledPoint> nan{{1, std::numeric_limits<double>::quiet_NaN(), "a"}};
  EXPECT_THROW(pareto(nan), ValidationError);
}

SweepSpec long_context_spec() {
  SweepSpec s;
  s.platforms = bundled().platform_names();
  s.models = {"Llama-3.1-70B"};
  s.batches = {1};
  s.context_lens = {131072};
  s.phases = {Phase::kDecode};
  return s;
}

TEST(Sweep, GroqOnlyOnOptimisticFrontierAtLongContext) {
  const auto est = run_sweep(bundled(), long_context_spec());
  EXPECT_TRUE(frontier_membership(est, Phase::kDecode, "Groq", CommMode::kOptimistic));
  EXPECT_FALSE(frontier_membership(est, Phase::kDecode, "Groq", CommMode::kRealistic));
}

TEST(Sweep, CerebrasLeavesPrefillFrontierBeforeDecodeFrontier) {
  auto spec = long_context_spec();
  spec.batches = {1, 4, 16, 64, 256};
  spec.phases = {Phase::kPrefill, Phase::kDecode};
  spec.mode = ModeSelection::kRealistic;
  const auto est = run_sweep(bundled(), spec);
  auto on = [&](std::int64_t b, Phase ph) {
    std::vector<ScenarioEstimate> cell;
    for (const auto& e : est)
      if (e.point.batch == b) cell.push_back(e);
    return frontier_membership(cell, ph, "CS-3", CommMode::kRealistic);
  };
  EXPECT_TRUE(on(1, Phase::kPrefill));
  EXPECT_TRUE(on(1, Phase::kDecode));
  EXPECT_FALSE(on(64, Phase::kPrefill));
  auto exit_batch = [&](Phase ph) {
    for (auto b : spec.batches)
      if (!on(b, ph)) return b;
    return std::int64_t{1} << 40;
  };
  EXPECT_GE(exit_batch(Phase::kDecode), exit_batch(Phase::kPrefill));
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  SweepSpec s;
  s.platforms = bundled().platform_names();
  s.models = {"Llama-3.1-8B", "Llama-3.1-70B"};
  s.batches = {1, 8};
  s.context_lens = {2048, 8192};
  const auto a = run_sweep(bundled(), s, 1);
  const auto b = run_sweep(bundled(), s, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
}

TEST(Sweep, InfeasibleScenariosCarryReasons) {
  SweepSpec s;
  s.platforms = {"Groq"};
  s.models = {"Llama-3.1-405B"};
  s.batches = {256};
  s.context_lens = {131072};
  s.phases = {Phase::kDecode};
  s.mode = ModeSelection::kRealistic;
  const auto est = run_sweep(bundled(), s);
  ASSERT_EQ(est.size(), 1u);
  EXPECT_FALSE(est[0].feasible);
  EXPECT_EQ(est[0].reason, "capacity");
  EXPECT_TRUE(frontier(est, Phase::kDecode, CommMode::kRealistic).points.empty());
}

TEST(Sweep, PlatformOverridesApplyOnlyToThatPlatform) {
  SweepSpec s;
  s.platforms = {"H100", "Groq"};
  s.models = {"Llama-3.1-8B"};
  s.batches = {1};
  s.context_lens = {4096};
  s.platform_overrides["Groq"].bytes_per_param = 1;
  EXPECT_EQ(options_for(s, "Groq").precision.bytes_per_param, 1.0);
  EXPECT_FALSE(options_for(s, "H100").precision.bytes_per_param);
}

TEST(Sweep, RejectsBadSpecs) {
  SweepSpec s;
  EXPECT_THROW(run_sweep(bundled(), s), ValidationError);
  s = long_context_spec();
  s.batches = {0};
  EXPECT_THROW(run_sweep(bundled(), s), ValidationError);
  s = long_context_spec();
  s.platforms = {"H200"};
  EXPECT_THROW(run_sweep(bundled(), s), NotFoundError);
}

TEST(Frontier, JsonAndCsv) {
  const auto est = run_sweep(bundled(), long_context_spec());
  const auto f = frontier(est, Phase::kDecode, CommMode::kRealistic);
  ASSERT_FALSE(f.points.empty());
  const auto j = to_json(f);
  EXPECT_EQ(j["axis_x"], "tpot_s");
  EXPECT_EQ(j["axis_y"], "energy_per_output_token_j");
  EXPECT_EQ(to_csv(f).substr(0, 33), "x,y,platform,tp,pp,n_devices,mode");
  const auto best = best_per_platform(est, Phase::kDecode);
  EXPECT_TRUE(best.count("MI300"));
}

}  // namespace
}  // namespace xpu
