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

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "xpu/distmodel.hpp"

namespace xpu {
namespace {

using testing::bundled;
using testing::random_toy_model;
using testing::toy_platform;

// Smallest multiple of the quantum whose usable memory holds the model.
std::int64_t min_devices_by_search(const AcceleratorSpec& p, const LlmModelConfig& m,
                                   std::int64_t batch, std::int64_t t, double headroom) {
  const double need = weight_bytes(m) + kv_cache_bytes(m, batch, t);
  for (std::int64_t n = p.allocation_quantum;; n += p.allocation_quantum)
    if (static_cast<double>(n) * p.mem_capacity_bytes * headroom >= need) return n;
}

TEST(MinDevices, Llama70BLongContext) {
  const auto& c = bundled();
  const auto& m = c.model("Llama-3.1-70B");
  EXPECT_EQ(min_devices(c.platform("MI300"), m, 1, 131072, 0.9), 2);
  EXPECT_EQ(min_devices(c.platform("CS-3"), m, 1, 131072, 0.9), 5);

  const auto& groq = c.platform("Groq");
  PrecisionOverrides fp8w;
  fp8w.bytes_per_param = 1;
  EXPECT_EQ(min_devices(groq, with_precision(m, fp8w), 1, 131072, 0.9), 576);
  fp8w.bytes_per_kv_elem = 1;
  EXPECT_EQ(min_devices(groq, with_precision(m, fp8w), 1, 131072, 0.9), 504);
  EXPECT_EQ(min_devices(groq, m, 1, 131072, 0.9) % 72, 0);
}

TEST(MinDevices, MatchesLinearSearchOnRandomScenarios) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto p = toy_platform();
    p.mem_capacity_bytes = std::uniform_real_distribution<double>(1e5, 1e8)(rng);
    p.allocation_quantum = std::uniform_int_distribution<std::int64_t>(1, 9)(rng);
    const auto m = random_toy_model(rng, i);
    const auto b = std::uniform_int_distribution<std::int64_t>(1, 16)(rng);
    const auto t = std::uniform_int_distribution<std::int64_t>(1, 4096)(rng);
    const double h = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    const auto expect = min_devices_by_search(p, m, b, t, h);
    if (expect > 4096) {
      EXPECT_THROW(min_devices(p, m, b, t, h), InfeasibleError);
    } else {
      EXPECT_EQ(min_devices(p, m, b, t, h), expect) << i;
    }
  }
}

TEST(MinDevices, CapacityExhaustion) {
  const auto& c = bundled();
  try {
    min_devices(c.platform("Groq"), c.model("Llama-3.1-405B"), 64, 131072, 0.9);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.reason(), "capacity");
  }
  EXPECT_THROW(min_devices(c.platform("H100"), c.model("Llama-3.1-8B"), 1, 10, 0.0), ValidationError);
}

// Every factorization of n with the divisibility and support rules applied
// directly.
std::vector<ParallelismPlan> plans_by_brute_force(const AcceleratorSpec& p, const LlmModelConfig& m,
                                                  std::int64_t n) {
  std::vector<ParallelismPlan> out;
  for (std::int64_t tp = 1; tp <= n; ++tp)
    for (std::int64_t pp = 1; pp <= n; ++pp) {
      if (tp * pp != n) continue;
      const bool kv_ok = m.n_kv_heads % tp == 0 || tp % m.n_kv_heads == 0;
      const bool tp_ok = tp == 1 || p.supports(Parallelism::kTensor);
      const bool pp_ok = pp == 1 || p.supports(Parallelism::kPipeline);
      if (kv_ok && tp_ok && pp_ok && pp <= m.n_layers) out.push_back({tp, pp});
    }
  return out;
}

TEST(Plans, MatchBruteForce) {
  const auto& c = bundled();
  for (const auto& p : c.platforms())
    for (const auto& m : c.models())
      for (std::int64_t n : {1, 2, 3, 6, 8, 12, 16, 24, 72, 96, 144, 576}) {
        const auto expect = plans_by_brute_force(p, m, n);
        if (expect.empty()) {
          EXPECT_THROW(enumerate_plans(p, m, n), InfeasibleError);
        } else {
          EXPECT_EQ(enumerate_plans(p, m, n), expect) << p.name << " " << m.name << " n=" << n;
        }
      }
}

TEST(Plans, KvHeadRule) {
  const auto& c = bundled();
  const auto& m = c.model("Llama-3.1-70B");  // 8 kv heads
  const auto& h = c.platform("H100");
  EXPECT_FALSE(plan_violation(h, m, {8, 1}));
  EXPECT_FALSE(plan_violation(h, m, {16, 1}));
  EXPECT_EQ(plan_violation(h, m, {12, 1}), "divisibility");
  EXPECT_EQ(plan_violation(h, m, {3, 1}), "divisibility");
  EXPECT_EQ(plan_violation(c.platform("CS-3"), m, {2, 1}), "parallelism");
  EXPECT_EQ(plan_violation(h, m, {1, 81}), "divisibility");
}

TEST(Comm, SingleDeviceAndHandComputedCosts) {
  const auto p = toy_platform();
  std::mt19937_64 rng(3);
  const auto m = random_toy_model(rng);
  const InferencePoint pt{4, 128, 256, Phase::kPrefill};
  EXPECT_EQ(comm_time(p, m, pt, {1, 1}, Phase::kPrefill).seconds, 0.0);

  const double msg_prefill = 4.0 * 128 * m.d_model * 2;
  const double tp = 4;
  const double ar = 2 * (tp - 1) / tp * msg_prefill / p.interconnect_bw_bytes_per_s +
                    2 * (tp - 1) * p.interconnect_latency_s;
  const auto b = comm_breakdown(p, m, pt, {4, 3}, Phase::kPrefill);
  EXPECT_DOUBLE_EQ(b.tensor.seconds, 2.0 * m.n_layers * ar);
  EXPECT_DOUBLE_EQ(b.pipeline.seconds,
                   2 * (msg_prefill / p.interconnect_bw_bytes_per_s + p.interconnect_latency_s));
  EXPECT_DOUBLE_EQ(b.total().seconds, b.tensor.seconds + b.pipeline.seconds);

  const auto d = comm_breakdown(p, m, pt, {4, 3}, Phase::kDecode);
  EXPECT_LT(d.total().seconds, b.total().seconds);
}

TEST(Comm, GrowsWithTensorDegree) {
  const auto& c = bundled();
  const auto& m = c.model("Llama-3.1-70B");
  const auto& h = c.platform("H100");
  const InferencePoint pt{1, 4096, 4096, Phase::kDecode};
  double prev = 0;
  for (std::int64_t tp : {2, 4, 8, 16}) {
    const double s = comm_time(h, m, pt, {tp, 1}, Phase::kDecode).seconds;
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(Estimate, MatchesHandComputedFormulas) {
  const auto p = toy_platform();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    auto m = random_toy_model(rng, i);
    const InferencePoint pt{3, 64, 96, Phase::kDecode};
    const ParallelismPlan plan{m.n_kv_heads, 2};
    if (plan.pp > m.n_layers) continue;
    for (auto mode : {CommMode::kOptimistic, CommMode::kRealistic}) {
      const auto e = estimate(p, m, pt, plan, mode);
      ASSERT_TRUE(e.feasible) << e.reason;
      const double tpd = static_cast<double>(plan.tp);
      const double W = m.n_params * m.bytes_per_param;
      const double kv_t = 2.0 * m.n_layers * m.n_kv_heads * m.d_head * 96 * 3 * m.bytes_per_kv_elem;
      const double kv_s = 2.0 * m.n_layers * m.n_kv_heads * m.d_head * 64 * 3 * m.bytes_per_kv_elem;
      const double flops_prefill = 3.0 * (2.0 * m.n_params * 64 + 2.0 * m.n_layers * 64 * 64 * m.d_model);
      const double flops_decode = 2.0 * m.n_params + 4.0 * m.n_layers * 96 * m.d_model;
      double ttft = std::max(flops_prefill / (tpd * p.peak_flops), (W + kv_s) / (tpd * p.mem_bw_bytes_per_s));
      double tpot = std::max((W + kv_t) / (tpd * p.mem_bw_bytes_per_s), 3 * flops_decode / (tpd * p.peak_flops));
      if (mode == CommMode::kRealistic) {
        ttft += comm_time(p, m, pt, plan, Phase::kPrefill).seconds;
        tpot += comm_time(p, m, pt, plan, Phase::kDecode).seconds;
      } else {
        EXPECT_EQ(e.comm_prefill_s, 0.0);
        EXPECT_EQ(e.comm_decode_s, 0.0);
      }
      const double n = static_cast<double>(plan.n_devices());
      EXPECT_DOUBLE_EQ(e.ttft_s, ttft);
      EXPECT_DOUBLE_EQ(e.tpot_s, tpot);
      EXPECT_DOUBLE_EQ(e.energy_per_output_token_j, n * p.tdp_w * p.decode_power_fraction * tpot / 3);
      EXPECT_DOUBLE_EQ(e.energy_per_input_token_j, n * p.tdp_w * p.prefill_power_fraction * ttft / (3 * 64));
    }
  }
}

TEST(Estimate, RealisticNeverFasterThanOptimistic) {
  const auto& c = bundled();
  const auto& m = c.model("Llama-3.1-70B");
  for (const auto& p : c.platforms()) {
    const InferencePoint pt{4, 8192, 8192, Phase::kDecode};
    std::int64_t n = 0;
    try {
      n = min_devices(p, m, 4, 8192);
    } catch (const InfeasibleError&) {
      continue;
    }
    for (const auto& plan : enumerate_plans(p, m, n)) {
      const auto o = estimate(p, m, pt, plan, CommMode::kOptimistic);
      const auto r = estimate(p, m, pt, plan, CommMode::kRealistic);
      if (!o.feasible) continue;
      EXPECT_GE(r.ttft_s, o.ttft_s);
      EXPECT_GE(r.tpot_s, o.tpot_s);
      EXPECT_GE(r.energy_per_output_token_j, o.energy_per_output_token_j);
    }
  }
}

TEST(Estimate, InfeasibleReasons) {
  const auto& c = bundled();
  const auto& m70 = c.model("Llama-3.1-70B");
  const InferencePoint pt{1, 1024, 1024, Phase::kDecode};
  EXPECT_EQ(estimate(c.platform("Groq"), m70, pt, {1, 1}, CommMode::kRealistic).reason, "capacity");
  EXPECT_EQ(estimate(c.platform("CS-3"), m70, pt, {2, 1}, CommMode::kRealistic).reason, "parallelism");
  EXPECT_EQ(estimate(c.platform("H100"), m70, pt, {3, 1}, CommMode::kRealistic).reason, "divisibility");
  ScenarioOptions small;
  small.max_devices = 50;
  EXPECT_EQ(estimate(c.platform("Groq"), m70, pt, {8, 2}, CommMode::kRealistic, small).reason, "quantum");

  const auto bad = estimate(c.platform("Groq"), m70, pt, {1, 1}, CommMode::kRealistic);
  EXPECT_FALSE(bad.feasible);
  EXPECT_TRUE(std::isnan(bad.tpot_s));
  const auto j = to_json(bad);
  EXPECT_TRUE(j["tpot_s"].is_number() || j["tpot_s"].is_null());
  EXPECT_EQ(Json::parse(j.dump())["tpot_s"], nullptr);
  try {
    require_feasible(bad);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.reason(), "capacity");
  }
}

TEST(Estimate, EnergyUsesAllocatedDevices) {
  const auto& c = bundled();
  const auto& groq = c.platform("Groq");
  const auto& m = c.model("Llama-3.1-8B");
  const InferencePoint pt{1, 128, 128, Phase::kDecode};
  ScenarioOptions fp8;
  fp8.precision.bytes_per_param = 1;
  const auto e = estimate(groq, m, pt, {4, 16}, CommMode::kOptimistic, fp8);
  ASSERT_TRUE(e.feasible) << e.reason;
  EXPECT_EQ(e.n_devices_allocated, 72);
  EXPECT_DOUBLE_EQ(e.energy_per_output_token_j, 72 * groq.tdp_w * groq.decode_power_fraction * e.tpot_s);
}

TEST(Estimate, Serialization) {
  const auto& c = bundled();
  const auto e = estimate(c.platform("H100"), c.model("Llama-3.1-8B"), {2, 512, 1024, Phase::kPrefill},
                          {2, 1}, CommMode::kRealistic);
  const auto j = to_json(e);
  EXPECT_EQ(j["platform"], "H100");
  EXPECT_EQ(j["plan"]["n_devices"], 2);
  EXPECT_EQ(j["mode"], "realistic");
  EXPECT_EQ(j["point"]["phase"], "prefill");
  const auto csv = to_csv(std::vector{e});
  EXPECT_EQ(csv.substr(0, csv.find('\n') + 1), estimates_csv_header());
  EXPECT_EQ(parse_comm_mode("optimistic"), CommMode::kOptimistic);
  EXPECT_THROW(parse_comm_mode("pessimistic"), ValidationError);
}

}  // namespace
}  // namespace xpu
