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
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xpu/catalog.hpp"
#include "xpu/error.hpp"
#include "xpu/workload.hpp"

namespace xpu {

struct ParallelismPlan {
  std::int64_t tp = 1;
  std::int64_t pp = 1;

  std::int64_t n_devices() const { return tp * pp; }
  bool operator==(const ParallelismPlan&) const = default;
  auto operator<=>(const ParallelismPlan&) const = default;
};

enum class CommMode { kOptimistic, kRealistic };

inline std::string_view to_string(CommMode m) {
  return m == CommMode::kOptimistic ? "optimistic" : "realistic";
}

inline CommMode parse_comm_mode(std::string_view s) {
  if (s == "optimistic") return CommMode::kOptimistic;
  if (s == "realistic") return CommMode::kRealistic;
  throw ValidationError("unknown mode '" + std::string(s) + "' (optimistic or realistic)");
}

struct ScenarioOptions {
  double headroom = 0.9;  // usable fraction of accessible memory
  std::int64_t max_devices = 4096;
  double bytes_per_act = 2.0;
  PrecisionOverrides precision;

  bool operator==(const ScenarioOptions&) const = default;
};

inline void validate(const ScenarioOptions& o) {
  if (!(o.headroom > 0 && o.headroom <= 1)) throw ValidationError("headroom must be in (0, 1]");
  if (o.max_devices < 1) throw ValidationError("max_devices must be >= 1");
  if (!(o.bytes_per_act > 0)) throw ValidationError("bytes_per_act must be > 0");
  if (o.precision.bytes_per_act && !(*o.precision.bytes_per_act > 0))
    throw ValidationError("bytes_per_act must be > 0");
  if (o.precision.bytes_per_param && !(*o.precision.bytes_per_param > 0))
    throw ValidationError("bytes_per_param must be > 0");
  if (o.precision.bytes_per_kv_elem && !(*o.precision.bytes_per_kv_elem > 0))
    throw ValidationError("bytes_per_kv_elem must be > 0");
}

inline double activation_bytes(const ScenarioOptions& o) {
  return o.precision.bytes_per_act.value_or(o.bytes_per_act);
}

inline std::int64_t round_up_to_quantum(const AcceleratorSpec& p, std::int64_t n) {
  const std::int64_t q = p.allocation_quantum;
  return (n + q - 1) / q * q;
}

// Weights plus the whole batch's KV cache at context_len.
inline double resident_bytes(const LlmModelConfig& m, std::int64_t batch,
                             std::int64_t context_len) {
  return weight_bytes(m) + kv_cache_bytes(m, batch, context_len);
}

// Smallest device count whose usable memory holds weights + KV cache, rounded
// up to the platform's allocation quantum.
inline std::int64_t min_devices(const AcceleratorSpec& p, const LlmModelConfig& m,
                                std::int64_t batch, std::int64_t context_len,
                                double headroom = 0.9, std::int64_t max_devices = 4096) {
  if (!(headroom > 0 && headroom <= 1)) throw ValidationError("headroom must be in (0, 1]");
  if (batch < 1 || context_len < 1)
    throw ValidationError("batch and context_len must be >= 1");
  const double need = resident_bytes(m, batch, context_len);
  const double per_device = p.mem_capacity_bytes * headroom;
  const double ratio = need / per_device;
  if (ratio > static_cast<double>(max_devices)) {
    throw InfeasibleError("capacity", "'" + m.name + "' needs more than " +
                                          std::to_string(max_devices) + " " + p.name +
                                          " devices");
  }
  auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ratio)));
  while (n > 1 && static_cast<double>(n - 1) * per_device >= need) --n;
  n = round_up_to_quantum(p, n);
  if (n > max_devices) {
    throw InfeasibleError("capacity", "'" + m.name + "' needs " + std::to_string(n) + " " +
                                          p.name + " devices, above the limit of " +
                                          std::to_string(max_devices));
  }
  return n;
}

// Why a plan cannot run on this platform/model, or nullopt if it can.
// Tensor parallel degree must divide the kv-head count, or be a multiple of
// it; in the latter case kv heads are replicated and the extra factor shards
// the cache along the sequence.
inline std::optional<std::string> plan_violation(const AcceleratorSpec& p,
                                                 const LlmModelConfig& m,
                                                 const ParallelismPlan& plan) {
  if (plan.tp < 1 || plan.pp < 1) return "divisibility";
  if (plan.tp > 1 && !p.supports(Parallelism::kTensor)) return "parallelism";
  if (plan.pp > 1 && !p.supports(Parallelism::kPipeline)) return "parallelism";
  if (m.n_kv_heads % plan.tp != 0 && plan.tp % m.n_kv_heads != 0) return "divisibility";
  if (plan.pp > m.n_layers) return "divisibility";
  return std::nullopt;
}

inline std::vector<ParallelismPlan> enumerate_plans(const AcceleratorSpec& p,
                                                    const LlmModelConfig& m,
                                                    std::int64_t n_devices) {
  if (n_devices < 1) throw ValidationError("n_devices must be >= 1");
  std::vector<ParallelismPlan> out;
  for (std::int64_t tp = 1; tp <= n_devices; ++tp) {
    if (n_devices % tp != 0) continue;
    ParallelismPlan plan{tp, n_devices / tp};
    if (!plan_violation(p, m, plan)) out.push_back(plan);
  }
  if (out.empty()) {
    throw InfeasibleError("divisibility",
                          "no tensor/pipeline factorization of " + std::to_string(n_devices) +
                              " devices is valid for '" + m.name + "' on " + p.name,
                          "EmptyPlanSet");
  }
  return out;
}

// Device counts explored for one scenario: min_devices up to
// min(4 * min_devices, max_devices), stepping by the allocation quantum.
inline std::vector<std::int64_t> candidate_device_counts(const AcceleratorSpec& p,
                                                         std::int64_t min_n,
                                                         std::int64_t max_devices = 4096) {
  std::vector<std::int64_t> out;
  const std::int64_t hi = std::min(4 * min_n, max_devices);
  for (std::int64_t n = min_n; n <= hi; n += p.allocation_quantum) out.push_back(n);
  return out;
}

struct CommCost {
  double bytes = 0.0;    // message volume
  double seconds = 0.0;

  bool operator==(const CommCost&) const = default;
};

struct CommBreakdown {
  CommCost tensor;
  CommCost pipeline;

  CommCost total() const {
    return {tensor.bytes + pipeline.bytes, tensor.seconds + pipeline.seconds};
  }
};

// Exposed communication for one forward pass of the given phase.
//  TP: two ring all-reduces per layer over m = B * s_tok * d_model * bytes_act,
//      each 2(tp-1)/tp * m / bw + 2(tp-1) * latency.
//  PP: pp-1 stage-boundary transfers of the same activation size, each
//      m / bw + latency.
// s_tok is the prompt length for prefill and 1 for decode. No overlap.
inline CommBreakdown comm_breakdown(const AcceleratorSpec& p, const LlmModelConfig& m,
                                    const InferencePoint& point, const ParallelismPlan& plan,
                                    Phase phase, double bytes_per_act = 2.0) {
  const double s_tok = phase == Phase::kPrefill ? static_cast<double>(point.prompt_len) : 1.0;
  const double msg = static_cast<double>(point.batch) * s_tok * static_cast<double>(m.d_model) *
                     bytes_per_act;
  const double bw = p.interconnect_bw_bytes_per_s;
  const double lat = p.interconnect_latency_s;
  auto transfer = [&](double factor) {
    if (!(bw > 0)) return std::numeric_limits<double>::infinity();
    return factor * msg / bw;
  };

  CommBreakdown out;
  if (plan.tp > 1) {
    const double tp = static_cast<double>(plan.tp);
    const double n_allreduce = 2.0 * static_cast<double>(m.n_layers);
    const double per = transfer(2.0 * (tp - 1.0) / tp) + 2.0 * (tp - 1.0) * lat;
    out.tensor = {n_allreduce * msg, n_allreduce * per};
  }
  if (plan.pp > 1) {
    const double hops = static_cast<double>(plan.pp - 1);
    out.pipeline = {hops * msg, hops * (transfer(1.0) + lat)};
  }
  return out;
}

inline CommCost comm_time(const AcceleratorSpec& p, const LlmModelConfig& m,
                          const InferencePoint& point, const ParallelismPlan& plan, Phase phase,
                          double bytes_per_act = 2.0) {
  return comm_breakdown(p, m, point, plan, phase, bytes_per_act).total();
}

struct ScenarioEstimate {
  std::string platform;
  std::string model;
  InferencePoint point;
  ParallelismPlan plan;
  CommMode mode = CommMode::kRealistic;
  double ttft_s = 0.0;
  double tpot_s = 0.0;
  double comm_prefill_s = 0.0;
  double comm_decode_s = 0.0;
  double energy_per_output_token_j = 0.0;
  double energy_per_input_token_j = 0.0;
  std::int64_t n_devices_allocated = 0;
  bool feasible = false;
  std::string reason;  // empty when feasible

  // Latency and energy axes for the given phase.
  double latency(Phase ph) const { return ph == Phase::kPrefill ? ttft_s : tpot_s; }
  double energy_per_token(Phase ph) const {
    return ph == Phase::kPrefill ? energy_per_input_token_j : energy_per_output_token_j;
  }
};

inline ScenarioEstimate infeasible_estimate(const AcceleratorSpec& p, const LlmModelConfig& m,
                                            const InferencePoint& point,
                                            const ParallelismPlan& plan, CommMode mode,
                                            std::string reason) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  ScenarioEstimate e;
  e.platform = p.name;
  e.model = m.name;
  e.point = point;
  e.plan = plan;
  e.mode = mode;
  e.ttft_s = e.tpot_s = e.comm_prefill_s = e.comm_decode_s = nan;
  e.energy_per_output_token_j = e.energy_per_input_token_j = nan;
  e.n_devices_allocated = round_up_to_quantum(p, std::max<std::int64_t>(1, plan.n_devices()));
  e.feasible = false;
  e.reason = std::move(reason);
  return e;
}

// Latency and energy for one (platform, model, point, plan, mode). Infeasible
// plans come back with feasible=false and a reason of capacity, divisibility,
// parallelism or quantum.
//
//  TTFT = max(prefill FLOPs / (tp * peak), (weights + prompt KV) / (tp * bw))
//         + exposed prefill comm
//  TPOT = max((weights + KV) / (tp * bw), B * decode FLOPs / (tp * peak))
//         + exposed decode comm
// Pipeline stages run one after another for a single prompt, so pp adds
// capacity but does not shorten either phase.
//  energy/output token = n_alloc * tdp * decode_fraction * TPOT / B
//  energy/input token  = n_alloc * tdp * prefill_fraction * TTFT / (B * s)
inline ScenarioEstimate estimate(const AcceleratorSpec& p, const LlmModelConfig& base_model,
                                 const InferencePoint& point, const ParallelismPlan& plan,
                                 CommMode mode, const ScenarioOptions& opts = {}) {
  validate(point);
  validate(opts);
  const LlmModelConfig m = with_precision(base_model, opts.precision);

  if (auto why = plan_violation(p, m, plan))
    return infeasible_estimate(p, m, point, plan, mode, *why);
  const std::int64_t n_alloc = round_up_to_quantum(p, plan.n_devices());
  if (n_alloc > opts.max_devices)
    return infeasible_estimate(p, m, point, plan, mode, "quantum");

  const double weights = weight_bytes(m);
  const double kv_ctx = kv_cache_bytes(m, point.batch, point.context_len);
  const double kv_prompt = kv_cache_bytes(m, point.batch, point.prompt_len);
  const double tp = static_cast<double>(plan.tp);
  const double per_device = (weights + kv_ctx) / static_cast<double>(plan.n_devices());
  if (per_device > p.mem_capacity_bytes * opts.headroom)
    return infeasible_estimate(p, m, point, plan, mode, "capacity");

  const double batch = static_cast<double>(point.batch);
  const InferencePoint prefill_point{point.batch, point.prompt_len, point.context_len,
                                     Phase::kPrefill};
  const double ttft_compute = std::max(prefill_flops(m, prefill_point) / (tp * p.peak_flops),
                                       (weights + kv_prompt) / (tp * p.mem_bw_bytes_per_s));
  const double tpot_compute =
      std::max((weights + kv_ctx) / (tp * p.mem_bw_bytes_per_s),
               batch * decode_flops_per_token(m, point.context_len) / (tp * p.peak_flops));

  double comm_prefill = 0.0, comm_decode = 0.0;
  if (mode == CommMode::kRealistic) {
    const double act = activation_bytes(opts);
    comm_prefill = comm_time(p, m, point, plan, Phase::kPrefill, act).seconds;
    comm_decode = comm_time(p, m, point, plan, Phase::kDecode, act).seconds;
  }

  ScenarioEstimate e;
  e.platform = p.name;
  e.model = m.name;
  e.point = point;
  e.plan = plan;
  e.mode = mode;
  e.ttft_s = ttft_compute + comm_prefill;
  e.tpot_s = tpot_compute + comm_decode;
  e.comm_prefill_s = comm_prefill;
  e.comm_decode_s = comm_decode;
  const double fleet_w = static_cast<double>(n_alloc) * p.tdp_w;
  e.energy_per_output_token_j = fleet_w * p.decode_power_fraction * e.tpot_s / batch;
  e.energy_per_input_token_j = fleet_w * p.prefill_power_fraction * e.ttft_s /
                               (batch * static_cast<double>(point.prompt_len));
  e.n_devices_allocated = n_alloc;
  e.feasible = true;
  return e;
}

// Throws InfeasibleError for an infeasible estimate; returns it otherwise.
inline const ScenarioEstimate& require_feasible(const ScenarioEstimate& e) {
  if (!e.feasible) {
    throw InfeasibleError(e.reason, "plan tp=" + std::to_string(e.plan.tp) + " pp=" +
                                        std::to_string(e.plan.pp) + " is infeasible for '" +
                                        e.model + "' on " + e.platform + ": " + e.reason,
                          "InfeasiblePlan");
  }
  return e;
}

inline Json to_json(const InferencePoint& p) {
  return Json{{"batch", p.batch},
              {"prompt_len", p.prompt_len},
              {"context_len", p.context_len},
              {"phase", std::string(to_string(p.phase))}};
}

inline Json to_json(const ParallelismPlan& p) {
  return Json{{"tp", p.tp}, {"pp", p.pp}, {"n_devices", p.n_devices()}};
}

inline Json to_json(const ScenarioEstimate& e) {
  return Json{{"platform", e.platform},
              {"model", e.model},
              {"point", to_json(e.point)},
              {"plan", to_json(e.plan)},
              {"mode", std::string(to_string(e.mode))},
              {"ttft_s", e.ttft_s},
              {"tpot_s", e.tpot_s},
              {"comm_prefill_s", e.comm_prefill_s},
              {"comm_decode_s", e.comm_decode_s},
              {"energy_per_output_token_j", e.energy_per_output_token_j},
              {"energy_per_input_token_j", e.energy_per_input_token_j},
              {"n_devices_allocated", e.n_devices_allocated},
              {"feasible", e.feasible},
              {"reason", e.reason}};
}

inline std::string estimates_csv_header() {
  return "platform,model,batch,prompt_len,context_len,phase,tp,pp,n_devices,mode,ttft_s,tpot_s,"
         "comm_prefill_s,comm_decode_s,energy_per_output_token_j,energy_per_input_token_j,"
         "n_devices_allocated,feasible,reason\n";
}

inline std::string to_csv(const std::vector<ScenarioEstimate>& estimates) {
  std::ostringstream os;
  os.precision(17);
  os << estimates_csv_header();
  for (const auto& e : estimates) {
    os << e.platform << ',' << e.model << ',' << e.point.batch << ',' << e.point.prompt_len << ','
       << e.point.context_len << ',' << to_string(e.point.phase) << ',' << e.plan.tp << ','
       << e.plan.pp << ',' << e.plan.n_devices() << ',' << to_string(e.mode) << ',' << e.ttft_s
       << ',' << e.tpot_s << ',' << e.comm_prefill_s << ',' << e.comm_decode_s << ','
       << e.energy_per_output_token_j << ',' << e.energy_per_input_token_j << ','
       << e.n_devices_allocated << ',' << (e.feasible ? "true" : "false") << ',' << e.reason
       << '\n';
  }
  return os.str();
}

}  // namespace xpu
