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

// Command-line front end. Each subcommand collects its flags into a parameter
// object and runs the same handler the HTTP service uses.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "xpu/api.hpp"
#include "xpu/service.hpp"

#ifndef XPU_DATA_DIR
#define XPU_DATA_DIR "data"
#endif

namespace {

using xpu::Json;

template <class T>
void put(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

void put_list(Json& j, const char* key, const std::vector<std::string>& v) {
  if (!v.empty()) j[key] = v;
}

template <class T>
void put_list(Json& j, const char* key, const std::vector<T>& v) {
  if (!v.empty()) j[key] = v;
}

std::string default_catalog() {
  if (const char* env = std::getenv("XPU_CATALOG"); env && *env) return env;
  return std::string(XPU_DATA_DIR) + "/reference_catalog.json";
}

// Flag storage for every subcommand; unset optionals are left out of the request.
struct Flags {
  std::string catalog = default_catalog();
  std::string out;

  std::vector<std::string> platforms, models, phases;
  std::vector<std::int64_t> batches, seqlens;
  std::optional<std::string> platform, model, metric, phase, mode, baseline, reference;
  std::optional<std::int64_t> batch, seqlen, prompt_len, tp, pp, samples, max_devices;
  std::optional<double> headroom, ai_min, ai_max, bytes_per_param, bytes_per_kv, bytes_per_act;
  bool with_reference = false;

  std::optional<std::string> file, latency_file, cycles_file, spec_file, calibration;
  std::optional<double> idle_hint, threshold_multiplier, merge_gap, tdp;
  std::optional<double> p_benchmark, p_idle, duration, bytes, distance;

  std::optional<std::string> a_platform, b_platform, a_phase, b_phase;
  std::optional<std::int64_t> a_devices, b_devices;
  std::optional<double> a_throughput, b_throughput, a_active, b_active;

  std::string addr = "127.0.0.1:8080";
};

void precision_flags(CLI::App* c, Flags& f) {
  c->add_option("--bytes-per-param", f.bytes_per_param, "Weight bytes per parameter override");
  c->add_option("--bytes-per-kv", f.bytes_per_kv, "KV-cache bytes per element override");
  c->add_option("--bytes-per-act", f.bytes_per_act, "Activation bytes per element override");
}

void put_precision(Json& j, const Flags& f) {
  put(j, "bytes_per_param", f.bytes_per_param);
  put(j, "bytes_per_kv_elem", f.bytes_per_kv);
  put(j, "bytes_per_act", f.bytes_per_act);
}

std::string read_text(const std::string& path) { return xpu::read_file(path); }

// Translates parsed flags into the handler's parameter object.
Json build_params(const std::string& cmd, const Flags& f) {
  Json j = Json::object();
  if (cmd == "roofline") {
    put_list(j, "platforms", f.platforms);
    put(j, "ai_min", f.ai_min);
    put(j, "ai_max", f.ai_max);
    put(j, "samples", f.samples);
  } else if (cmd == "equiv") {
    put(j, "metric", f.metric);
    put_list(j, "platforms", f.platforms);
  } else if (cmd == "scaleout") {
    put(j, "model", f.model);
    put_list(j, "platforms", f.platforms);
    put(j, "batch", f.batch);
    put(j, "context_len", f.seqlen);
    put(j, "headroom", f.headroom);
    put(j, "max_devices", f.max_devices);
    put(j, "bytes_per_param", f.bytes_per_param);
    put(j, "bytes_per_kv_elem", f.bytes_per_kv);
    if (f.with_reference) j["reference"] = true;
  } else if (cmd == "estimate") {
    put(j, "platform", f.platform);
    put(j, "model", f.model);
    put(j, "batch", f.batch);
    put(j, "context_len", f.seqlen);
    put(j, "prompt_len", f.prompt_len);
    put(j, "phase", f.phase);
    put(j, "mode", f.mode);
    put(j, "tp", f.tp);
    put(j, "pp", f.pp);
    put(j, "headroom", f.headroom);
    put(j, "max_devices", f.max_devices);
    put_precision(j, f);
  } else if (cmd == "sweep") {
    if (f.spec_file) {
      try {
        j = Json::parse(read_text(*f.spec_file));
      } catch (const nlohmann::json::parse_error& e) {
        throw xpu::ParseError("sweep spec is not valid JSON: " + std::string(e.what()));
      }
    }
    put_list(j, "platforms", f.platforms);
    put_list(j, "models", f.models);
    put_list(j, "batches", f.batches);
    put_list(j, "context_lens", f.seqlens);
    put_list(j, "phases", f.phases);
    put(j, "mode", f.mode);
    put(j, "headroom", f.headroom);
    put_precision(j, f);
  } else if (cmd == "frontier") {
    put_list(j, "platforms", f.platforms);
    put(j, "model", f.model);
    put(j, "batch", f.batch);
    put(j, "context_len", f.seqlen);
    put(j, "phase", f.phase);
    put(j, "mode", f.mode);
    put(j, "headroom", f.headroom);
    put_precision(j, f);
  } else if (cmd == "trace") {
    if (f.file) j["csv"] = read_text(*f.file);
    put(j, "platform", f.platform);
    put(j, "idle_hint_w", f.idle_hint);
    put(j, "threshold_multiplier", f.threshold_multiplier);
    put(j, "merge_gap_periods", f.merge_gap);
    put(j, "tdp_w", f.tdp);
  } else if (cmd == "commenergy") {
    if (f.file) j["csv"] = read_text(*f.file);
    put(j, "reference", f.reference);
    if (f.cycles_file) j["cycles_csv"] = read_text(*f.cycles_file);
    put(j, "platform", f.platform);
    put(j, "p_benchmark_w", f.p_benchmark);
    put(j, "p_idle_w", f.p_idle);
    put(j, "duration_s", f.duration);
    put(j, "bytes", f.bytes);
    put(j, "distance_mm", f.distance);
  } else if (cmd == "bench") {
    if (f.file) j["csv"] = read_text(*f.file);
    if (f.latency_file) j["latency_csv"] = read_text(*f.latency_file);
    put(j, "baseline", f.baseline);
    put(j, "metric", f.metric);
    put_list(j, "platforms", f.platforms);
  } else if (cmd == "dutycycle") {
    if (f.calibration) {
      const Json cal = Json::parse(read_text(*f.calibration));
      j["a"] = cal.at("a");
      j["b"] = cal.at("b");
      if (cal.contains("published_duty_cycle")) j["published_duty_cycle"] = cal["published_duty_cycle"];
    }
    auto side = [&](const char* key, const auto& plat, const auto& n, const auto& thr,
                    const auto& phase, const auto& active) {
      Json s = j.contains(key) ? j[key] : Json::object();
      put(s, "platform", plat);
      put(s, "n_devices", n);
      put(s, "throughput_tok_s", thr);
      put(s, "active_phase", phase);
      put(s, "active_fraction", active);
      if (!s.empty()) j[key] = s;
    };
    side("a", f.a_platform, f.a_devices, f.a_throughput, f.a_phase, f.a_active);
    side("b", f.b_platform, f.b_devices, f.b_throughput, f.b_phase, f.b_active);
  }
  return j;
}

int serve(const xpu::api::Context& ctx, const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw xpu::ValidationError("--addr must be host:port");
  const std::string host = addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw xpu::ValidationError("--addr port is not a number");
  }
  xpu::Service svc(ctx);
  const int bound = svc.bind(host, port);
  if (bound < 0) throw xpu::ValidationError("cannot bind " + addr);
  std::cerr << "serving /v1 on http://" << host << ":" << bound << "\n";
  return svc.listen() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xpu: analytical performance and energy modeling for LLM inference accelerators"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--catalog", f.catalog, "Catalog JSON (default: bundled; env XPU_CATALOG)");
  app.add_option("--out", f.out, "Write the command's CSV table to this path instead of JSON to stdout");

  auto* roofline = app.add_subcommand("roofline", "Roofline samples and ridge points");
  roofline->add_option("--platforms", f.platforms, "Platforms (default: all)")->delimiter(',');
  roofline->add_option("--ai-min", f.ai_min, "Lowest arithmetic intensity (FLOP/B)");
  roofline->add_option("--ai-max", f.ai_max, "Highest arithmetic intensity (FLOP/B)");
  roofline->add_option("--samples", f.samples, "Log-spaced samples per platform");

  auto* equiv = app.add_subcommand("equiv", "Pairwise equivalency matrix");
  equiv->add_option("--metric", f.metric, "power | bwcap | area")->required();
  equiv->add_option("--platforms", f.platforms, "Platforms (default: all)")->delimiter(',');

  auto* scaleout = app.add_subcommand("scaleout", "Minimum device count to hold weights and KV cache");
  scaleout->add_option("--model", f.model, "Model name")->required();
  scaleout->add_option("--platform,--platforms", f.platforms, "Platforms (default: all)")->delimiter(',');
  scaleout->add_option("--batch", f.batch, "Batch size (default 1)");
  scaleout->add_option("--seqlen", f.seqlen, "Context length in tokens")->required();
  scaleout->add_option("--headroom", f.headroom, "Usable fraction of device memory (default 0.9)");
  scaleout->add_option("--max-devices", f.max_devices, "Device cap (default 4096)");
  scaleout->add_option("--bytes-per-param", f.bytes_per_param, "Weight bytes per parameter override");
  scaleout->add_option("--bytes-per-kv", f.bytes_per_kv, "KV-cache bytes per element override");
  scaleout->add_flag("--reference", f.with_reference, "Add the bundled published counts and precision settings");

  auto* estimate = app.add_subcommand("estimate", "Latency and energy for one scenario");
  estimate->add_option("--platform", f.platform, "Platform")->required();
  estimate->add_option("--model", f.model, "Model")->required();
  estimate->add_option("--batch", f.batch, "Batch size (default 1)");
  estimate->add_option("--seqlen", f.seqlen, "Context length in tokens")->required();
  estimate->add_option("--prompt-len", f.prompt_len, "Prompt length (default: seqlen)");
  estimate->add_option("--phase", f.phase, "prefill | decode (default decode)");
  estimate->add_option("--mode", f.mode, "optimistic | realistic (default realistic)");
  estimate->add_option("--tp", f.tp, "Tensor-parallel degree (default: best plan)");
  estimate->add_option("--pp", f.pp, "Pipeline-parallel degree (default: best plan)");
  estimate->add_option("--headroom", f.headroom, "Usable fraction of device memory");
  estimate->add_option("--max-devices", f.max_devices, "Device cap");
  precision_flags(estimate, f);

  auto* sweep = app.add_subcommand("sweep", "Grid sweep with per-point pareto frontiers");
  sweep->add_option("--spec", f.spec_file, "SweepSpec JSON file; flags override its fields");
  sweep->add_option("--platforms", f.platforms, "Platforms (default: all)")->delimiter(',');
  sweep->add_option("--models", f.models, "Models")->delimiter(',');
  sweep->add_option("--batches", f.batches, "Batch sizes")->delimiter(',');
  sweep->add_option("--seqlens", f.seqlens, "Context lengths")->delimiter(',');
  sweep->add_option("--phases", f.phases, "prefill,decode (default both)")->delimiter(',');
  sweep->add_option("--mode", f.mode, "optimistic | realistic | both (default both)");
  sweep->add_option("--headroom", f.headroom, "Usable fraction of device memory");
  precision_flags(sweep, f);

  auto* frontier = app.add_subcommand("frontier", "Pareto frontier of latency vs energy per token");
  frontier->add_option("--platforms", f.platforms, "Platforms (default: all)")->delimiter(',');
  frontier->add_option("--model", f.model, "Model")->required();
  frontier->add_option("--batch", f.batch, "Batch size (default 1)");
  frontier->add_option("--seqlen", f.seqlen, "Context length in tokens")->required();
  frontier->add_option("--phase", f.phase, "prefill | decode (default decode)");
  frontier->add_option("--mode", f.mode, "optimistic | realistic | both (default both)");
  frontier->add_option("--headroom", f.headroom, "Usable fraction of device memory");
  precision_flags(frontier, f);

  auto* trace = app.add_subcommand("trace", "Segment a power trace into idle, prefill and decode");
  trace->add_option("file,--file", f.file, "Power trace CSV (timestamp_s,power_w)")->required();
  trace->add_option("--platform", f.platform, "Platform (default: from the file's comment)");
  trace->add_option("--idle-hint", f.idle_hint, "Idle power hint in watts");
  trace->add_option("--threshold-multiplier", f.threshold_multiplier, "Idle threshold multiplier (default 1.15)");
  trace->add_option("--merge-gap", f.merge_gap, "Merge bursts closer than this many sample periods (default 2)");
  trace->add_option("--tdp", f.tdp, "TDP in watts (default: catalog)");

  auto* comm = app.add_subcommand("commenergy", "Data-transfer energy and J/byte ratios");
  comm->add_option("--file", f.file, "Comm-energy CSV");
  comm->add_option("--reference", f.reference, "Reference platform for ratios (default CS-3)");
  comm->add_option("--cycles", f.cycles_file, "Cycles-vs-distance CSV (distance_mm,cycles)");
  comm->add_option("--platform", f.platform, "Platform of a single measurement");
  comm->add_option("--p-benchmark", f.p_benchmark, "Benchmark power (W)");
  comm->add_option("--p-idle", f.p_idle, "Idle power (W)");
  comm->add_option("--duration", f.duration, "Transfer duration (s)");
  comm->add_option("--bytes", f.bytes, "Bytes transferred");
  comm->add_option("--distance", f.distance, "Distance (mm)");

  auto* bench = app.add_subcommand("bench", "Operator speedups and latency-per-token tables");
  bench->add_option("--file", f.file, "Benchmark CSV");
  bench->add_option("--latency-file", f.latency_file, "Latency-per-token CSV");
  bench->add_option("--baseline", f.baseline, "Baseline platform (default H100)");
  bench->add_option("--metric", f.metric, "latency | power (default latency)");
  bench->add_option("--platforms", f.platforms, "Restrict benchmark rows to these platforms")->delimiter(',');

  auto* duty = app.add_subcommand("dutycycle", "Duty cycle at which A matches B's energy per token");
  duty->add_option("--calibration", f.calibration, "Scenario JSON with 'a' and 'b' sides");
  duty->add_option("--a-platform", f.a_platform, "Platform A");
  duty->add_option("--a-devices", f.a_devices, "Devices in A (default 1)");
  duty->add_option("--a-throughput", f.a_throughput, "A throughput while active (tok/s)");
  duty->add_option("--a-phase", f.a_phase, "Phase whose power fraction A draws when active");
  duty->add_option("--a-active-fraction", f.a_active, "A active power as a fraction of TDP");
  duty->add_option("--b-platform", f.b_platform, "Platform B");
  duty->add_option("--b-devices", f.b_devices, "Devices in B (default 1)");
  duty->add_option("--b-throughput", f.b_throughput, "B throughput (tok/s)");
  duty->add_option("--b-phase", f.b_phase, "Phase whose power fraction B draws");
  duty->add_option("--b-active-fraction", f.b_active, "B active power as a fraction of TDP");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP JSON API");
  serve_cmd->add_option("--addr", f.addr, "Bind address host:port (default 127.0.0.1:8080)");

  app.add_subcommand("platforms", "List catalog platforms");
  app.add_subcommand("models", "List catalog models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    xpu::api::Context ctx{xpu::load_catalog(f.catalog), std::string(XPU_DATA_DIR) + "/paper_measurements"};
    if (cmd == "serve") return serve(ctx, f.addr);
    const auto res = xpu::api::dispatch(ctx, cmd, build_params(cmd, f));
    for (const auto& w : res.envelope["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    if (!f.out.empty()) {
      if (res.csv.empty()) throw xpu::ValidationError("'" + cmd + "' has no CSV output");
      std::ofstream os(f.out, std::ios::binary);
      if (!os) throw xpu::ValidationError("cannot write '" + f.out + "'");
      os << res.csv;
      std::cerr << "wrote " << f.out << "\n";
      return 0;
    }
    std::cout << res.envelope.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    const auto err = xpu::api::classify(e);
    std::cerr << "error: " << err.message << "\n" << err.to_json().dump(2) << "\n";
    if (err.code != "infeasible") std::cerr << "run '" << app.get_name() << " " << cmd << " --help' for usage\n";
    return xpu::api::exit_code(err);
  }
}
