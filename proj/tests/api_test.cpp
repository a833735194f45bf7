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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cli_runner.hpp"
#include "test_support.hpp"
#include "xpu/api.hpp"
#include "xpu/service.hpp"

namespace xpu {
namespace {

using testing::bundled;
using testing::data_path;
using testing::run_cli;

api::Context context() { return {bundled(), data_path("paper_measurements")}; }

// One service per test binary, on an ephemeral port.
class ServiceFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    service_ = new Service(context());
    port_ = service_->bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    thread_ = new std::thread([] { service_->listen(); });
    service_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    service_->stop();
    thread_->join();
    delete thread_;
    delete service_;
  }
  static httplib::Client client() {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30);
    return c;
  }
  static Service* service_;
  static std::thread* thread_;
  static int port_;
};
Service* ServiceFixture::service_ = nullptr;
std::thread* ServiceFixture::thread_ = nullptr;
int ServiceFixture::port_ = 0;

TEST(Api, EnvelopeShapeAndDeterminism) {
  const auto ctx = context();
  const Json req{{"metric", "power"}, {"platforms", {"CS-3", "H100"}}};
  const auto a = api::dispatch(ctx, "equiv", req).envelope;
  const auto b = api::dispatch(ctx, "equiv", req).envelope;
  EXPECT_EQ(a.dump(), b.dump());
  std::vector<std::string> keys;
  for (const auto& [k, v] : a.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"command", "catalog_version", "parameters", "results", "warnings"}));
  EXPECT_EQ(a["catalog_version"], bundled().version());
  EXPECT_EQ(a["parameters"]["metric"], "PowerPerFlops");
}

TEST(Api, StringAndTypedParametersNormalizeTheSame) {
  const auto ctx = context();
  const auto typed = api::dispatch(ctx, "estimate", Json{{"platform", "H100"}, {"model", "Llama-3.1-8B"},
                                                         {"batch", 4}, {"context_len", 2048}});
  const auto text = api::dispatch(ctx, "estimate", Json{{"platform", "H100"}, {"model", "Llama-3.1-8B"},
                                                        {"batch", "4"}, {"context_len", "2048"}});
  EXPECT_EQ(typed.envelope.dump(), text.envelope.dump());
}

TEST(Api, ErrorsClassify) {
  const auto ctx = context();
  auto err = [&](const std::string& cmd, const Json& p) {
    try {
      api::dispatch(ctx, cmd, p);
    } catch (const std::exception& e) {
      return api::classify(e);
    }
    return api::ApiError{200, "", "", "", ""};
  };
  EXPECT_EQ(err("equiv", Json{{"metric", "speed"}}).status, 400);
  EXPECT_EQ(err("equiv", Json{{"metric", "power"}, {"platfroms", "H100"}}).status, 400);
  EXPECT_EQ(err("equiv", Json{{"metric", "power"}, {"platforms", "H200"}}).status, 404);
  EXPECT_EQ(err("nonsense", Json::object()).status, 404);
  const auto inf = err("estimate", Json{{"platform", "Groq"}, {"model", "Llama-3.1-405B"}, {"batch", 64},
                                        {"context_len", 131072}});
  EXPECT_EQ(inf.status, 422);
  EXPECT_EQ(inf.reason, "capacity");
  EXPECT_EQ(api::exit_code(inf), 2);
}

TEST(Api, ScaleoutReferenceFlagsPublishedCount) {
  const auto r = api::dispatch(context(), "scaleout",
                               Json{{"model", "Llama-3.1-70B"}, {"platforms", {"MI300", "Groq"}},
                                    {"context_len", 131072}, {"reference", true}})
                     .envelope;
  int flagged = 0;
  for (const auto& row : r["results"]["rows"]) {
    if (row["platform"] == "MI300") EXPECT_EQ(row["min_devices"], 2);
    if (row.value("matches_published", false)) ++flagged;
  }
  EXPECT_EQ(flagged, 1);
  EXPECT_EQ(r["results"]["reference"]["published_counts"]["Groq"], 576);
}

TEST(Api, DutyCycleCalibration) {
  const Json cal = Json::parse(read_file(data_path("paper_measurements/duty_cycle_calibration.json")));
  const auto r = api::dispatch(context(), "dutycycle", Json{{"a", cal["a"]}, {"b", cal["b"]}}).envelope;
  EXPECT_NEAR(r["results"]["duty_cycle"].get<double>(), 0.34, 0.02);
}

TEST_F(ServiceFixture, ListsPlatforms) {
  auto res = client().Get("/v1/platforms");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(Json::parse(res->body)["results"].size(), 8u);
}

TEST_F(ServiceFixture, RooflineAndEquivQueries) {
  auto res = client().Get("/v1/roofline?platform=H100&samples=10");
  ASSERT_TRUE(res);
  const auto j = Json::parse(res->body);
  EXPECT_EQ(j["results"][0]["points"].size(), 10u);
  EXPECT_NEAR(j["results"][0]["ridge_point"].get<double>(), 590.7, 0.6);
  res = client().Get("/v1/equiv?metric=area&platforms=CS-3,Groq");
  ASSERT_TRUE(res);
  EXPECT_NEAR(Json::parse(res->body)["results"]["values"][0][1].get<double>(), 10.43, 0.52);
}

TEST_F(ServiceFixture, OversizeEstimateIs422WithCapacity) {
  const Json body{{"platform", "Groq"}, {"model", "Llama-3.1-405B"}, {"batch", 64}, {"context_len", 131072}};
  auto res = client().Post("/v1/estimate", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  const auto j = Json::parse(res->body);
  EXPECT_EQ(j["code"], "infeasible");
  EXPECT_EQ(j["reason"], "capacity");
}

TEST_F(ServiceFixture, ErrorStatuses) {
  auto res = client().Post("/v1/estimate", "{oops", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(Json::parse(res->body)["code"], "validation");
  res = client().Post("/v1/estimate", Json{{"platform", "H200"}, {"model", "Llama-3.1-8B"}, {"context_len", 8}}.dump(),
                      "application/json");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(Json::parse(res->body)["code"], "not_found");
  res = client().Get("/v1/nothing");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(Json::parse(res->body)["code"], "not_found");
}

TEST_F(ServiceFixture, SinglePointSweepContainsCliEstimate) {
  const Json sweep{{"platforms", {"H100"}}, {"models", {"Llama-3.1-8B"}}, {"batches", {4}},
                   {"context_lens", {2048}}, {"phases", {"decode"}}, {"mode", "realistic"}};
  auto res = client().Post("/v1/sweep", sweep.dump(), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto est = Json::parse(res->body)["results"]["estimates"];
  const auto cli = run_cli("estimate --platform H100 --model Llama-3.1-8B --batch 4 --seqlen 2048");
  ASSERT_EQ(cli.exit_code, 0);
  const auto chosen = Json::parse(cli.out)["results"];
  bool found = false;
  for (const auto& e : est) found = found || e == chosen;
  EXPECT_TRUE(found);
}

TEST_F(ServiceFixture, TraceUploadMultipartAndRaw) {
  const std::string csv = read_file(data_path("paper_measurements/power_traces/H100.csv"));
  httplib::MultipartFormDataItems items{{"file", csv, "H100.csv", "text/csv"}};
  auto res = client().Post("/v1/trace", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto j = Json::parse(res->body)["results"];
  EXPECT_EQ(j["platform"], "H100");
  EXPECT_GE(j["decode_fraction_of_tdp"].get<double>(), 0.45);
  auto raw = client().Post("/v1/trace", csv, "text/csv");
  ASSERT_TRUE(raw);
  EXPECT_EQ(Json::parse(raw->body)["results"], j);
}

TEST_F(ServiceFixture, CommEnergyAndBench) {
  Json body{{"p_benchmark_w", 350}, {"p_idle_w", 300}, {"duration_s", 2}, {"bytes", 1e9}};
  auto res = client().Post("/v1/commenergy", body.dump(), "application/json");
  ASSERT_TRUE(res);
  const auto j = Json::parse(res->body)["results"];
  EXPECT_EQ(j["joules"], 100.0);
  EXPECT_EQ(j["joules_per_byte"], 1e-7);
  body = {{"latency_csv", read_file(data_path("paper_measurements/latency_per_token.csv"))}};
  res = client().Post("/v1/bench", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(Json::parse(res->body)["results"]["latency_per_token"]["by_model"]["Llama-3.1-8B"]["CS-3"], 0.2289);
}

TEST_F(ServiceFixture, CorsPreflight) {
  auto res = client().Options("/v1/sweep");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Cli, HelpListsSubcommands) {
  const auto r = run_cli("--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* s : {"roofline", "equiv", "scaleout", "estimate", "sweep", "frontier", "trace",
                        "commenergy", "bench", "dutycycle", "serve"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("equiv --metric power --platforms CS-3,H100").exit_code, 0);
  EXPECT_EQ(run_cli("equiv --metric power --platforms CS-4").exit_code, 1);
  EXPECT_EQ(run_cli("equiv --metirc power").exit_code, 1);
  EXPECT_EQ(run_cli("nonsense").exit_code, 1);
  EXPECT_EQ(run_cli("estimate --platform Groq --model Llama-3.1-405B --batch 64 --seqlen 131072").exit_code, 2);
}

TEST(Cli, ScaleoutAndFrontierExamples) {
  auto r = run_cli("scaleout --model Llama-3.1-70B --platform MI300 --batch 1 --seqlen 131072");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(Json::parse(r.out)["results"]["rows"][0]["min_devices"], 2);
  r = run_cli("frontier --model Llama-3.1-70B --batch 1 --seqlen 131072 --phase decode --mode optimistic");
  ASSERT_EQ(r.exit_code, 0);
  const auto opt = Json::parse(r.out)["results"]["members"]["optimistic"];
  EXPECT_NE(std::find(opt.begin(), opt.end(), "Groq"), opt.end());
  r = run_cli("frontier --model Llama-3.1-70B --batch 1 --seqlen 131072 --phase decode --mode realistic");
  const auto real = Json::parse(r.out)["results"]["members"]["realistic"];
  EXPECT_EQ(std::find(real.begin(), real.end(), "Groq"), real.end());
}

TEST(Cli, CsvOutputAndCatalogOverride) {
  const auto dir = std::filesystem::temp_directory_path() / "xpu_cli_test";
  std::filesystem::create_directories(dir);
  const auto csv = (dir / "roofline.csv").string();
  auto r = run_cli("roofline --platforms H100 --samples 5 --out '" + csv + "'");
  ASSERT_EQ(r.exit_code, 0);
  const auto text = read_file(csv);
  EXPECT_EQ(text.substr(0, text.find('\n')), "platform,arithmetic_intensity,attainable_flops");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);

  Json cat = bundled().to_json();
  cat["platforms"][0]["tdp_w"] = 123.0;
  const auto path = (dir / "catalog.json").string();
  std::ofstream(path) << cat.dump();
  r = run_cli("platforms", "XPU_CATALOG='" + path + "'");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(Json::parse(r.out)["results"][0]["tdp_w"], 123.0);
  EXPECT_NE(Json::parse(r.out)["catalog_version"], bundled().version());
}

TEST(Cli, OutputIsByteIdenticalAcrossRuns) {
  const std::string args = "sweep --models Llama-3.1-8B --batches 1,8 --seqlens 4096";
  EXPECT_EQ(run_cli(args).out, run_cli(args).out);
}

}  // namespace
}  // namespace xpu
