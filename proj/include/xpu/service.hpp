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

#include <httplib.h>

#include <string>
#include <string_view>
#include <utility>

#include "xpu/api.hpp"

namespace xpu {

// Stateless JSON API over api::dispatch. The catalog is read-only after
// construction, so requests are handled concurrently without locking.
class Service {
 public:
  explicit Service(api::Context ctx) : ctx_(std::move(ctx)) { routes(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port, or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  httplib::Server& server() { return server_; }

 private:
  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
  }

  void run(std::string_view command, const Json& params, httplib::Response& res) const {
    try {
      send_json(res, 200, api::dispatch(ctx_, command, params).envelope);
    } catch (const std::exception& e) {
      const auto err = api::classify(e);
      send_json(res, err.status, err.to_json());
    }
  }

  static Json query_params(const httplib::Request& req) {
    Json j = Json::object();
    for (const auto& [k, v] : req.params) j[k == "platform" ? "platforms" : k] = v;
    return j;
  }

  // JSON body, multipart form (files and plain fields), or a raw CSV body.
  // For CSV uploads the text lands in `csv_key`.
  static Json body_params(const httplib::Request& req, const char* csv_key = nullptr) {
    if (req.is_multipart_form_data()) {
      Json j = Json::object();
      for (const auto& [name, part] : req.files) {
        const bool is_file = !part.filename.empty();
        const std::string key = (is_file && name == "file" && csv_key) ? csv_key : name;
        j[key] = part.content;
      }
      for (const auto& [k, v] : req.params) j[k] = v;
      return j;
    }
    const auto type = req.get_header_value("Content-Type");
    if (csv_key && (type.rfind("text/csv", 0) == 0 || type.rfind("text/plain", 0) == 0)) {
      Json j = query_params(req);
      j[csv_key] = req.body;
      return j;
    }
    if (req.body.empty()) return query_params(req);
    try {
      return Json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("request body is not valid JSON: ") + e.what());
    }
  }

  void post(const std::string& command, const char* csv_key = nullptr) {
    server_.Post("/v1/" + command, [this, command, csv_key](const httplib::Request& req,
                                                            httplib::Response& res) {
      Json params;
      try {
        params = body_params(req, csv_key);
      } catch (const std::exception& e) {
        const auto err = api::classify(e);
        return send_json(res, err.status, err.to_json());
      }
      run(command, params, res);
    });
  }

  void get(const std::string& command) {
    server_.Get("/v1/" + command, [this, command](const httplib::Request& req, httplib::Response& res) {
      run(command, query_params(req), res);
    });
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
    server_.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, Json{{"status", "ok"}, {"catalog_version", ctx_.catalog.version()}});
    });
    for (const char* c : {"platforms", "models", "roofline", "equiv", "scaleout", "frontier"}) get(c);
    for (const char* c : {"platforms", "models", "roofline", "equiv", "scaleout", "estimate", "sweep",
                          "frontier", "commenergy", "bench", "dutycycle"})
      post(c);
    post("trace", "csv");
    server_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      api::ApiError err;
      err.status = res.status;
      err.code = res.status == 404 ? "not_found" : "validation";
      err.name = res.status == 404 ? "NotFound" : "BadRequest";
      err.message = res.status == 404 ? "no route for " + req.method + " " + req.path
                                      : "request rejected";
      send_json(res, err.status, err.to_json());
    });
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                     std::exception_ptr ep) {
      api::ApiError err;
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        err = api::classify(e);
      } catch (...) {
        err.message = "unknown error";
      }
      send_json(res, err.status, err.to_json());
    });
  }

  api::Context ctx_;
  httplib::Server server_;
};

}  // namespace xpu
