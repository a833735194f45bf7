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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xpu {

// Coarse error classes. They map 1:1 onto CLI exit codes and HTTP statuses.
enum class ErrorKind { kParse, kValidation, kNotFound, kInfeasible, kInternal };

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
      return "validation";
    case ErrorKind::kNotFound:
      return "not_found";
    case ErrorKind::kInfeasible:
      return "infeasible";
    case ErrorKind::kInternal:
      break;
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string name, const std::string& message)
      : std::runtime_error(message), kind_(kind), name_(std::move(name)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Specific error name, e.g. "ValidationError" or "NoParity".
  const std::string& name() const noexcept { return name_; }

 private:
  ErrorKind kind_;
  std::string name_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message)
      : Error(ErrorKind::kParse, "ParseError", message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message,
                           std::string name = "ValidationError")
      : Error(ErrorKind::kValidation, std::move(name), message) {}
};

class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, const std::string& key,
                std::vector<std::string> suggestions)
      : Error(ErrorKind::kNotFound, "NotFound",
              format(what, key, suggestions)),
        key_(key),
        suggestions_(std::move(suggestions)) {}

  const std::string& key() const noexcept { return key_; }
  const std::vector<std::string>& suggestions() const noexcept {
    return suggestions_;
  }

 private:
  static std::string format(const std::string& what, const std::string& key,
                            const std::vector<std::string>& suggestions) {
    std::string msg = "unknown " + what + " '" + key + "'";
    if (!suggestions.empty()) {
      msg += "; did you mean ";
      for (size_t i = 0; i < suggestions.size(); ++i) {
        if (i) msg += ", ";
        msg += "'" + suggestions[i] + "'";
      }
      msg += "?";
    }
    return msg;
  }

  std::string key_;
  std::vector<std::string> suggestions_;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string reason, const std::string& message,
                  std::string name = "Infeasible")
      : Error(ErrorKind::kInfeasible, std::move(name), message),
        reason_(std::move(reason)) {}

  // Machine-readable cause: "capacity", "divisibility", "parallelism", "quantum".
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

}  // namespace xpu
