// Copyright 2026 The FinRAG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FINRAG_SRC_HTTP_UTIL_HPP_
#define FINRAG_SRC_HTTP_UTIL_HPP_

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>

#include "finrag/error.hpp"
#include "httplib.h"

namespace finrag::internal {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

inline SplitUrl SplitEndpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::kConfigError,
                "endpoint must be an absolute URL: " + std::string(url));
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kConfigError,
                "unsupported URL scheme: " + std::string(scheme));
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") {
    throw Error(ErrorCode::kConfigError, "built without TLS support");
  }
#endif
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)),
          std::string(url.substr(path_start))};
}

inline std::unique_ptr<httplib::Client> MakeClient(
    const SplitUrl& url, std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(url.origin);
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

/// Value of the environment variable `name`, or empty if unset.
inline std::string EnvValue(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace finrag::internal

#endif  // FINRAG_SRC_HTTP_UTIL_HPP_
