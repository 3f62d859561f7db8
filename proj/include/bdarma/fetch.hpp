#pragma once

// Series retrieval over HTTPS or from local files. Requires OpenSSL and
// CPPHTTPLIB_OPENSSL_SUPPORT for https endpoints.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>

#include "bdarma/csv.hpp"
#include "bdarma/error.hpp"
#include "bdarma/ingest.hpp"
#include "httplib.h"

namespace bdarma {

struct FetchOptions {
  std::string endpoint = kDefaultEndpoint;  // "{id}" is replaced by the series id
  int timeout_seconds = 30;
  int retries = 2;
  int backoff_ms = 500;  // doubled after each failed attempt
};

namespace detail {

inline std::string expand_endpoint(const std::string& pattern, const std::string& id) {
  std::string out = pattern;
  const auto pos = out.find("{id}");
  if (pos == std::string::npos) throw InvalidInput("endpoint has no {id} placeholder: " + pattern);
  out.replace(pos, 4, id);
  return out;
}

}  // namespace detail

/// Fetches one series. Local paths (no "://") are read from disk. Returns
/// nullopt when the server answers 404 or the local file does not exist;
/// transport failures after all retries raise FetchError.
inline std::optional<RawSeries> fetch_series(const std::string& id, const FetchOptions& opt = {}) {
  const std::string target = detail::expand_endpoint(opt.endpoint, id);
  const auto scheme_end = target.find("://");
  if (scheme_end == std::string::npos) {
    if (!std::filesystem::exists(target)) return std::nullopt;
    return parse_series_csv(csv::read_text(target), id);
  }
  const auto path_start = target.find('/', scheme_end + 3);
  const std::string host = target.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : target.substr(path_start);

  std::string last_error;
  int wait = opt.backoff_ms;
  for (int attempt = 0; attempt <= opt.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
      wait *= 2;
    }
    httplib::Client client(host);
    client.set_connection_timeout(opt.timeout_seconds, 0);
    client.set_read_timeout(opt.timeout_seconds, 0);
    client.set_follow_location(true);
    const auto res = client.Get(path);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 404) return std::nullopt;
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return parse_series_csv(res->body, id);
  }
  throw FetchError("fetch " + id + " from " + host + " failed: " + last_error);
}

}  // namespace bdarma
