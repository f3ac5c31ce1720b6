#ifndef CODENAT_REMOTE_BACKEND_HPP
#define CODENAT_REMOTE_BACKEND_HPP

// Client for a remote infilling model speaking the scoring protocol:
//
//   POST /v1/score  {"prefix", "target", "suffix", "temperature"}
//   200             {"token_surprisals": [nats...], "model_id"}
//   400 malformed request (not retried), 503 busy (retried with backoff)
//
// An empty target asks for the end-of-mask surprisal alone.

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "codenat/entropy.hpp"
#include "codenat/error.hpp"

namespace codenat {

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::seconds timeout{60};
};

class RemoteBackend final : public EntropyBackend {
 public:
  RemoteBackend(std::string base_url, BackendConfig config = {},
                RetryPolicy retry = {})
      : EntropyBackend(config), base_url_(std::move(base_url)), retry_(retry) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
    if (base_url_.empty()) throw InputError("remote backend URL is empty");
    if (retry_.max_attempts < 1) throw InputError("max_attempts must be >= 1");
  }

  BackendKind kind() const override { return BackendKind::kRemote; }
  std::string id() const override { return "remote:" + base_url_; }
  std::string blank_convention() const override {
    return "remote: mean surprisal of an empty target (end-of-mask token)";
  }

  std::vector<double> score(const ScoreQuery& q) const override {
    const nlohmann::json body = {{"prefix", q.prefix_text},
                                 {"target", q.target_text},
                                 {"suffix", q.suffix_text},
                                 {"temperature", config().temperature}};
    const std::string payload = body.dump();
    auto backoff = retry_.initial_backoff;
    int last_status = -1;
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      httplib::Client client(base_url_);
      client.set_connection_timeout(retry_.timeout);
      client.set_read_timeout(retry_.timeout);
      const auto res = client.Post("/v1/score", payload, "application/json");
      if (!res) {
        last_status = -1;
        last_error = httplib::to_string(res.error());
      } else if (res->status == 200) {
        return parse_response(res->body, attempt);
      } else if (res->status == 503) {
        last_status = 503;
        last_error = "model busy";
      } else {
        throw TransportError("remote backend answered HTTP " +
                                 std::to_string(res->status) + ": " + res->body,
                             attempt, res->status);
      }
      if (attempt < retry_.max_attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    throw TransportError("remote backend unavailable after " +
                             std::to_string(retry_.max_attempts) +
                             " attempts: " + last_error,
                         retry_.max_attempts, last_status);
  }

  const std::string& base_url() const { return base_url_; }

 private:
  static std::vector<double> parse_response(const std::string& body,
                                            int attempt) {
    try {
      const auto j = nlohmann::json::parse(body);
      auto values = j.at("token_surprisals").get<std::vector<double>>();
      if (values.empty()) {
        throw TransportError("remote backend returned no surprisals", attempt,
                             200);
      }
      for (const double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
          throw TransportError("remote backend returned invalid surprisal",
                               attempt, 200);
        }
      }
      return values;
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed backend response: ") +
                               e.what(),
                           attempt, 200);
    }
  }

  std::string base_url_;
  RetryPolicy retry_;
};

}  // namespace codenat

#endif  // CODENAT_REMOTE_BACKEND_HPP
