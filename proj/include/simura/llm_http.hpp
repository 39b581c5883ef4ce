#pragma once

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "simura/errors.hpp"
#include "simura/llm.hpp"

// Chat-completion HTTP client. Wire shape: POST {base_url}/v1/chat/completions
// with {model, messages, temperature, n, max_tokens, seed?}; the reply's
// choices[*].message.content become the samples.

namespace simura {

struct HttpBackendConfig {
  std::string base_url;  // e.g. "http://localhost:8080" or "https://api.example.com"
  std::string api_key;
  int max_transport_retries = 3;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::seconds request_timeout{120};
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
      fail(ErrorKind::ConfigError, "http backend requires a base_url");
    }
    split_base_url(config_.base_url, host_, path_prefix_);
  }

 protected:
  Completion do_complete(const ChatRequest& request) override {
    auto started = std::chrono::steady_clock::now();
    Completion out;
    int needed = request.n_samples;
    // A server may return fewer choices than requested; top up with
    // follow-up requests rather than truncating the sample count.
    for (int attempt = 0; attempt < 4 && needed > 0; ++attempt) {
      nlohmann::json reply = post_once(request, needed);
      if (!reply.contains("choices") || !reply["choices"].is_array()) {
        fail(ErrorKind::BackendRefusal, "response has no choices array");
      }
      for (const auto& choice : reply["choices"]) {
        if (needed == 0) break;
        out.samples.push_back(choice.at("message").at("content").get<std::string>());
        --needed;
      }
      if (reply.contains("usage") && reply["usage"].is_object()) {
        out.usage.prompt_tokens += reply["usage"].value("prompt_tokens", int64_t{0});
        out.usage.completion_tokens += reply["usage"].value("completion_tokens", int64_t{0});
      }
    }
    if (needed > 0) {
      fail(ErrorKind::TransportError, "backend kept returning fewer samples than requested");
    }
    out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return out;
  }

 private:
  nlohmann::json post_once(const ChatRequest& request, int n) {
    nlohmann::json body = {
        {"model", request.model_id},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", request.system}},
                                {{"role", "user"}, {"content", request.user}}})},
        {"temperature", request.temperature},
        {"n", n},
        {"max_tokens", request.max_tokens},
    };
    if (request.seed) body["seed"] = *request.seed;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_transport_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 1)));
      }
      httplib::Client client(host_);
      client.set_read_timeout(config_.request_timeout);
      client.set_connection_timeout(std::chrono::seconds(10));
      httplib::Headers headers;
      if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      }
      auto res = client.Post(path_prefix_ + "/v1/chat/completions", headers, payload,
                             "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;  // transport failure: retry
      }
      if (res->status < 200 || res->status >= 300) {
        fail(ErrorKind::BackendRefusal, "HTTP " + std::to_string(res->status) + ": " +
                                            res->body.substr(0, 400));
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::BackendRefusal, std::string("unparseable response body: ") + e.what());
      }
    }
    fail(ErrorKind::TransportError,
         "transport failed after " + std::to_string(config_.max_transport_retries + 1) +
             " attempts: " + last_error);
  }

  static void split_base_url(const std::string& base, std::string& host, std::string& path) {
    size_t scheme = base.find("://");
    size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    size_t slash = base.find('/', host_start);
    if (slash == std::string::npos) {
      host = base;
      path.clear();
    } else {
      host = base.substr(0, slash);
      path = base.substr(slash);
      while (!path.empty() && path.back() == '/') path.pop_back();
    }
  }

  HttpBackendConfig config_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace simura
