#include "strank/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "strank/errors.hpp"

namespace strank {

ChatClient::ChatClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  std::size_t scheme = cfg_.url.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("remote url must include a scheme: " + cfg_.url);
  std::size_t slash = cfg_.url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    base_ = cfg_.url;
    path_ = "/";
  } else {
    base_ = cfg_.url.substr(0, slash);
    path_ = cfg_.url.substr(slash);
  }
}

std::string ChatClient::complete(const std::string& system_line,
                                 const std::string& user_prompt) const {
  nlohmann::json body = {
      {"model", cfg_.model},
      {"messages",
       {{{"role", "system"}, {"content", system_line}},
        {{"role", "user"}, {"content", user_prompt}}}},
      {"temperature", 0},
  };
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  std::string last_error = "no attempt made";
  double backoff = cfg_.backoff_initial_sec;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    httplib::Client client(base_);
    client.set_connection_timeout(cfg_.timeout_sec);
    client.set_read_timeout(cfg_.timeout_sec);
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
      last_error = "unparseable completion body";
      continue;
    }
    const nlohmann::json& choice = reply["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content"))
      return choice["message"]["content"].get<std::string>();
    if (choice.contains("text")) return choice["text"].get<std::string>();
    last_error = "completion body missing message content";
  }
  throw BackendUnavailable("remote backend " + cfg_.url + " unavailable after " +
                           std::to_string(cfg_.max_retries + 1) + " attempts (" +
                           last_error + ")");
}

bool ChatClient::probe() const {
  httplib::Client client(base_);
  client.set_connection_timeout(cfg_.timeout_sec);
  auto res = client.Get("/");
  return static_cast<bool>(res);
}

}  // namespace strank
