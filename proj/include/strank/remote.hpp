#pragma once

#include <string>

namespace strank {

struct RemoteConfig {
  std::string url;  // full endpoint, e.g. http://host:8000/v1/chat/completions
  std::string model = "default";
  std::string api_key_env = "STRANK_API_KEY";
  int timeout_sec = 30;
  int max_retries = 3;           // retries after the first attempt
  double backoff_initial_sec = 0.5;  // doubles per retry
};

// Minimal chat-completions client: posts a fixed system line plus one user
// message at temperature 0 and returns the first choice's text. Bearer token
// is read from the configured environment variable when present. Throws
// BackendUnavailable once retries are exhausted.
class ChatClient {
public:
  explicit ChatClient(RemoteConfig cfg);

  std::string complete(const std::string& system_line, const std::string& user_prompt) const;

  // Connectivity check used by the serving startup probe.
  bool probe() const;

  const RemoteConfig& config() const { return cfg_; }

private:
  RemoteConfig cfg_;
  std::string base_;  // scheme://host:port
  std::string path_;
};

}  // namespace strank
