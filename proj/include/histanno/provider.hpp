#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "histanno/error.hpp"

namespace histanno {

struct ProviderCapabilities {
  std::string model_id;
  bool supports_temperature = true;
};

struct AnnotationRequest {
  std::string record_id;
  std::string sentence;
  std::string prompt;
  double temperature = 0.0;
  int attempt = 0;  // 0-based retry index
};

// Something that turns a rendered prompt into raw model text. Implementations
// must tolerate concurrent complete() calls; run_batch issues them from
// several threads. Transport failures throw ProviderError.
class AnnotationProvider {
 public:
  virtual ~AnnotationProvider() = default;
  virtual const ProviderCapabilities& capabilities() const = 0;
  virtual std::string complete(const AnnotationRequest& request) = 0;
};

// OpenAI-style chat-completions endpoint. The API key is read from the named
// environment variable at construction; an unset variable is an error unless
// the endpoint is plain http (local gateways, tests).
struct HttpProviderConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model_id = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{120};
};

std::unique_ptr<AnnotationProvider> make_http_provider(const HttpProviderConfig& config);

}  // namespace histanno
