#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "histanno/provider.hpp"

namespace histanno {

namespace {

class HttpProvider final : public AnnotationProvider {
 public:
  explicit HttpProvider(const HttpProviderConfig& config) : config_(config) {
    caps_.model_id = config.model_id;
    caps_.supports_temperature = true;
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
      api_key_ = key;
    } else if (config.base_url.rfind("https://", 0) == 0) {
      throw ProviderError("environment variable " + config.api_key_env + " is not set");
    }
  }

  const ProviderCapabilities& capabilities() const override { return caps_; }

  std::string complete(const AnnotationRequest& request) override {
    // httplib clients are not thread-safe; one per call keeps complete() reentrant.
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    nlohmann::json body;
    body["model"] = config_.model_id;
    body["temperature"] = request.temperature;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});

    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw ProviderError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      auto reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("unexpected provider reply: ") + e.what());
    }
  }

 private:
  HttpProviderConfig config_;
  ProviderCapabilities caps_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<AnnotationProvider> make_http_provider(const HttpProviderConfig& config) {
  return std::make_unique<HttpProvider>(config);
}

}  // namespace histanno
