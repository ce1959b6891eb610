// Live chat-completion transport. Kept in its own TU so the rest of the
// library never pulls in the HTTP stack; replay mode does not touch this code.
#include <nlohmann/json.hpp>

#include "mladi/errors.hpp"
#include "mladi/llm_client.hpp"

#ifdef MLADI_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace mladi {

using nlohmann::json;

std::string live_chat_complete(const LlmEndpointConfig& endpoint, const std::string& api_key,
                               const std::string& prompt) {
  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(endpoint.timeout_seconds);
  client.set_read_timeout(endpoint.timeout_seconds);
  client.set_bearer_token_auth(api_key);

  json body;
  body["model"] = endpoint.model;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;

  auto res = client.Post(endpoint.path, body.dump(), "application/json");
  if (!res) {
    throw ExternalServiceError("chat endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ExternalServiceError("chat endpoint returned HTTP " + std::to_string(res->status));
  }
  json payload = json::parse(res->body, nullptr, false);
  if (payload.is_discarded()) {
    throw ExternalServiceError("chat endpoint returned a non-JSON body");
  }
  try {
    return payload.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ExternalServiceError("chat endpoint response missing choices[0].message.content");
  }
}

}  // namespace mladi
