#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mladi/corpus.hpp"
#include "mladi/errors.hpp"
#include "mladi/labels.hpp"

namespace mladi {

// Country order used by the annotation prompt (differs from the canonical
// label order on purpose; the response parser maps names back to codes).
extern const std::array<DialectLabel, kNumDialects> kPromptCountryOrder;

std::string default_prompt_template();

// Substitutes {tweet} (required) and {countries} (optional) in the template.
// Throws UsageError when {tweet} is missing, DataError on empty sentences.
std::string render_prompt(const Sample& x, const std::string& template_text);

enum class LlmParseErrorKind { kUnparseableJson, kMissingKey, kExtraKey, kNonBinaryValue };

class LlmParseError : public DataError {
 public:
  LlmParseError(LlmParseErrorKind kind, const std::string& msg) : DataError(msg), kind_(kind) {}
  LlmParseErrorKind kind() const { return kind_; }

 private:
  LlmParseErrorKind kind_;
};

class FixtureMissingError : public DataError {
 public:
  using DataError::DataError;
};

// Extracts the first JSON object from the raw text (tolerating prose and code
// fences around it), requires exactly the 18 country-name keys with 0/1
// values, and maps them onto the canonical label order.
LabelVector parse_llm_response(const std::string& raw);

// Transport seam: live mode talks to a chat-completion endpoint, tests inject
// stubs. Replay mode never constructs or calls a transport.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct LlmEndpointConfig {
  std::string base_url;  // e.g. https://api.example.com
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "MLADI_API_KEY";
  int timeout_seconds = 60;
};

std::unique_ptr<ChatTransport> make_http_transport(const LlmEndpointConfig& endpoint);

enum class ClientMode { kReplay, kLive };

struct LlmClientConfig {
  ClientMode mode = ClientMode::kReplay;
  std::filesystem::path fixtures_dir;  // replay: recorded raw responses per sample id
  std::filesystem::path cache_dir;     // parsed-annotation cache (optional)
  std::string prompt_template;         // empty -> default template
  int max_retries = 2;                 // re-asks after a malformed response
  int max_inflight = 1;                // live-mode concurrency cap
  LlmEndpointConfig endpoint;
};

struct LlmAnnotation {
  LabelVector labels;
  int retries_used = 0;
  bool from_cache = false;
};

// Multi-label annotations from a chat model, with response caching keyed on
// (sample id, template hash) and a bounded retry loop around parse failures.
class LlmAnnotationClient {
 public:
  explicit LlmAnnotationClient(LlmClientConfig cfg,
                               std::unique_ptr<ChatTransport> transport = nullptr);

  LlmAnnotation annotate(const Sample& x);

  // Batched annotation; in live mode up to max_inflight requests run
  // concurrently, results are merged by id.
  std::map<std::string, LlmAnnotation> annotate_batch(const std::vector<Sample>& samples);

  const std::string& template_hash() const { return template_hash_; }
  const std::string& prompt_template() const { return template_; }

 private:
  std::string fetch_raw(const Sample& x, const std::string& prompt, int attempt);
  bool cache_lookup(const std::string& id, LabelVector& out) const;
  void cache_store(const Sample& x, const LabelVector& labels) const;

  LlmClientConfig cfg_;
  std::string template_;
  std::string template_hash_;
  std::unique_ptr<ChatTransport> transport_;
  mutable std::mutex cache_mutex_;
};

LabelVector gpt_vector(const Sample& x, LlmAnnotationClient& client);

}  // namespace mladi
