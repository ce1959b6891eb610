#include "mladi/llm_client.hpp"

#include <atomic>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "mladi/io.hpp"

namespace mladi {

using nlohmann::json;

namespace {

std::array<DialectLabel, kNumDialects> make_prompt_order() {
  const char* codes[] = {"IQ", "EG", "MA", "LY", "AE", "SA", "BH", "SY", "LB",
                         "OM", "PS", "DZ", "JO", "TN", "KW", "YE", "SD", "QA"};
  std::array<DialectLabel, kNumDialects> order{};
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    order[i] = *DialectLabel::from_code(codes[i]);
  }
  return order;
}

}  // namespace

const std::array<DialectLabel, kNumDialects> kPromptCountryOrder = make_prompt_order();

std::string default_prompt_template() {
  return
      "Instruction: You are a native Arabic speaker and highly qualified linguist "
      "with expert-level understanding of regional Arabic dialects.\n"
      "\n"
      "Given the sentence provided, evaluate its dialectal characteristics "
      "independently for each of the following dialects: {countries}.\n"
      "\n"
      "Return findings in JSON format:\n"
      "{\n"
      "  \"Iraq\": 0/1,\n"
      "  \"Egypt\": 0/1,\n"
      "  ...\n"
      "  \"Qatar\": 0/1\n"
      "}\n"
      "Input sentence: {tweet}\n";
}

namespace {

std::string country_enumeration() {
  std::string out;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (i > 0) out += i + 1 == kNumDialects ? ", and " : ", ";
    out += kPromptCountryOrder[i].name();
  }
  return out;
}

void replace_all(std::string& text, const std::string& needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

}  // namespace

std::string render_prompt(const Sample& x, const std::string& template_text) {
  if (x.text.empty()) throw DataError("cannot render a prompt for empty sentence '" + x.id + "'");
  if (template_text.find("{tweet}") == std::string::npos) {
    throw UsageError("prompt template has no {tweet} placeholder");
  }
  std::string prompt = template_text;
  replace_all(prompt, "{countries}", country_enumeration());
  replace_all(prompt, "{tweet}", x.text);
  return prompt;
}

namespace {

// First balanced top-level JSON object in the text, string-aware.
std::string extract_json_object(const std::string& raw) {
  const std::size_t start = raw.find('{');
  if (start == std::string::npos) {
    throw LlmParseError(LlmParseErrorKind::kUnparseableJson, "no JSON object in response");
  }
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return raw.substr(start, i - start + 1);
    }
  }
  throw LlmParseError(LlmParseErrorKind::kUnparseableJson, "unterminated JSON object in response");
}

}  // namespace

LabelVector parse_llm_response(const std::string& raw) {
  json obj = json::parse(extract_json_object(raw), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw LlmParseError(LlmParseErrorKind::kUnparseableJson, "response is not valid JSON");
  }
  LabelVector v;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    const std::string key(kDialectNames[i]);
    auto it = obj.find(key);
    if (it == obj.end()) {
      throw LlmParseError(LlmParseErrorKind::kMissingKey, "response is missing key '" + key + "'");
    }
    if (!it->is_number_integer() && !it->is_number_unsigned() && !it->is_number_float()) {
      throw LlmParseError(LlmParseErrorKind::kNonBinaryValue,
                          "value for '" + key + "' is not a number");
    }
    const double value = it->get<double>();
    if (value != 0.0 && value != 1.0) {
      throw LlmParseError(LlmParseErrorKind::kNonBinaryValue,
                          "value for '" + key + "' is not 0/1");
    }
    v.set(i, value == 1.0);
  }
  if (obj.size() != kNumDialects) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!DialectLabel::from_name(it.key())) {
        throw LlmParseError(LlmParseErrorKind::kExtraKey,
                            "response has unexpected key '" + it.key() + "'");
      }
    }
  }
  return v;
}

// in http_transport.cpp
std::string live_chat_complete(const LlmEndpointConfig& endpoint, const std::string& api_key,
                               const std::string& prompt);

namespace {

class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(LlmEndpointConfig endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.base_url.empty()) {
      throw UsageError("live mode requires an endpoint base URL");
    }
    const char* key = std::getenv(endpoint_.api_key_env.c_str());
    if (!key || !*key) {
      throw UsageError("live mode requires the " + endpoint_.api_key_env +
                       " environment variable");
    }
    api_key_ = key;
  }

  std::string complete(const std::string& prompt) override {
    return live_chat_complete(endpoint_, api_key_, prompt);
  }

 private:
  LlmEndpointConfig endpoint_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const LlmEndpointConfig& endpoint) {
  return std::make_unique<HttpChatTransport>(endpoint);
}

LlmAnnotationClient::LlmAnnotationClient(LlmClientConfig cfg,
                                         std::unique_ptr<ChatTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  template_ = cfg_.prompt_template.empty() ? default_prompt_template() : cfg_.prompt_template;
  if (template_.find("{tweet}") == std::string::npos) {
    throw UsageError("prompt template has no {tweet} placeholder");
  }
  template_hash_ = checksum_hex(template_);
  if (cfg_.mode == ClientMode::kLive && !transport_) {
    transport_ = make_http_transport(cfg_.endpoint);
  }
  if (cfg_.mode == ClientMode::kReplay && cfg_.fixtures_dir.empty()) {
    throw UsageError("replay mode requires a fixtures directory");
  }
  if (cfg_.max_retries < 0) throw UsageError("max_retries must be >= 0");
  if (cfg_.max_inflight < 1) throw UsageError("max_inflight must be >= 1");
}

bool LlmAnnotationClient::cache_lookup(const std::string& id, LabelVector& out) const {
  if (cfg_.cache_dir.empty()) return false;
  const auto path = cfg_.cache_dir / (id + ".json");
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (!std::filesystem::exists(path)) return false;
  json entry = json::parse(read_file(path), nullptr, false);
  if (entry.is_discarded() || entry.value("template_hash", "") != template_hash_) return false;
  out = LabelVector::from_bitstring(entry.at("labels").get<std::string>());
  return true;
}

void LlmAnnotationClient::cache_store(const Sample& x, const LabelVector& labels) const {
  if (cfg_.cache_dir.empty()) return;
  json entry;
  entry["id"] = x.id;
  entry["template_hash"] = template_hash_;
  entry["labels"] = labels.to_bitstring();
  entry["text_checksum"] = checksum_hex(x.text);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  atomic_write(cfg_.cache_dir / (x.id + ".json"), entry.dump(2) + "\n");
}

std::string LlmAnnotationClient::fetch_raw(const Sample& x, const std::string& prompt,
                                           int attempt) {
  if (cfg_.mode == ClientMode::kReplay) {
    const auto path = cfg_.fixtures_dir / (x.id + ".json");
    if (!std::filesystem::exists(path)) {
      throw FixtureMissingError("no replay fixture for sample '" + x.id + "' (" + path.string() +
                                ")");
    }
    json fixture = json::parse(read_file(path), nullptr, false);
    if (fixture.is_discarded()) {
      throw DataError("replay fixture for '" + x.id + "' is not valid JSON");
    }
    if (fixture.is_object() && fixture.contains("responses")) {
      const auto& responses = fixture.at("responses");
      if (!responses.is_array() || responses.empty()) {
        throw DataError("replay fixture for '" + x.id + "' has an empty responses array");
      }
      const std::size_t idx =
          std::min(static_cast<std::size_t>(attempt), responses.size() - 1);
      return responses[idx].get<std::string>();
    }
    if (fixture.is_object() && fixture.contains("response")) {
      return fixture.at("response").get<std::string>();
    }
    throw DataError("replay fixture for '" + x.id + "' needs a response/responses field");
  }
  return transport_->complete(prompt);
}

LlmAnnotation LlmAnnotationClient::annotate(const Sample& x) {
  LlmAnnotation result;
  if (cache_lookup(x.id, result.labels)) {
    result.from_cache = true;
    return result;
  }
  const std::string prompt = render_prompt(x, template_);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    const std::string raw = fetch_raw(x, prompt, attempt);
    try {
      result.labels = parse_llm_response(raw);
      result.retries_used = attempt;
      cache_store(x, result.labels);
      return result;
    } catch (const LlmParseError& e) {
      last_error = e.what();
    }
  }
  throw ExternalServiceError("annotation for '" + x.id + "' failed after " +
                             std::to_string(cfg_.max_retries) + " retr" +
                             (cfg_.max_retries == 1 ? "y" : "ies") + ": " + last_error);
}

std::map<std::string, LlmAnnotation> LlmAnnotationClient::annotate_batch(
    const std::vector<Sample>& samples) {
  std::map<std::string, LlmAnnotation> results;
  if (cfg_.mode == ClientMode::kReplay || cfg_.max_inflight == 1 || samples.size() <= 1) {
    for (const auto& s : samples) results[s.id] = annotate(s);
    return results;
  }

  std::mutex results_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= samples.size()) return;
      try {
        auto ann = annotate(samples[i]);
        std::lock_guard<std::mutex> lock(results_mutex);
        results[samples[i].id] = std::move(ann);
      } catch (...) {
        std::lock_guard<std::mutex> lock(results_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_inflight), samples.size());
  threads.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

LabelVector gpt_vector(const Sample& x, LlmAnnotationClient& client) {
  return client.annotate(x).labels;
}

}  // namespace mladi
