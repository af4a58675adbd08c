#pragma once

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pers16/digest.hpp"
#include "pers16/item_bank.hpp"
#include "pers16/prompt_forge.hpp"
#include "pers16/records.hpp"
#include "pers16/response_parser.hpp"
#include "pers16/synthetic_respondent.hpp"

namespace pers16 {

// Permanent failure: not retried.
class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Timeouts, connection resets, HTTP 408/429/5xx.
class TransientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingCredentialError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class RetriesExhaustedError : public GatewayError {
 public:
  RetriesExhaustedError(int attempts, const std::string& last_cause)
      : GatewayError("gave up after " + std::to_string(attempts) + " attempts: " + last_cause),
        attempts_(attempts),
        last_cause_(last_cause) {}
  int attempts() const { return attempts_; }
  const std::string& last_cause() const { return last_cause_; }

 private:
  int attempts_;
  std::string last_cause_;
};

struct ModelSpec {
  std::string model_id;
  std::string endpoint;
  std::string auth_env_var;  // empty: no credential sent
  std::string request_style = "openai-chat";
  double temperature = 0.0;
  int max_tokens = 16;
  // Only for request_style "synthetic".
  std::string ground_truth;

  void validate() const {
    if (model_id.empty()) throw std::invalid_argument("model spec needs a model_id");
    if (endpoint.find("://") == std::string::npos || endpoint.rfind("://") == 0) {
      throw std::invalid_argument("model " + model_id + ": endpoint must be an absolute URL");
    }
    if (!std::isfinite(temperature) || temperature < 0) {
      throw std::invalid_argument("model " + model_id + ": temperature must be finite and >= 0");
    }
    if (max_tokens <= 0) throw std::invalid_argument("model " + model_id + ": max_tokens must be positive");
    static const std::vector<std::string> styles = {"openai-chat", "anthropic-messages", "gemini-generate",
                                                    "synthetic"};
    if (std::find(styles.begin(), styles.end(), request_style) == styles.end()) {
      throw std::invalid_argument("model " + model_id + ": unknown request_style '" + request_style + "'");
    }
    if (request_style == "synthetic" && ground_truth.empty()) {
      throw std::invalid_argument("model " + model_id + ": synthetic backend needs a ground_truth file");
    }
  }
};

inline json to_json(const ModelSpec& m) {
  json j{{"model_id", m.model_id},       {"endpoint", m.endpoint},   {"auth_env_var", m.auth_env_var},
         {"request_style", m.request_style}, {"temperature", m.temperature}, {"max_tokens", m.max_tokens}};
  if (!m.ground_truth.empty()) j["ground_truth"] = m.ground_truth;
  return j;
}

inline ModelSpec model_spec_from_json(const json& j) {
  ModelSpec m;
  m.model_id = j.at("model_id").get<std::string>();
  m.endpoint = j.at("endpoint").get<std::string>();
  m.auth_env_var = j.value("auth_env_var", std::string{});
  m.request_style = j.value("request_style", std::string{"openai-chat"});
  m.temperature = j.value("temperature", 0.0);
  m.max_tokens = j.value("max_tokens", 16);
  m.ground_truth = j.value("ground_truth", std::string{});
  m.validate();
  return m;
}

// Model config file: a JSON list of ModelSpec objects. Relative ground-truth
// paths resolve against the config file's directory.
inline std::vector<ModelSpec> load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read model config '" + path.string() + "'");
  json doc = json::parse(in);
  if (!doc.is_array()) throw std::invalid_argument("model config must be a JSON list");
  std::vector<ModelSpec> out;
  for (const auto& j : doc) {
    auto m = model_spec_from_json(j);
    if (!m.ground_truth.empty() && std::filesystem::path(m.ground_truth).is_relative()) {
      m.ground_truth = (path.parent_path() / m.ground_truth).lexically_normal().string();
    }
    out.push_back(std::move(m));
  }
  return out;
}

struct ChatRequest {
  std::string model_id;
  std::string prompt_text;
  double temperature = 0.0;
  int max_tokens = 16;
  // Job context for backends that answer from job coordinates; may be null.
  const PromptJob* job = nullptr;
};

struct ChatResponse {
  std::string raw_text;
  double latency_ms = 0.0;
  int attempt_count = 0;
  std::string backend_tag;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Returns the reply text verbatim. Throws TransientError or GatewayError.
  virtual std::string send(const ChatRequest& req) = 0;
  virtual std::string tag() const = 0;
  virtual bool needs_credential() const { return false; }
};

class SyntheticBackend : public Backend {
 public:
  SyntheticBackend(const ItemBank& bank, GroundTruth gt) : bank_(bank), gt_(std::move(gt)) { gt_.validate(); }

  std::string send(const ChatRequest& req) override {
    if (!req.job) throw GatewayError("synthetic backend needs job context");
    return synthetic_answer(gt_, bank_, *req.job);
  }
  std::string tag() const override { return "synthetic"; }

 private:
  const ItemBank& bank_;
  GroundTruth gt_;
};

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;

  std::string origin() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

inline ParsedUrl parse_url(const std::string& url) {
  ParsedUrl u;
  const auto sep = url.find("://");
  if (sep == std::string::npos || sep == 0) throw std::invalid_argument("not an absolute URL: " + url);
  u.scheme = url.substr(0, sep);
  std::string rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : rest.substr(slash);
  if (authority.empty()) throw std::invalid_argument("URL has no host: " + url);
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos && authority.find(']') == std::string::npos) {
    u.host = authority.substr(0, colon);
    u.port = std::stoi(authority.substr(colon + 1));
  } else {
    u.host = authority;
    u.port = u.scheme == "https" ? 443 : 80;
  }
  return u;
}

// Request body for a chat-completion dialect; the prompt is one user message.
inline json chat_request_body(const std::string& style, const ChatRequest& req) {
  if (style == "openai-chat") {
    return {{"model", req.model_id},
            {"messages", json::array({{{"role", "user"}, {"content", req.prompt_text}}})},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
  }
  if (style == "anthropic-messages") {
    return {{"model", req.model_id},
            {"max_tokens", req.max_tokens},
            {"temperature", req.temperature},
            {"messages", json::array({{{"role", "user"}, {"content", req.prompt_text}}})}};
  }
  if (style == "gemini-generate") {
    return {{"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", req.prompt_text}}})}}})},
            {"generationConfig", {{"temperature", req.temperature}, {"maxOutputTokens", req.max_tokens}}}};
  }
  throw GatewayError("unsupported request style '" + style + "'");
}

// Extracts the reply text from a dialect's response body.
inline std::string chat_reply_text(const std::string& style, const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    throw GatewayError("malformed endpoint reply: not JSON");
  }
  try {
    if (style == "openai-chat") {
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    if (style == "anthropic-messages") {
      std::string text;
      for (const auto& block : doc.at("content")) {
        if (block.value("type", std::string{"text"}) == "text") text += block.at("text").get<std::string>();
      }
      return text;
    }
    if (style == "gemini-generate") {
      std::string text;
      for (const auto& part : doc.at("candidates").at(0).at("content").at("parts")) {
        text += part.at("text").get<std::string>();
      }
      return text;
    }
  } catch (const json::exception& e) {
    throw GatewayError(std::string("malformed endpoint reply: ") + e.what());
  }
  throw GatewayError("unsupported request style '" + style + "'");
}

class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(ModelSpec spec, std::chrono::seconds timeout = std::chrono::seconds(60))
      : spec_(std::move(spec)), url_(parse_url(spec_.endpoint)), timeout_(timeout) {}

  std::string send(const ChatRequest& req) override {
    httplib::Headers headers;
    if (!spec_.auth_env_var.empty()) {
      const char* secret = std::getenv(spec_.auth_env_var.c_str());
      if (!secret || !*secret) throw MissingCredentialError("environment variable " + spec_.auth_env_var + " is not set");
      if (spec_.request_style == "anthropic-messages") {
        headers.emplace("x-api-key", secret);
        headers.emplace("anthropic-version", "2023-06-01");
      } else if (spec_.request_style == "gemini-generate") {
        headers.emplace("x-goog-api-key", secret);
      } else {
        headers.emplace("Authorization", std::string("Bearer ") + secret);
      }
    }
    httplib::Client client(url_.origin());
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    const auto body = chat_request_body(spec_.request_style, req).dump();
    auto res = client.Post(url_.path, headers, body, "application/json");
    if (!res) throw TransientError("HTTP transport error: " + httplib::to_string(res.error()));
    const int status = res->status;
    if (status == 408 || status == 429 || (status >= 500 && status <= 599)) {
      throw TransientError("HTTP " + std::to_string(status));
    }
    if (status < 200 || status >= 300) {
      throw GatewayError("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    return chat_reply_text(spec_.request_style, res->body);
  }

  std::string tag() const override { return "http:" + spec_.request_style; }
  bool needs_credential() const override { return !spec_.auth_env_var.empty(); }

 private:
  ModelSpec spec_;
  ParsedUrl url_;
  std::chrono::seconds timeout_;
};

inline std::unique_ptr<Backend> make_backend(const ModelSpec& spec, const ItemBank& bank) {
  spec.validate();
  if (spec.request_style == "synthetic") {
    return std::make_unique<SyntheticBackend>(bank, load_ground_truth(spec.ground_truth));
  }
  return std::make_unique<HttpChatBackend>(spec);
}

// ---------------------------------------------------------------------------
// Cache

// Digest of (model_id, prompt_text, temperature, bank digest). A repeat index
// above zero is folded in so repeated samples do not collapse onto one blob.
inline std::string cache_key(const std::string& model_id, const std::string& prompt_text, double temperature,
                             const std::string& bank_digest, int repeat = 0) {
  char temp[40];
  std::snprintf(temp, sizeof temp, "%.17g", temperature);
  Sha256 h;
  h.field(model_id).field(prompt_text).field(temp).field(bank_digest);
  if (repeat > 0) h.field("repeat:" + std::to_string(repeat));
  return h.hex();
}

// Directory of response blobs named by cache key hex digest. Each blob holds
// the raw reply text verbatim.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<std::string> get(const std::string& key) const {
    std::ifstream in(dir_ / key, std::ios::binary);
    if (!in) return std::nullopt;
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }

  void put(const std::string& key, const std::string& text) {
    const auto tmp = dir_ / (key + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(text.data(), static_cast<std::streamsize>(text.size()));
      if (!out) throw GatewayError("cannot write cache blob " + tmp.string());
    }
    std::filesystem::rename(tmp, dir_ / key);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Gateway

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
  // Minimum spacing between backend calls; 0 disables.
  double requests_per_second = 0.0;
  bool reask_on_ambiguous = true;
};

inline json to_json(const RetryPolicy& p) {
  return {{"max_attempts", p.max_attempts},
          {"base_delay_ms", p.base_delay.count()},
          {"max_delay_ms", p.max_delay.count()},
          {"requests_per_second", p.requests_per_second},
          {"reask_on_ambiguous", p.reask_on_ambiguous}};
}

class Gateway {
 public:
  Gateway(Backend& backend, RetryPolicy policy, std::string bank_digest, ResponseCache* cache = nullptr)
      : backend_(backend), policy_(policy), bank_digest_(std::move(bank_digest)), cache_(cache) {
    if (policy_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  }

  // Cache first, then the backend with exponential backoff on transient
  // failures. `fresh` skips the cache read (used for re-asks) but still
  // writes the new reply.
  ChatResponse complete(const ChatRequest& req, bool fresh = false) {
    const int repeat = req.job ? req.job->repeat : 0;
    const auto key = cache_key(req.model_id, req.prompt_text, req.temperature, bank_digest_, repeat);
    const auto t0 = std::chrono::steady_clock::now();
    if (cache_ && !fresh) {
      if (auto hit = cache_->get(key)) {
        cache_hits_.fetch_add(1);
        return {*hit, elapsed_ms(t0), 0, "cache"};
      }
    }
    std::string last_cause;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
      throttle();
      const auto ta = std::chrono::steady_clock::now();
      try {
        backend_calls_.fetch_add(1);
        std::string text = backend_.send(req);
        if (cache_) cache_->put(key, text);
        return {std::move(text), elapsed_ms(ta), attempt, backend_.tag()};
      } catch (const TransientError& e) {
        last_cause = e.what();
        if (attempt < policy_.max_attempts) std::this_thread::sleep_for(backoff(attempt));
      }
    }
    throw RetriesExhaustedError(policy_.max_attempts, last_cause);
  }

  std::uint64_t backend_calls() const { return backend_calls_.load(); }
  std::uint64_t cache_hits() const { return cache_hits_.load(); }
  const RetryPolicy& policy() const { return policy_; }

 private:
  static double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
  }

  std::chrono::milliseconds backoff(int attempt) const {
    auto d = policy_.base_delay * (1LL << std::min(attempt - 1, 20));
    return std::min<std::chrono::milliseconds>(d, policy_.max_delay);
  }

  void throttle() {
    if (policy_.requests_per_second <= 0) return;
    const auto spacing = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / policy_.requests_per_second));
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(rate_mu_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_slot_);
      next_slot_ = slot + spacing;
    }
    std::this_thread::sleep_until(slot);
  }

  Backend& backend_;
  RetryPolicy policy_;
  std::string bank_digest_;
  ResponseCache* cache_;
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::mutex rate_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

// ---------------------------------------------------------------------------
// Batches

struct BatchSummary {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t not_run = 0;  // left over after cancellation
};

struct BatchOptions {
  std::size_t concurrency = 1;
  // Polled between jobs; when set, workers stop picking up new jobs.
  const std::atomic<bool>* cancel = nullptr;
};

inline ChatRequest request_for(const PromptJob& job, const ModelSpec& spec) {
  return {spec.model_id, job.prompt_text, spec.temperature, spec.max_tokens, &job};
}

inline ParseOutcome parse_for(AnswerSpace space, const std::string& raw) {
  return space == AnswerSpace::LETTER_A_E ? parse_letter(raw) : parse_intensity(raw);
}

// Evaluates one job end to end; gateway failures become error records.
inline ResponseRecord evaluate_job(Gateway& gateway, const PromptJob& job, const ModelSpec& spec) {
  ResponseRecord rec = record_skeleton(job);
  const ChatRequest req = request_for(job, spec);
  try {
    ChatResponse resp = gateway.complete(req);
    ParseOutcome parsed = parse_for(job.expected_answer_space, resp.raw_text);
    int attempts = resp.attempt_count;
    double latency = resp.latency_ms;
    if (!parsed.ok() && parsed.error == ParseError::AMBIGUOUS && gateway.policy().reask_on_ambiguous) {
      resp = gateway.complete(req, /*fresh=*/true);
      attempts += resp.attempt_count;
      latency += resp.latency_ms;
      parsed = parse_for(job.expected_answer_space, resp.raw_text);
    }
    rec.raw_text = resp.raw_text;
    rec.attempt_count = attempts;
    rec.latency_ms = latency;
    rec.backend_tag = resp.backend_tag;
    if (parsed.ok()) {
      rec.parsed = parsed.answer->canonical();
      rec.normalization = parsed.answer->normalization_applied;
    } else {
      rec.error = std::string(to_string(parsed.error));
    }
  } catch (const RetriesExhaustedError& e) {
    rec.error = std::string(kGatewayErrorTag);
    rec.error_detail = e.what();
    rec.attempt_count = e.attempts();
  } catch (const GatewayError& e) {
    rec.error = std::string(kGatewayErrorTag);
    rec.error_detail = e.what();
    rec.attempt_count = 1;
  }
  rec.timestamp = utc_timestamp();
  return rec;
}

// Runs every job not already in the sink. At most `concurrency` requests are
// in flight; sink failures abort the batch, job failures are recorded.
inline BatchSummary run_batch(const std::vector<PromptJob>& jobs, const ModelSpec& spec, Gateway& gateway,
                              RecordSink& sink, const BatchOptions& opts = {}) {
  if (opts.concurrency < 1) throw std::invalid_argument("concurrency must be positive");
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> succeeded{0}, failed{0}, skipped{0}, not_run{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      if (abort.load() || (opts.cancel && opts.cancel->load())) {
        not_run.fetch_add(1);
        continue;
      }
      const PromptJob& job = jobs[i];
      try {
        if (sink.contains(job.job_id)) {
          skipped.fetch_add(1);
          continue;
        }
        ResponseRecord rec = evaluate_job(gateway, job, spec);
        const bool ok = rec.ok();
        sink.append(rec);
        (ok ? succeeded : failed).fetch_add(1);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true);
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(opts.concurrency, jobs.size()));
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return {succeeded.load(), failed.load(), skipped.load(), not_run.load()};
}

}  // namespace pers16
