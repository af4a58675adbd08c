#pragma once

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "pers16/prompt_forge.hpp"
#include "pers16/response_parser.hpp"

namespace pers16 {

class SinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kGatewayErrorTag = "GATEWAY_ERROR";

// One persisted evaluation of one PromptJob.
struct ResponseRecord {
  std::string job_id;
  Condition condition;
  TraitId observed_trait{};
  std::optional<std::string> item_id;
  std::optional<FactorId> factor;
  std::optional<int> question_index;
  int repeat = 0;
  std::string prompt_digest;
  AnswerSpace answer_space = AnswerSpace::LETTER_A_E;
  std::optional<std::string> raw_text;  // absent when the gateway gave up
  std::optional<std::string> parsed;    // "A".."E" or "1".."5"
  std::optional<std::string> error;     // ParseError name or GATEWAY_ERROR
  std::string error_detail;
  std::vector<std::string> normalization;
  int attempt_count = 0;
  std::string backend_tag;
  double latency_ms = 0.0;
  std::string timestamp;

  bool ok() const { return parsed.has_value(); }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ResponseRecord record_skeleton(const PromptJob& job) {
  ResponseRecord r;
  r.job_id = job.job_id;
  r.condition = job.condition;
  r.observed_trait = job.observed_trait;
  r.item_id = job.item_id;
  r.factor = job.factor;
  r.question_index = job.question_index;
  r.repeat = job.repeat;
  r.prompt_digest = sha256_hex(job.prompt_text);
  r.answer_space = job.expected_answer_space;
  return r;
}

inline json to_json(const ResponseRecord& r) {
  json j{{"job_id", r.job_id},
         {"kind", std::string(to_string(r.condition.kind))},
         {"observed_trait", std::string(to_string(r.observed_trait))},
         {"repeat", r.repeat},
         {"prompt_digest", r.prompt_digest},
         {"answer_space", std::string(to_string(r.answer_space))},
         {"attempt_count", r.attempt_count},
         {"backend", r.backend_tag},
         {"latency_ms", r.latency_ms},
         {"timestamp", r.timestamp}};
  j["induced_trait"] = r.condition.induced_trait ? json(std::string(to_string(*r.condition.induced_trait))) : json(nullptr);
  j["level"] = r.condition.level ? json(*r.condition.level) : json(nullptr);
  j["item_id"] = r.item_id ? json(*r.item_id) : json(nullptr);
  j["factor"] = r.factor ? json(std::string(to_string(*r.factor))) : json(nullptr);
  j["question_index"] = r.question_index ? json(*r.question_index) : json(nullptr);
  j["raw_text"] = r.raw_text ? json(*r.raw_text) : json(nullptr);
  j["parsed"] = r.parsed ? json(*r.parsed) : json(nullptr);
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  if (!r.error_detail.empty()) j["error_detail"] = r.error_detail;
  j["normalization"] = r.normalization;
  return j;
}

namespace detail {
template <typename T, typename F>
std::optional<T> optional_field(const json& j, const char* key, F&& convert) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return convert(j.at(key));
}
}  // namespace detail

inline ResponseRecord record_from_json(const json& j) {
  ResponseRecord r;
  r.job_id = j.at("job_id").get<std::string>();
  r.condition.kind = condition_kind_from_string(j.at("kind").get<std::string>());
  r.condition.induced_trait = detail::optional_field<TraitId>(
      j, "induced_trait", [](const json& v) { return trait_from_string(v.get<std::string>()); });
  r.condition.level = detail::optional_field<int>(j, "level", [](const json& v) { return v.get<int>(); });
  r.condition.validate();
  r.observed_trait = trait_from_string(j.at("observed_trait").get<std::string>());
  r.item_id = detail::optional_field<std::string>(j, "item_id", [](const json& v) { return v.get<std::string>(); });
  r.factor = detail::optional_field<FactorId>(j, "factor", [](const json& v) {
    auto f = parse_factor(v.get<std::string>());
    if (!f) throw std::invalid_argument("unknown factor in record");
    return *f;
  });
  r.question_index = detail::optional_field<int>(j, "question_index", [](const json& v) { return v.get<int>(); });
  r.repeat = j.value("repeat", 0);
  r.prompt_digest = j.value("prompt_digest", std::string{});
  r.answer_space = j.value("answer_space", std::string{"LETTER_A_E"}) == "DIGIT_1_5" ? AnswerSpace::DIGIT_1_5
                                                                                   : AnswerSpace::LETTER_A_E;
  r.raw_text = detail::optional_field<std::string>(j, "raw_text", [](const json& v) { return v.get<std::string>(); });
  r.parsed = detail::optional_field<std::string>(j, "parsed", [](const json& v) { return v.get<std::string>(); });
  r.error = detail::optional_field<std::string>(j, "error", [](const json& v) { return v.get<std::string>(); });
  r.error_detail = j.value("error_detail", std::string{});
  if (j.contains("normalization")) r.normalization = j.at("normalization").get<std::vector<std::string>>();
  r.attempt_count = j.value("attempt_count", 0);
  r.backend_tag = j.value("backend", std::string{});
  r.latency_ms = j.value("latency_ms", 0.0);
  r.timestamp = j.value("timestamp", std::string{});
  if (r.parsed.has_value() == r.error.has_value()) {
    throw std::invalid_argument("record " + r.job_id + " must carry exactly one of parsed/error");
  }
  return r;
}

// Reads a JSONL record log. A final line without its newline is the residue
// of an interrupted append and is ignored; any other malformed line is an
// error.
inline std::vector<ResponseRecord> read_records(const std::filesystem::path& path) {
  std::vector<ResponseRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // truncated tail
    ++line_no;
    const std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw SinkError(path.string() + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
  }
  return out;
}

class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual bool contains(const std::string& job_id) const = 0;
  virtual void append(const ResponseRecord& record) = 0;
};

// Append-only JSONL log; appends from concurrent workers are serialized.
class JsonlRecordSink : public RecordSink {
 public:
  explicit JsonlRecordSink(std::filesystem::path path) : path_(std::move(path)) {
    std::error_code ec;
    if (std::filesystem::exists(path_, ec)) {
      for (const auto& r : read_records(path_)) done_.insert(r.job_id);
      drop_partial_tail();
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw SinkError("cannot open record log '" + path_.string() + "' for append");
  }

  bool contains(const std::string& job_id) const override {
    std::lock_guard lock(mu_);
    return done_.count(job_id) != 0;
  }

  void append(const ResponseRecord& record) override {
    const std::string line = to_json(record).dump() + "\n";
    std::lock_guard lock(mu_);
    if (done_.count(record.job_id)) throw SinkError("duplicate record for job " + record.job_id);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw SinkError("write to record log '" + path_.string() + "' failed");
    done_.insert(record.job_id);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return done_.size();
  }

 private:
  void drop_partial_tail() {
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.empty() || content.back() == '\n') return;
    const auto nl = content.rfind('\n');
    const auto keep = nl == std::string::npos ? 0 : nl + 1;
    std::filesystem::resize_file(path_, keep);
  }

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_set<std::string> done_;
  std::ofstream out_;
};

class MemoryRecordSink : public RecordSink {
 public:
  bool contains(const std::string& job_id) const override {
    std::lock_guard lock(mu_);
    for (const auto& r : records_) {
      if (r.job_id == job_id) return true;
    }
    return false;
  }
  void append(const ResponseRecord& record) override {
    std::lock_guard lock(mu_);
    records_.push_back(record);
  }
  std::vector<ResponseRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<ResponseRecord> records_;
};

}  // namespace pers16
