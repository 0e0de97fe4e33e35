#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

namespace aupair {

using json = nlohmann::json;

enum class BackendKind { http, replay, scripted };

std::string_view to_string(BackendKind k);

// Routing metadata attached by the pipeline. It never reaches the model and is
// not part of the cache key; the scripted oracle keys its rules on it.
struct RequestContext {
  std::string problem_id;
  std::vector<std::string> pair_ids;          // in-context pairs, prompt order
  std::vector<std::string> pair_problem_ids;  // source problem of each pair
  std::string guess_code;                     // the code being repaired, if any
  std::int64_t attempt_index = -1;            // ordinal of this call for the problem
};

struct GenerationRequest {
  std::string prompt;
  double temperature = 1.0;
  int max_tokens = 2048;
  std::vector<std::string> stop_sequences;
  std::string tag;  // phase / purpose
  RequestContext context;
};

// Digest of (prompt, temperature, max_tokens, stop_sequences).
std::string cache_key(const GenerationRequest& request);

struct GenerationRecord {
  GenerationRequest request;
  std::string response_text;
  BackendKind backend = BackendKind::scripted;
  std::string cache_key;
  std::int64_t call_index = 0;
  bool transport_failed = false;
};

json record_to_json(const GenerationRecord& r);
GenerationRecord record_from_json(const json& j);

// Call allowance. Every backend call consumes exactly one unit.
class Budget {
 public:
  explicit Budget(std::int64_t limit);

  std::int64_t limit() const { return limit_; }
  std::int64_t used() const;
  std::int64_t remaining() const;
  bool exhausted() const { return remaining() <= 0; }

  // Throws BudgetExhausted (leaving `used` unchanged) when nothing is left.
  void consume();

 private:
  std::int64_t limit_;
  std::int64_t used_ = 0;
  mutable std::mutex mutex_;
};

struct BackendReply {
  std::string text;
  BackendKind kind = BackendKind::scripted;
  bool transport_failed = false;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply complete(const GenerationRequest& request, const std::string& key,
                                std::int64_t call_index) = 0;
};

// Append-only JSONL log of generation records. Without a path it only keeps
// records in memory.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path, bool truncate = true);

  void append(const GenerationRecord& record);
  std::size_t size() const;
  std::vector<GenerationRecord> records() const;

  static std::vector<GenerationRecord> read(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::vector<GenerationRecord> records_;
  std::optional<std::ofstream> out_;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<RunLog> log = nullptr,
                   std::size_t parallelism = 1);

  // Consumes one unit of `budget`, calls the backend and logs the record.
  // Throws BudgetExhausted before touching the backend when the budget is spent.
  GenerationRecord generate(const GenerationRequest& request, Budget& budget);

  std::int64_t calls() const;
  RunLog& log() { return *log_; }
  std::size_t parallelism() const { return parallelism_; }

 private:
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<RunLog> log_;
  std::size_t parallelism_;
  std::counting_semaphore<1 << 16> slots_;
  mutable std::mutex mutex_;
  std::int64_t next_call_ = 0;
  std::map<std::string, std::string> prompt_digests_;
};

}  // namespace aupair
