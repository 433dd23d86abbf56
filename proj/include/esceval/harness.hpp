// Copyright 2026 The esceval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ESCEVAL_HARNESS_HPP
#define ESCEVAL_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "esceval/corpus.hpp"
#include "esceval/strategy.hpp"

namespace esceval::harness {

// Sampling parameters sent with every request (defaults follow the
// provider defaults used for response generation: top-p 1.0, T 0.7).
struct GenParams {
  double temperature = 0.7;
  double top_p = 1.0;
  int max_tokens = 512;
  std::string seed_note;  // free-form note carried into the records
};

enum class MethodKind {
  kVanilla,
  kDirectRefine,
  kSelfRefine,
  kEmotionalCot,
  kWithKnowledge,
  kExampleExpansion,
  kWithStrategyPlanner,
};

struct Method {
  MethodKind kind = MethodKind::kVanilla;
  int shots = 0;       // vanilla; example expansion fixes 4
  int iterations = 1;  // refine variants, >= 1
  std::string planner_path;      // prediction file for the strategy planner
  std::string planner_endpoint;  // or a chat endpoint config file
  std::string knowledge_path;    // knowledge records for kWithKnowledge

  // Stable label recorded with each run record, e.g. "vanilla-2shot".
  std::string label() const;

  std::string to_json() const;
  static Method from_json(std::string_view json_text);
};

enum class Relation { kXReact, kXIntent, kXNeed, kXEffect, kXWant };

const std::string& relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);

// Precomputed, already-filtered commonsense inferences for one instance.
struct KnowledgeRecord {
  std::string instance_id;
  std::vector<std::pair<Relation, std::string>> inferences;
};

std::string knowledge_to_json(const KnowledgeRecord& record);
KnowledgeRecord knowledge_from_json(std::string_view json_text);
std::map<std::string, KnowledgeRecord> load_knowledge(
    const std::filesystem::path& file);

// Line-delimited {instance_id, strategy} planner predictions.
std::map<std::string, Strategy> load_planner_predictions(
    const std::filesystem::path& file);

enum class ParseStatus { kOk, kInvalidStrategy, kMalformed };

const std::string& parse_status_name(ParseStatus s);

struct Message {
  std::string role;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct EvalRunRecord {
  std::string instance_id;
  std::string method;
  int iteration = 0;   // 0 = initial generation
  std::string phase;   // "", "feedback" or "refine" for refine methods
  bool terminal = true;
  std::vector<Message> prompt_messages;
  std::string raw_completion;
  std::optional<Strategy> parsed_strategy;
  std::optional<std::string> parsed_utterance;
  ParseStatus parse_status = ParseStatus::kMalformed;
  std::int64_t latency_ms = 0;
  int attempt_count = 0;
};

std::string record_to_json(const EvalRunRecord& record);
EvalRunRecord record_from_json(std::string_view json_text);
void append_records(std::span<const EvalRunRecord> records,
                    const std::filesystem::path& file);
std::vector<EvalRunRecord> load_records(const std::filesystem::path& file);

// Seeded example selection with pairwise-distinct gold strategies; for
// n > 8 a strategy repeats only after all eight are used. The pool must
// offer at least min(n, 8) distinct gold strategies.
std::vector<corpus::TestInstance> select_examples(
    std::span<const corpus::TestInstance> pool, int n, std::uint64_t seed);

// Which generation of a method a prompt belongs to.
enum class PromptPhase {
  kInitial,   // first generation of any method
  kFeedback,  // Self-Refine feedback step
  kRefine,    // Direct-Refine / Self-Refine revision step
};

// Prior-turn artifacts required by refine prompts.
struct RefinePrior {
  Strategy strategy = Strategy::kOthers;
  std::string utterance;
  std::optional<std::string> feedback;  // required for the Self-Refine
                                        // revision step
};

// Assembles the single-user-message prompt: task description, the eight
// strategy descriptions, numbered example blocks, dialogue background and
// context, and the method-specific supplementary block. The context shown
// to the model excludes the instance's final (gold) turn.
std::vector<Message> build_prompt(
    const Method& method, PromptPhase phase,
    const corpus::TestInstance& instance,
    std::span<const corpus::TestInstance> examples,
    const KnowledgeRecord* knowledge = nullptr,
    const RefinePrior* prior = nullptr,
    std::optional<Strategy> planner_strategy = std::nullopt);

struct ParsedResponse {
  std::optional<Strategy> strategy;
  std::optional<std::string> utterance;
  ParseStatus status = ParseStatus::kMalformed;
};

// Extracts "Strategy:" and "Utterance:" lines (case-insensitive keys,
// surrounding whitespace and brackets tolerated). A strategy name outside
// the canonical eight yields kInvalidStrategy; missing lines yield
// kMalformed.
ParsedResponse parse_response(std::string_view completion);

struct EndpointConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // environment variable holding the key
  int max_attempts = 3;
  int timeout_s = 60;
  int retry_base_ms = 250;
  int concurrency = 4;
  // Per-endpoint floor between request starts, shared across workers.
  int min_request_interval_ms = 0;
  // Optional generation overrides carried in the same file (the CLI and C
  // API read them into GenParams).
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;

  GenParams gen_params() const;

  std::string to_json() const;
  static EndpointConfig from_json(std::string_view json_text);
  static EndpointConfig from_file(const std::filesystem::path& file);
};

// One chat completion with bounded retries and exponential backoff on
// 429/5xx and transport errors. Not thread-safe; use one per worker.
class ChatClient {
 public:
  explicit ChatClient(EndpointConfig config);
  ~ChatClient();
  ChatClient(ChatClient&&) noexcept;
  ChatClient& operator=(ChatClient&&) noexcept;

  struct Completion {
    std::string content;
    int attempts = 0;
  };

  Completion complete(std::span<const Message> messages,
                      const GenParams& params);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RunOptions {
  GenParams params;
  std::uint64_t seed = 0;
  int limit = -1;  // evaluate only the first N instances when >= 0
  // Few-shot example pool; defaults to the test set itself (an instance's
  // own dialogue is never sampled as its example).
  std::span<const corpus::TestInstance> example_pool;
  // Injectable clock for reproducible latency fields in tests.
  std::function<std::int64_t()> now_ms;
  // When set, records are appended here as instances finish and instances
  // with a terminal record already present are skipped (resumption).
  std::filesystem::path records_path;
};

// Evaluates every instance of `set` with the method, producing exactly one
// terminal record per instance (refine variants persist the intermediate
// iterations too). Malformed or invalid parses get one automatic re-prompt
// before the failure is recorded. Records are returned sorted by
// (instance_id, iteration, phase) so concurrent execution is
// order-independent.
std::vector<EvalRunRecord> run_method(const Method& method,
                                      std::span<const corpus::TestInstance> set,
                                      const EndpointConfig& endpoint,
                                      const RunOptions& options);

}  // namespace esceval::harness

#endif  // ESCEVAL_HARNESS_HPP
