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

#include "esceval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "esceval/errors.hpp"
#include "esceval/rng.hpp"

namespace esceval::harness {
namespace {

using nlohmann::json;

const std::array<std::string, 5> kRelationNames = {
    "xReact", "xIntent", "xNeed", "xEffect", "xWant"};

const std::array<std::string, 3> kParseStatusNames = {"ok", "invalid_strategy",
                                                      "malformed"};

const std::map<std::string, MethodKind> kMethodKinds = {
    {"vanilla", MethodKind::kVanilla},
    {"direct-refine", MethodKind::kDirectRefine},
    {"self-refine", MethodKind::kSelfRefine},
    {"emotional-cot", MethodKind::kEmotionalCot},
    {"with-knowledge", MethodKind::kWithKnowledge},
    {"example-expansion", MethodKind::kExampleExpansion},
    {"with-planner", MethodKind::kWithStrategyPlanner},
};

const std::string& method_kind_name(MethodKind kind) {
  for (const auto& [name, k] : kMethodKinds) {
    if (k == kind) return name;
  }
  throw ContractViolation("unknown method kind");
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json message_to_json(const Message& m) {
  return json{{"role", m.role}, {"content", m.content}};
}

// Process-wide request pacing per endpoint: workers sharing a base_url
// space their request starts by min_request_interval_ms.
class EndpointThrottle {
 public:
  static void pace(const std::string& base_url, int interval_ms) {
    if (interval_ms <= 0) return;
    static std::mutex registry_mutex;
    static std::map<std::string,
                    std::chrono::steady_clock::time_point> next_slot;
    std::chrono::steady_clock::time_point wait_until;
    {
      std::lock_guard<std::mutex> lock(registry_mutex);
      const auto now = std::chrono::steady_clock::now();
      auto& slot = next_slot[base_url];
      if (slot < now) slot = now;
      wait_until = slot;
      slot += std::chrono::milliseconds(interval_ms);
    }
    std::this_thread::sleep_until(wait_until);
  }
};

// Sort key making concurrent runs order-independent: refine chains keep
// their generation order within one instance.
int phase_rank(const EvalRunRecord& r) {
  if (r.phase == "feedback") return 0;
  if (r.phase == "refine") return 1;
  return 2;
}

bool record_less(const EvalRunRecord& a, const EvalRunRecord& b) {
  if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
  if (a.iteration != b.iteration) return a.iteration < b.iteration;
  return phase_rank(a) < phase_rank(b);
}

}  // namespace

const std::string& relation_name(Relation r) {
  return kRelationNames[static_cast<int>(r)];
}

std::optional<Relation> relation_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (name == kRelationNames[i]) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

const std::string& parse_status_name(ParseStatus s) {
  return kParseStatusNames[static_cast<int>(s)];
}

std::string Method::to_json() const {
  json out;
  out["kind"] = method_kind_name(kind);
  out["shots"] = shots;
  out["iterations"] = iterations;
  if (!planner_path.empty()) out["planner_path"] = planner_path;
  if (!planner_endpoint.empty()) out["planner_endpoint"] = planner_endpoint;
  if (!knowledge_path.empty()) out["knowledge_path"] = knowledge_path;
  return out.dump();
}

Method Method::from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("bad method config: ") + e.what());
  }
  Method method;
  const std::string kind = in.value("kind", "vanilla");
  auto it = kMethodKinds.find(kind);
  if (it == kMethodKinds.end()) {
    throw ConfigError("unknown method kind: " + kind);
  }
  method.kind = it->second;
  method.shots = in.value("shots", 0);
  method.iterations = in.value("iterations", 1);
  method.planner_path = in.value("planner_path", "");
  method.planner_endpoint = in.value("planner_endpoint", "");
  method.knowledge_path = in.value("knowledge_path", "");
  if (method.iterations < 1) {
    throw ConfigError("method iterations must be >= 1");
  }
  if (method.shots < 0) throw ConfigError("method shots must be >= 0");
  return method;
}

std::string knowledge_to_json(const KnowledgeRecord& record) {
  json out;
  out["instance_id"] = record.instance_id;
  json inferences = json::array();
  for (const auto& [relation, text] : record.inferences) {
    inferences.push_back({{"relation", relation_name(relation)},
                          {"text", text}});
  }
  out["inferences"] = std::move(inferences);
  return out.dump();
}

KnowledgeRecord knowledge_from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bad knowledge record: ") + e.what());
  }
  KnowledgeRecord record;
  record.instance_id = in.at("instance_id").get<std::string>();
  for (const json& entry : in.at("inferences")) {
    const std::string name = entry.at("relation").get<std::string>();
    auto relation = relation_from_name(name);
    if (!relation) {
      throw FormatError("unknown knowledge relation: " + name);
    }
    record.inferences.emplace_back(*relation,
                                   entry.at("text").get<std::string>());
  }
  return record;
}

std::map<std::string, KnowledgeRecord> load_knowledge(
    const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::map<std::string, KnowledgeRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    KnowledgeRecord record = knowledge_from_json(line);
    records[record.instance_id] = std::move(record);
  }
  return records;
}

std::map<std::string, Strategy> load_planner_predictions(
    const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::map<std::string, Strategy> predictions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("bad planner prediction at line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    const std::string name = entry.at("strategy").get<std::string>();
    auto strategy = strategy_from_name_lenient(name);
    if (!strategy) {
      throw FormatError("unknown strategy in planner predictions: " + name);
    }
    predictions[entry.at("instance_id").get<std::string>()] = *strategy;
  }
  return predictions;
}

std::string record_to_json(const EvalRunRecord& record) {
  json out;
  out["instance_id"] = record.instance_id;
  out["method"] = record.method;
  out["iteration"] = record.iteration;
  out["phase"] = record.phase;
  out["terminal"] = record.terminal;
  json messages = json::array();
  for (const Message& m : record.prompt_messages) {
    messages.push_back(message_to_json(m));
  }
  out["prompt_messages"] = std::move(messages);
  out["raw_completion"] = record.raw_completion;
  out["parsed_strategy"] = record.parsed_strategy
                               ? json(strategy_name(*record.parsed_strategy))
                               : json(nullptr);
  out["parsed_utterance"] =
      record.parsed_utterance ? json(*record.parsed_utterance) : json(nullptr);
  out["parse_status"] = parse_status_name(record.parse_status);
  out["latency_ms"] = record.latency_ms;
  out["attempt_count"] = record.attempt_count;
  return out.dump();
}

EvalRunRecord record_from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bad run record: ") + e.what());
  }
  EvalRunRecord record;
  try {
    record.instance_id = in.at("instance_id").get<std::string>();
    record.method = in.at("method").get<std::string>();
    record.iteration = in.at("iteration").get<int>();
    record.phase = in.value("phase", "");
    record.terminal = in.at("terminal").get<bool>();
    for (const json& m : in.at("prompt_messages")) {
      record.prompt_messages.push_back(Message{
          m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    record.raw_completion = in.at("raw_completion").get<std::string>();
    if (!in.at("parsed_strategy").is_null()) {
      auto strategy =
          strategy_from_name(in.at("parsed_strategy").get<std::string>());
      if (!strategy) {
        throw FormatError("unknown strategy in run record: " +
                          in.at("parsed_strategy").get<std::string>());
      }
      record.parsed_strategy = *strategy;
    }
    if (!in.at("parsed_utterance").is_null()) {
      record.parsed_utterance = in.at("parsed_utterance").get<std::string>();
    }
    const std::string status = in.at("parse_status").get<std::string>();
    bool found = false;
    for (std::size_t i = 0; i < kParseStatusNames.size(); ++i) {
      if (status == kParseStatusNames[i]) {
        record.parse_status = static_cast<ParseStatus>(i);
        found = true;
        break;
      }
    }
    if (!found) throw FormatError("unknown parse status: " + status);
    record.latency_ms = in.at("latency_ms").get<std::int64_t>();
    record.attempt_count = in.at("attempt_count").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad run record: ") + e.what());
  }
  return record;
}

void append_records(std::span<const EvalRunRecord> records,
                    const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write " + file.string());
  for (const EvalRunRecord& record : records) {
    out << record_to_json(record) << '\n';
  }
}

std::vector<EvalRunRecord> load_records(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<EvalRunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(line));
  }
  return records;
}

GenParams EndpointConfig::gen_params() const {
  GenParams params;
  if (temperature) params.temperature = *temperature;
  if (top_p) params.top_p = *top_p;
  if (max_tokens) params.max_tokens = *max_tokens;
  return params;
}

std::string EndpointConfig::to_json() const {
  json out;
  out["base_url"] = base_url;
  out["path"] = path;
  out["model"] = model;
  out["api_key_env"] = api_key_env;
  out["max_attempts"] = max_attempts;
  out["timeout_s"] = timeout_s;
  out["retry_base_ms"] = retry_base_ms;
  out["concurrency"] = concurrency;
  out["min_request_interval_ms"] = min_request_interval_ms;
  if (temperature) out["temperature"] = *temperature;
  if (top_p) out["top_p"] = *top_p;
  if (max_tokens) out["max_tokens"] = *max_tokens;
  return out.dump(2);
}

EndpointConfig EndpointConfig::from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("bad endpoint config: ") + e.what());
  }
  EndpointConfig config;
  config.base_url = in.value("base_url", "");
  if (config.base_url.empty()) {
    throw ConfigError("endpoint config needs base_url");
  }
  config.path = in.value("path", config.path);
  config.model = in.value("model", "");
  config.api_key_env = in.value("api_key_env", "");
  config.max_attempts = in.value("max_attempts", config.max_attempts);
  config.timeout_s = in.value("timeout_s", config.timeout_s);
  config.retry_base_ms = in.value("retry_base_ms", config.retry_base_ms);
  config.concurrency = in.value("concurrency", config.concurrency);
  config.min_request_interval_ms =
      in.value("min_request_interval_ms", config.min_request_interval_ms);
  if (in.contains("temperature")) {
    config.temperature = in["temperature"].get<double>();
  }
  if (in.contains("top_p")) config.top_p = in["top_p"].get<double>();
  if (in.contains("max_tokens")) {
    config.max_tokens = in["max_tokens"].get<int>();
  }
  if (config.max_attempts < 1 || config.concurrency < 1) {
    throw ConfigError("endpoint max_attempts and concurrency must be >= 1");
  }
  if (config.min_request_interval_ms < 0) {
    throw ConfigError("endpoint min_request_interval_ms must be >= 0");
  }
  return config;
}

EndpointConfig EndpointConfig::from_file(const std::filesystem::path& file) {
  return from_json(read_file(file));
}

struct ChatClient::Impl {
  EndpointConfig config;
  httplib::Client http;

  explicit Impl(EndpointConfig cfg)
      : config(std::move(cfg)), http(config.base_url) {
    http.set_connection_timeout(config.timeout_s, 0);
    http.set_read_timeout(config.timeout_s, 0);
    http.set_write_timeout(config.timeout_s, 0);
  }
};

ChatClient::ChatClient(EndpointConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}
ChatClient::~ChatClient() = default;
ChatClient::ChatClient(ChatClient&&) noexcept = default;
ChatClient& ChatClient::operator=(ChatClient&&) noexcept = default;

ChatClient::Completion ChatClient::complete(std::span<const Message> messages,
                                            const GenParams& params) {
  if (params.temperature < 0.0 || params.top_p <= 0.0 || params.top_p > 1.0 ||
      params.max_tokens <= 0) {
    throw ContractViolation(
        "chat: parameters require temperature >= 0, 0 < top_p <= 1, "
        "max_tokens > 0");
  }
  const EndpointConfig& config = impl_->config;
  json body;
  body["model"] = config.model;
  json msg_array = json::array();
  for (const Message& m : messages) msg_array.push_back(message_to_json(m));
  body["messages"] = std::move(msg_array);
  body["temperature"] = params.temperature;
  body["top_p"] = params.top_p;
  body["max_tokens"] = params.max_tokens;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_failure = "no attempt made";
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    if (attempt > 1) {
      const auto backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(config.retry_base_ms) << (attempt - 2));
      std::this_thread::sleep_for(backoff);
    }
    EndpointThrottle::pace(config.base_url, config.min_request_interval_ms);
    auto res = impl_->http.Post(config.path, headers, payload,
                                "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw EndpointError(EndpointError::Kind::kAuth,
                          "authentication rejected (HTTP " +
                              std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw EndpointError(EndpointError::Kind::kMalformedResponse,
                          "unexpected HTTP " + std::to_string(res->status) +
                              ": " + res->body);
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw EndpointError(EndpointError::Kind::kMalformedResponse,
                          std::string("response body is not JSON: ") +
                              e.what());
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content") ||
        !parsed["choices"][0]["message"]["content"].is_string()) {
      throw EndpointError(EndpointError::Kind::kMalformedResponse,
                          "response body lacks choices[0].message.content");
    }
    return Completion{
        parsed["choices"][0]["message"]["content"].get<std::string>(),
        attempt};
  }
  throw EndpointError(EndpointError::Kind::kExhausted,
                      "gave up after " + std::to_string(config.max_attempts) +
                          " attempts; last failure: " + last_failure);
}

namespace {

struct InstanceWork {
  const corpus::TestInstance* instance = nullptr;
  std::vector<EvalRunRecord> records;
};

// Everything one worker needs; shared state is the atomic cursor plus the
// mutex-guarded sinks.
struct RunContext {
  const Method* method;
  const RunOptions* options;
  const EndpointConfig* endpoint;
  std::span<const corpus::TestInstance> instances;
  std::span<const corpus::TestInstance> example_pool;
  const std::map<std::string, Strategy>* planner_predictions = nullptr;
  const EndpointConfig* planner_endpoint = nullptr;
  const std::map<std::string, KnowledgeRecord>* knowledge = nullptr;
  const std::set<std::string>* done = nullptr;

  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> aborted{false};
  std::mutex sink_mutex;
  std::vector<EvalRunRecord>* sink = nullptr;
  std::exception_ptr failure;
};

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

class InstanceRunner {
 public:
  InstanceRunner(RunContext& ctx, ChatClient& client,
                 ChatClient* planner_client)
      : ctx_(ctx), client_(client), planner_client_(planner_client) {}

  std::vector<EvalRunRecord> evaluate(const corpus::TestInstance& instance) {
    const Method& method = *ctx_.method;
    examples_ = pick_examples(instance);
    switch (method.kind) {
      case MethodKind::kDirectRefine:
        return refine_chain(instance, /*with_feedback=*/false);
      case MethodKind::kSelfRefine:
        return refine_chain(instance, /*with_feedback=*/true);
      case MethodKind::kWithStrategyPlanner:
        return {planner_record(instance)};
      default:
        return {simple_record(instance)};
    }
  }

 private:
  std::vector<corpus::TestInstance> pick_examples(
      const corpus::TestInstance& instance) {
    const Method& method = *ctx_.method;
    int shots = method.shots;
    if (method.kind == MethodKind::kExampleExpansion && shots == 0) shots = 4;
    if (shots == 0) return {};
    // Examples are resampled per instance; the instance's own dialogue is
    // never offered as an exemplar.
    std::vector<corpus::TestInstance> pool;
    for (const corpus::TestInstance& candidate : ctx_.example_pool) {
      if (candidate.dialogue_id != instance.dialogue_id) {
        pool.push_back(candidate);
      }
    }
    return select_examples(pool, shots,
                           derive_seed(ctx_.options->seed,
                                       instance.instance_id));
  }

  std::int64_t now() const {
    return ctx_.options->now_ms ? ctx_.options->now_ms() : wall_ms();
  }

  // One generation, with a single automatic re-prompt when the parse does
  // not come back ok.
  EvalRunRecord generate(const corpus::TestInstance& instance,
                         PromptPhase phase, int iteration,
                         const std::string& phase_label,
                         const KnowledgeRecord* knowledge,
                         const RefinePrior* prior,
                         std::optional<Strategy> planner_strategy,
                         bool reprompt_on_failure) {
    EvalRunRecord record;
    record.instance_id = instance.instance_id;
    record.method = ctx_.method->label();
    record.iteration = iteration;
    record.phase = phase_label;
    record.prompt_messages =
        build_prompt(*ctx_.method, phase, instance, examples_, knowledge,
                     prior, planner_strategy);
    const int rounds = reprompt_on_failure ? 2 : 1;
    for (int round = 0; round < rounds; ++round) {
      const std::int64_t started = now();
      auto completion =
          client_.complete(record.prompt_messages, ctx_.options->params);
      record.latency_ms += now() - started;
      record.attempt_count += completion.attempts;
      record.raw_completion = completion.content;
      ParsedResponse parsed = parse_response(completion.content);
      record.parsed_strategy = parsed.strategy;
      record.parsed_utterance = parsed.utterance;
      record.parse_status = parsed.status;
      if (parsed.status == ParseStatus::kOk) break;
    }
    return record;
  }

  EvalRunRecord simple_record(const corpus::TestInstance& instance) {
    const KnowledgeRecord* knowledge = nullptr;
    if (ctx_.method->kind == MethodKind::kWithKnowledge) {
      auto it = ctx_.knowledge->find(instance.instance_id);
      if (it == ctx_.knowledge->end()) {
        throw ConfigError("no knowledge record for " + instance.instance_id);
      }
      knowledge = &it->second;
    }
    EvalRunRecord record =
        generate(instance, PromptPhase::kInitial, 0, "", knowledge, nullptr,
                 std::nullopt, /*reprompt_on_failure=*/true);
    record.terminal = true;
    return record;
  }

  EvalRunRecord planner_record(const corpus::TestInstance& instance) {
    const std::optional<Strategy> planned = planned_strategy(instance);
    if (!planned) {
      // Endpoint-backed planner failed to produce a usable strategy.
      EvalRunRecord record;
      record.instance_id = instance.instance_id;
      record.method = ctx_.method->label();
      record.terminal = true;
      record.parse_status = ParseStatus::kMalformed;
      record.raw_completion = planner_raw_;
      return record;
    }
    EvalRunRecord record =
        generate(instance, PromptPhase::kInitial, 0, "", nullptr, nullptr,
                 planned, /*reprompt_on_failure=*/true);
    // The strategy is the planner's by construction (Eq.-style hand-off);
    // the model only supplies the utterance.
    if (!record.parsed_utterance) {
      const std::string flat = flatten(record.raw_completion);
      if (!flat.empty()) record.parsed_utterance = flat;
    }
    record.parsed_strategy = *planned;
    record.parse_status = record.parsed_utterance ? ParseStatus::kOk
                                                  : ParseStatus::kMalformed;
    if (record.parse_status == ParseStatus::kMalformed) {
      record.parsed_strategy.reset();
    }
    record.terminal = true;
    return record;
  }

  std::optional<Strategy> planned_strategy(
      const corpus::TestInstance& instance) {
    planner_raw_.clear();
    if (ctx_.planner_predictions != nullptr) {
      auto it = ctx_.planner_predictions->find(instance.instance_id);
      if (it == ctx_.planner_predictions->end()) {
        throw ConfigError("planner predictions do not cover " +
                          instance.instance_id);
      }
      return it->second;
    }
    // Endpoint planner: ask for a strategy with a plain prompt and keep
    // only the strategy line.
    Method probe;
    probe.kind = MethodKind::kVanilla;
    auto messages = build_prompt(probe, PromptPhase::kInitial, instance,
                                 examples_, nullptr, nullptr, std::nullopt);
    for (int round = 0; round < 2; ++round) {
      auto completion =
          planner_client_->complete(messages, ctx_.options->params);
      planner_raw_ = completion.content;
      ParsedResponse parsed = parse_response(completion.content);
      if (parsed.strategy) return parsed.strategy;
    }
    return std::nullopt;
  }

  std::vector<EvalRunRecord> refine_chain(const corpus::TestInstance& instance,
                                          bool with_feedback) {
    std::vector<EvalRunRecord> records;
    records.push_back(generate(instance, PromptPhase::kInitial, 0, "", nullptr,
                               nullptr, std::nullopt,
                               /*reprompt_on_failure=*/true));
    if (records.back().parse_status != ParseStatus::kOk) {
      records.back().terminal = true;  // nothing usable to refine
      return records;
    }
    records.back().terminal = false;
    RefinePrior prior;
    prior.strategy = *records.back().parsed_strategy;
    prior.utterance = *records.back().parsed_utterance;
    for (int iteration = 1; iteration <= ctx_.method->iterations;
         ++iteration) {
      if (with_feedback) {
        prior.feedback.reset();
        EvalRunRecord feedback =
            generate(instance, PromptPhase::kFeedback, iteration, "feedback",
                     nullptr, &prior, std::nullopt,
                     /*reprompt_on_failure=*/false);
        feedback.terminal = false;
        prior.feedback = flatten(feedback.raw_completion);
        records.push_back(std::move(feedback));
      }
      EvalRunRecord refined =
          generate(instance, PromptPhase::kRefine, iteration, "refine",
                   nullptr, &prior, std::nullopt,
                   /*reprompt_on_failure=*/true);
      const bool ok = refined.parse_status == ParseStatus::kOk;
      refined.terminal = !ok || iteration == ctx_.method->iterations;
      if (ok) {
        prior.strategy = *refined.parsed_strategy;
        prior.utterance = *refined.parsed_utterance;
      }
      records.push_back(std::move(refined));
      if (!ok) break;
    }
    return records;
  }

  // Single-line view of a completion, for feedback hand-off and bare
  // planner utterances.
  static std::string flatten(const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
      if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
        pending_space = !out.empty();
        continue;
      }
      if (pending_space) {
        out.push_back(' ');
        pending_space = false;
      }
      out.push_back(c);
    }
    return out;
  }

  RunContext& ctx_;
  ChatClient& client_;
  ChatClient* planner_client_;
  std::vector<corpus::TestInstance> examples_;
  std::string planner_raw_;
};

void worker_loop(RunContext& ctx) {
  try {
    ChatClient client(*ctx.endpoint);
    std::unique_ptr<ChatClient> planner_client;
    if (ctx.planner_endpoint != nullptr) {
      planner_client = std::make_unique<ChatClient>(*ctx.planner_endpoint);
    }
    InstanceRunner runner(ctx, client, planner_client.get());
    while (!ctx.aborted.load()) {
      const std::size_t index = ctx.cursor.fetch_add(1);
      if (index >= ctx.instances.size()) break;
      const corpus::TestInstance& instance = ctx.instances[index];
      if (ctx.done->contains(instance.instance_id)) continue;
      std::vector<EvalRunRecord> records = runner.evaluate(instance);
      std::lock_guard<std::mutex> lock(ctx.sink_mutex);
      if (!ctx.options->records_path.empty()) {
        append_records(records, ctx.options->records_path);
      }
      for (EvalRunRecord& record : records) {
        ctx.sink->push_back(std::move(record));
      }
    }
  } catch (...) {
    std::lock_guard<std::mutex> lock(ctx.sink_mutex);
    if (!ctx.failure) ctx.failure = std::current_exception();
    ctx.aborted.store(true);
  }
}

}  // namespace

std::vector<EvalRunRecord> run_method(const Method& method,
                                      std::span<const corpus::TestInstance> set,
                                      const EndpointConfig& endpoint,
                                      const RunOptions& options) {
  std::span<const corpus::TestInstance> instances = set;
  if (options.limit >= 0 &&
      static_cast<std::size_t>(options.limit) < instances.size()) {
    instances = instances.subspan(0, static_cast<std::size_t>(options.limit));
  }

  std::map<std::string, Strategy> planner_predictions;
  std::map<std::string, KnowledgeRecord> knowledge;
  EndpointConfig planner_endpoint;
  RunContext ctx;
  if (method.kind == MethodKind::kWithStrategyPlanner) {
    if (!method.planner_path.empty()) {
      planner_predictions = load_planner_predictions(method.planner_path);
      for (const corpus::TestInstance& instance : instances) {
        if (!planner_predictions.contains(instance.instance_id)) {
          throw ConfigError("planner predictions do not cover " +
                            instance.instance_id);
        }
      }
      ctx.planner_predictions = &planner_predictions;
    } else if (!method.planner_endpoint.empty()) {
      planner_endpoint = EndpointConfig::from_file(method.planner_endpoint);
      ctx.planner_endpoint = &planner_endpoint;
    } else {
      throw ConfigError(
          "with-planner needs planner_path or planner_endpoint");
    }
  }
  if (method.kind == MethodKind::kWithKnowledge) {
    if (method.knowledge_path.empty()) {
      throw ConfigError("with-knowledge needs knowledge_path");
    }
    knowledge = load_knowledge(method.knowledge_path);
    ctx.knowledge = &knowledge;
  }

  // Resumption: instances whose terminal record is already on disk are
  // kept as-is and skipped.
  std::vector<EvalRunRecord> records;
  std::set<std::string> done;
  if (!options.records_path.empty() &&
      std::filesystem::exists(options.records_path)) {
    for (EvalRunRecord& existing : load_records(options.records_path)) {
      if (existing.terminal) done.insert(existing.instance_id);
      records.push_back(std::move(existing));
    }
  }

  ctx.method = &method;
  ctx.options = &options;
  ctx.endpoint = &endpoint;
  ctx.instances = instances;
  ctx.example_pool =
      options.example_pool.empty() ? instances : options.example_pool;
  ctx.done = &done;
  ctx.sink = &records;

  const int workers = std::max(
      1, std::min<int>(endpoint.concurrency,
                       static_cast<int>(instances.size())));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&ctx] { worker_loop(ctx); });
  }
  for (std::thread& t : threads) t.join();

  if (ctx.failure) {
    if (!options.records_path.empty()) {
      try {
        std::rethrow_exception(ctx.failure);
      } catch (const EndpointError& e) {
        throw EndpointError(
            e.kind(),
            std::string(e.what()) + "; partial records kept at " +
                options.records_path.string() +
                " (re-run with the same output path to resume)");
      }
    }
    std::rethrow_exception(ctx.failure);
  }

  std::sort(records.begin(), records.end(), record_less);
  if (!options.records_path.empty()) {
    // Rewrite the append-only file in canonical order now that the run is
    // complete.
    const auto tmp = options.records_path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write " + tmp);
      for (const EvalRunRecord& record : records) {
        out << record_to_json(record) << '\n';
      }
    }
    std::filesystem::rename(tmp, options.records_path);
  }
  return records;
}

}  // namespace esceval::harness
