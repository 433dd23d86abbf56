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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <doctest.h>

#include "esceval/errors.hpp"
#include "esceval/rng.hpp"
#include "testutil.hpp"

using namespace esceval;
using harness::EvalRunRecord;
using harness::Method;
using harness::MethodKind;
using harness::ParseStatus;
using harness::PromptPhase;

namespace {

corpus::TestSets build_sets(std::size_t dialogues, std::uint64_t seed) {
  const auto raw = testutil::make_synthetic_corpus(dialogues, seed);
  return corpus::build_test_sets(raw, seed, StageMapping::standard());
}

std::vector<corpus::TestInstance> first_instances(const corpus::TestSets& sets,
                                                  std::size_t n) {
  std::vector<corpus::TestInstance> out;
  for (int s = 0; s < kNumStages && out.size() < n; ++s) {
    for (const auto& instance : sets.sets[s]) {
      if (out.size() == n) break;
      out.push_back(instance);
    }
  }
  return out;
}

std::string records_digest(std::span<const EvalRunRecord> records) {
  std::string out;
  for (const EvalRunRecord& record : records) {
    out += harness::record_to_json(record);
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("parse_response extracts the two tagged lines") {
  const auto parsed = harness::parse_response(
      "Strategy: Question\nUtterance: How long has this been going on?");
  CHECK(parsed.status == ParseStatus::kOk);
  CHECK(parsed.strategy == Strategy::kQuestion);
  CHECK(parsed.utterance == "How long has this been going on?");
}

TEST_CASE("parse_response is case-insensitive") {
  const auto parsed = harness::parse_response(
      "strategy: affirmation and reassurance\nutterance: You did great.");
  CHECK(parsed.status == ParseStatus::kOk);
  CHECK(parsed.strategy == Strategy::kAffirmation);
  CHECK(parsed.utterance == "You did great.");
}

TEST_CASE("parse_response flags names outside the canonical eight") {
  const auto parsed =
      harness::parse_response("Strategy: Advice\nUtterance: Try yoga.");
  CHECK(parsed.status == ParseStatus::kInvalidStrategy);
  CHECK(!parsed.strategy.has_value());
  CHECK(parsed.utterance == "Try yoga.");
}

TEST_CASE("parse_response tolerates brackets and markdown clutter") {
  const auto parsed = harness::parse_response(
      "Here is my reply.\n**[Strategy]**: [Reflection of feelings]\n"
      "Utterance: That sounds exhausting.");
  CHECK(parsed.status == ParseStatus::kOk);
  CHECK(parsed.strategy == Strategy::kReflection);
}

TEST_CASE("parse_response reports missing lines as malformed") {
  CHECK(harness::parse_response("I cannot help with that.").status ==
        ParseStatus::kMalformed);
  CHECK(harness::parse_response("Strategy: Question").status ==
        ParseStatus::kMalformed);
  CHECK(harness::parse_response("").status == ParseStatus::kMalformed);
}

TEST_CASE("parse_response round-trips the output format for every strategy") {
  for (Strategy s : all_strategies()) {
    const std::string text = "Strategy: " + strategy_name(s) +
                             "\nUtterance: a plain reply without tricks";
    const auto parsed = harness::parse_response(text);
    CHECK(parsed.status == ParseStatus::kOk);
    CHECK(parsed.strategy == s);
    CHECK(parsed.utterance == "a plain reply without tricks");
  }
}

TEST_CASE("parse_response never crashes on arbitrary bytes") {
  Rng rng(31337);
  const char alphabet[] =
      "abcdefghijSTRATEGYutterance:\n\r\t []{}()<>*\"'`.,!?-0123456789\xc3\xa9";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const std::size_t length = rng.below(200);
    for (std::size_t k = 0; k < length; ++k) {
      text.push_back(alphabet[rng.below(sizeof(alphabet) - 1)]);
    }
    const auto parsed = harness::parse_response(text);
    // Status and fields stay mutually consistent whatever came in.
    if (parsed.status == ParseStatus::kOk) {
      CHECK(parsed.strategy.has_value());
      CHECK(parsed.utterance.has_value());
      CHECK(!parsed.utterance->empty());
    }
    if (parsed.status == ParseStatus::kInvalidStrategy) {
      CHECK(!parsed.strategy.has_value());
      CHECK(parsed.utterance.has_value());
    }
  }
}

TEST_CASE("select_examples enforces strategy diversity") {
  const auto sets = build_sets(40, 17);
  const auto pool = first_instances(sets, 200);
  CHECK(harness::select_examples(pool, 0, 9).empty());

  const auto two = harness::select_examples(pool, 2, 9);
  REQUIRE(two.size() == 2);
  CHECK(two[0].gold_strategy != two[1].gold_strategy);

  const auto again = harness::select_examples(pool, 2, 9);
  CHECK(again[0].instance_id == two[0].instance_id);
  CHECK(again[1].instance_id == two[1].instance_id);

  // Ten examples: all eight strategies appear before any repeats.
  const auto ten = harness::select_examples(pool, 10, 123);
  REQUIRE(ten.size() == 10);
  std::set<Strategy> first_eight;
  for (int i = 0; i < 8; ++i) first_eight.insert(ten[i].gold_strategy);
  CHECK(first_eight.size() == 8);
}

TEST_CASE("select_examples rejects a pool without enough strategies") {
  const auto sets = build_sets(40, 17);
  std::vector<corpus::TestInstance> narrow;
  for (const auto& instance : first_instances(sets, 200)) {
    if (instance.gold_strategy == Strategy::kQuestion) narrow.push_back(instance);
  }
  REQUIRE(!narrow.empty());
  CHECK_THROWS_AS(harness::select_examples(narrow, 2, 1), ConfigError);
}

TEST_CASE("build_prompt carries the strategy descriptions and background") {
  const auto sets = build_sets(20, 3);
  const auto instance = first_instances(sets, 1).at(0);
  Method vanilla;
  const auto messages = harness::build_prompt(vanilla, PromptPhase::kInitial,
                                              instance, {});
  REQUIRE(messages.size() == 1);
  const std::string& prompt = messages[0].content;
  CHECK(prompt.find("Asking for information related to the problem") !=
        std::string::npos);
  CHECK(prompt.find("[Example") == std::string::npos);
  CHECK(prompt.find("The following is a conversation between a supporter and "
                    "a seeker about") != std::string::npos);
  CHECK(prompt.find(instance.background.situation) != std::string::npos);
  // The gold response must not leak into the prompt.
  CHECK(prompt.find(instance.gold_response) == std::string::npos);
  CHECK(prompt.rfind("### Model's response ###") != std::string::npos);
}

TEST_CASE("build_prompt renders the knowledge block") {
  const auto sets = build_sets(20, 3);
  const auto instance = first_instances(sets, 1).at(0);
  Method method;
  method.kind = MethodKind::kWithKnowledge;
  harness::KnowledgeRecord knowledge;
  knowledge.instance_id = instance.instance_id;
  knowledge.inferences = {{harness::Relation::kXReact, "anxious"},
                          {harness::Relation::kXWant, "to feel heard"}};
  const auto messages = harness::build_prompt(
      method, PromptPhase::kInitial, instance, {}, &knowledge);
  const std::string& prompt = messages[0].content;
  CHECK(prompt.find("### Commonsense knowledge ###") != std::string::npos);
  CHECK(prompt.find("ignore the commonsense knowledge if it mislead") !=
        std::string::npos);
  CHECK(prompt.find("The seeker feels anxious.") != std::string::npos);
  CHECK(prompt.find("The seeker wants to feel heard.") != std::string::npos);
}

TEST_CASE("build_prompt echoes the prior turn for refinement") {
  const auto sets = build_sets(20, 3);
  const auto instance = first_instances(sets, 1).at(0);
  Method method;
  method.kind = MethodKind::kSelfRefine;
  harness::RefinePrior prior;
  prior.strategy = Strategy::kAffirmation;
  prior.utterance = "You are doing your best.";
  prior.feedback = "Too generic; name the feeling.";
  const auto messages = harness::build_prompt(
      method, PromptPhase::kRefine, instance, {}, nullptr, &prior);
  const std::string& prompt = messages[0].content;
  CHECK(prompt.find("Strategy: Affirmation and Reassurance") !=
        std::string::npos);
  CHECK(prompt.find("Utterance: You are doing your best.") !=
        std::string::npos);
  CHECK(prompt.find("Feedback : Too generic; name the feeling.") !=
        std::string::npos);
  CHECK(prompt.rfind("### Refined response ###") != std::string::npos);
}

TEST_CASE("build_prompt enforces supplement preconditions") {
  const auto sets = build_sets(20, 3);
  const auto instance = first_instances(sets, 1).at(0);
  Method knowledge_method;
  knowledge_method.kind = MethodKind::kWithKnowledge;
  CHECK_THROWS_AS(harness::build_prompt(knowledge_method,
                                        PromptPhase::kInitial, instance, {}),
                  ContractViolation);
  Method vanilla;
  CHECK_THROWS_AS(harness::build_prompt(vanilla, PromptPhase::kRefine,
                                        instance, {}),
                  ContractViolation);
}

TEST_CASE("chat returns the completion and respects the parameters") {
  testutil::MockChatServer server(
      [](const std::string&) { return "a canned reply"; });
  harness::ChatClient client(server.endpoint());
  harness::GenParams params;
  const auto completion = client.complete(
      std::vector<harness::Message>{{"user", "ping"}}, params);
  CHECK(completion.content == "a canned reply");
  CHECK(completion.attempts == 1);
  const auto body = nlohmann::json::parse(server.last_body());
  CHECK(body["temperature"].get<double>() == 0.7);
  CHECK(body["top_p"].get<double>() == 1.0);
  CHECK(body["model"] == "mock-model");
}

TEST_CASE("chat retries through transient failures") {
  testutil::MockChatServer server(
      [](const std::string&) { return "eventually fine"; });
  server.fail_next(2);
  auto config = server.endpoint();
  config.max_attempts = 5;
  harness::ChatClient client(config);
  const auto completion = client.complete(
      std::vector<harness::Message>{{"user", "ping"}}, harness::GenParams{});
  CHECK(completion.content == "eventually fine");
  CHECK(completion.attempts == 3);
}

TEST_CASE("chat surfaces exhaustion as a distinct error") {
  testutil::MockChatServer server(
      [](const std::string&) { return "never seen"; });
  server.fail_next(10);
  auto config = server.endpoint();
  config.max_attempts = 2;
  harness::ChatClient client(config);
  try {
    client.complete(std::vector<harness::Message>{{"user", "ping"}},
                    harness::GenParams{});
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(e.kind() == EndpointError::Kind::kExhausted);
  }
}

TEST_CASE("chat rejects authentication failures without retrying") {
  testutil::MockChatServer server(
      [](const std::string&) { return "never seen"; });
  server.fail_next(1, 401);
  harness::ChatClient client(server.endpoint());
  try {
    client.complete(std::vector<harness::Message>{{"user", "ping"}},
                    harness::GenParams{});
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(e.kind() == EndpointError::Kind::kAuth);
  }
  CHECK(server.requests() == 1);
}

TEST_CASE("chat reports an unparseable body as a malformed response") {
  testutil::MockChatServer server(
      [](const std::string&) { return "never seen"; });
  server.garble_responses(true);
  harness::ChatClient client(server.endpoint());
  try {
    client.complete(std::vector<harness::Message>{{"user", "ping"}},
                    harness::GenParams{});
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(e.kind() == EndpointError::Kind::kMalformedResponse);
  }
}

TEST_CASE("run_method produces one deterministic terminal record per instance") {
  const auto sets = build_sets(60, 41);
  const auto instances = first_instances(sets, 50);
  REQUIRE(instances.size() == 50);
  const auto index = testutil::key_index(instances);

  testutil::MockChatServer server([&](const std::string& content) {
    // Identify the instance by the final context line and echo its gold
    // strategy. Failures surface as malformed parses on the main thread.
    const corpus::TestInstance* hit = nullptr;
    for (const auto& [key, instance] : index) {
      if (content.find(key + "\n\n### ") != std::string::npos) {
        hit = instance;
        break;
      }
    }
    if (hit == nullptr) return std::string("unmatched prompt");
    return "Strategy: " + strategy_name(hit->gold_strategy) +
           "\nUtterance: a steady reply about " + hit->dialogue_id;
  });

  Method vanilla;
  harness::RunOptions options;
  options.seed = 7;
  options.now_ms = testutil::fixed_clock();
  const auto first = harness::run_method(vanilla, instances,
                                         server.endpoint(), options);
  CHECK(first.size() == 50);
  std::set<std::string> ids;
  for (const EvalRunRecord& record : first) {
    CHECK(record.terminal);
    CHECK(record.parse_status == ParseStatus::kOk);
    ids.insert(record.instance_id);
  }
  CHECK(ids.size() == 50);
  for (const auto& instance : instances) {
    CHECK(ids.count(instance.instance_id) == 1);
  }

  const auto second = harness::run_method(vanilla, instances,
                                          server.endpoint(), options);
  CHECK(records_digest(first) == records_digest(second));
}

TEST_CASE("self-refine persists the iteration artifacts") {
  const auto sets = build_sets(30, 4);
  const auto instances = first_instances(sets, 6);
  REQUIRE(instances.size() == 6);
  testutil::MockChatServer server([&](const std::string& content) {
    if (content.find("### Feedback ###") != std::string::npos &&
        content.find("Feedback :") == std::string::npos) {
      return std::string("Consider naming the emotion explicitly.");
    }
    return std::string(
        "Strategy: Reflection of feelings\nUtterance: That sounds heavy.");
  });

  Method method;
  method.kind = MethodKind::kSelfRefine;
  method.iterations = 2;
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  const auto records =
      harness::run_method(method, instances, server.endpoint(), options);
  // Per instance: 1 initial + 2 * (feedback + refine).
  CHECK(records.size() == instances.size() * 5);
  for (const auto& instance : instances) {
    int initial = 0, feedback = 0, refine = 0, terminal = 0;
    for (const EvalRunRecord& record : records) {
      if (record.instance_id != instance.instance_id) continue;
      if (record.iteration == 0) ++initial;
      if (record.phase == "feedback") ++feedback;
      if (record.phase == "refine") ++refine;
      if (record.terminal) ++terminal;
    }
    CHECK(initial == 1);
    CHECK(feedback == 2);
    CHECK(refine == 2);
    CHECK(terminal == 1);
  }
}

TEST_CASE("planner predictions pass through to the records") {
  const auto sets = build_sets(30, 4);
  const auto instances = first_instances(sets, 8);
  const auto dir = std::filesystem::temp_directory_path() / "esceval-planner";
  std::filesystem::create_directories(dir);
  const auto planner_path = dir / "planner.jsonl";
  {
    std::ofstream out(planner_path);
    for (const auto& instance : instances) {
      out << "{\"instance_id\": \"" << instance.instance_id
          << "\", \"strategy\": \"Question\"}\n";
    }
  }
  testutil::MockChatServer server([](const std::string&) {
    return std::string("Utterance: Could you tell me more about that?");
  });
  Method method;
  method.kind = MethodKind::kWithStrategyPlanner;
  method.planner_path = planner_path.string();
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  const auto records =
      harness::run_method(method, instances, server.endpoint(), options);
  CHECK(records.size() == instances.size());
  for (const EvalRunRecord& record : records) {
    CHECK(record.parsed_strategy == Strategy::kQuestion);
    CHECK(record.parse_status == ParseStatus::kOk);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("a run with an output path resumes from its terminal records") {
  const auto sets = build_sets(30, 11);
  const auto instances = first_instances(sets, 12);
  const auto index = testutil::key_index(instances);
  std::atomic<int> calls{0};
  testutil::MockChatServer server([&](const std::string&) {
    ++calls;
    return std::string("Strategy: Question\nUtterance: What happened next?");
  });
  const auto dir = std::filesystem::temp_directory_path() / "esceval-resume";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto records_path = dir / "records.jsonl";

  Method vanilla;
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  options.records_path = records_path;
  options.limit = 5;
  const auto partial =
      harness::run_method(vanilla, instances, server.endpoint(), options);
  CHECK(partial.size() == 5);
  const int calls_after_partial = calls.load();

  options.limit = -1;
  const auto full =
      harness::run_method(vanilla, instances, server.endpoint(), options);
  CHECK(full.size() == 12);
  // Only the seven missing instances hit the endpoint.
  CHECK(calls.load() - calls_after_partial == 7);
  const auto reloaded = harness::load_records(records_path);
  CHECK(records_digest(reloaded) == records_digest(full));
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid parses are re-prompted once and then recorded") {
  const auto sets = build_sets(30, 4);
  const auto instances = first_instances(sets, 3);
  std::atomic<int> calls{0};
  testutil::MockChatServer server([&](const std::string&) {
    ++calls;
    return std::string("no tags here at all");
  });
  Method vanilla;
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  const auto records =
      harness::run_method(vanilla, instances, server.endpoint(), options);
  CHECK(records.size() == 3);
  for (const EvalRunRecord& record : records) {
    CHECK(record.parse_status == ParseStatus::kMalformed);
    CHECK(record.terminal);
    CHECK(record.attempt_count == 2);  // one re-prompt
  }
  CHECK(calls.load() == 6);
}

TEST_CASE("direct-refine keeps the initial record and refines once") {
  const auto sets = build_sets(30, 4);
  const auto instances = first_instances(sets, 4);
  testutil::MockChatServer server([](const std::string& content) {
    if (content.find("### Refined response ###") != std::string::npos) {
      return std::string(
          "Strategy: Providing Suggestions\nUtterance: Maybe take a walk "
          "together.");
    }
    return std::string(
        "Strategy: Affirmation and Reassurance\nUtterance: You handled that "
        "well.");
  });
  Method method;
  method.kind = MethodKind::kDirectRefine;
  method.iterations = 1;
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  const auto records =
      harness::run_method(method, instances, server.endpoint(), options);
  CHECK(records.size() == instances.size() * 2);
  for (const EvalRunRecord& record : records) {
    if (record.iteration == 0) {
      CHECK(!record.terminal);
      CHECK(record.parsed_strategy == Strategy::kAffirmation);
    } else {
      CHECK(record.terminal);
      CHECK(record.phase == "refine");
      CHECK(record.parsed_strategy == Strategy::kSuggestions);
    }
  }
}

TEST_CASE("with-knowledge reads the inference file and prompts with it") {
  const auto sets = build_sets(30, 4);
  const auto instances = first_instances(sets, 3);
  const auto dir = std::filesystem::temp_directory_path() / "esceval-knowledge";
  std::filesystem::create_directories(dir);
  const auto knowledge_path = dir / "knowledge.jsonl";
  {
    std::ofstream out(knowledge_path);
    for (const auto& instance : instances) {
      harness::KnowledgeRecord record;
      record.instance_id = instance.instance_id;
      record.inferences = {{harness::Relation::kXNeed, "reassurance"}};
      out << harness::knowledge_to_json(record) << '\n';
    }
  }
  testutil::MockChatServer server([](const std::string& content) {
    if (content.find("The seeker needs reassurance.") == std::string::npos) {
      return std::string("knowledge block missing");
    }
    return std::string("Strategy: Information\nUtterance: Support lines exist.");
  });
  Method method;
  method.kind = MethodKind::kWithKnowledge;
  method.knowledge_path = knowledge_path.string();
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  const auto records =
      harness::run_method(method, instances, server.endpoint(), options);
  for (const EvalRunRecord& record : records) {
    CHECK(record.parse_status == ParseStatus::kOk);
    CHECK(record.parsed_strategy == Strategy::kInformation);
  }

  // A missing record is a configuration error, not a silent skip.
  Method missing = method;
  std::filesystem::remove(knowledge_path);
  {
    std::ofstream out(knowledge_path);
    out << "";
  }
  CHECK_THROWS_AS(
      harness::run_method(missing, instances, server.endpoint(), options),
      ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("example expansion defaults to four distinct-strategy examples") {
  const auto sets = build_sets(60, 21);
  const auto instances = first_instances(sets, 2);
  const auto pool = first_instances(sets, 200);
  testutil::MockChatServer server([](const std::string&) {
    return std::string("Strategy: Question\nUtterance: What happened?");
  });
  Method method;
  method.kind = MethodKind::kExampleExpansion;
  harness::RunOptions options;
  options.now_ms = testutil::fixed_clock();
  options.example_pool = pool;
  const auto records =
      harness::run_method(method, instances, server.endpoint(), options);
  for (const EvalRunRecord& record : records) {
    const std::string& prompt = record.prompt_messages[0].content;
    CHECK(prompt.find("[Example 4]") != std::string::npos);
    CHECK(prompt.find("[Example 5]") == std::string::npos);
    CHECK(record.method == "example-expansion-4shot");
  }
}

TEST_CASE("endpoint config carries generation overrides") {
  const auto config = harness::EndpointConfig::from_json(
      R"({"base_url": "http://x", "temperature": 0.2, "top_p": 0.9,
          "max_tokens": 128, "min_request_interval_ms": 5})");
  const auto params = config.gen_params();
  CHECK(params.temperature == 0.2);
  CHECK(params.top_p == 0.9);
  CHECK(params.max_tokens == 128);
  CHECK(config.min_request_interval_ms == 5);

  // Round trip through to_json.
  const auto again = harness::EndpointConfig::from_json(config.to_json());
  CHECK(again.gen_params().temperature == 0.2);
}

TEST_CASE("chat rejects out-of-range generation parameters") {
  testutil::MockChatServer server(
      [](const std::string&) { return "never reached"; });
  harness::ChatClient client(server.endpoint());
  harness::GenParams bad;
  bad.top_p = 0.0;
  CHECK_THROWS_AS(client.complete(std::vector<harness::Message>{{"user", "x"}},
                                  bad),
                  ContractViolation);
  bad = harness::GenParams{};
  bad.temperature = -0.1;
  CHECK_THROWS_AS(client.complete(std::vector<harness::Message>{{"user", "x"}},
                                  bad),
                  ContractViolation);
}

TEST_CASE("request pacing spaces calls to one endpoint") {
  testutil::MockChatServer server(
      [](const std::string&) { return "Strategy: Question\nUtterance: ok"; });
  auto config = server.endpoint();
  config.min_request_interval_ms = 40;
  harness::ChatClient client(config);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 3; ++i) {
    client.complete(std::vector<harness::Message>{{"user", "ping"}},
                    harness::GenParams{});
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  CHECK(elapsed >= 80);
}

TEST_CASE("method config round-trips") {
  Method method;
  method.kind = MethodKind::kSelfRefine;
  method.shots = 2;
  method.iterations = 3;
  const auto restored = Method::from_json(method.to_json());
  CHECK(restored.kind == MethodKind::kSelfRefine);
  CHECK(restored.shots == 2);
  CHECK(restored.iterations == 3);
  CHECK(restored.label() == "self-refine-i3");
  CHECK_THROWS_AS(Method::from_json(R"({"kind": "mystery"})"), ConfigError);
}

TEST_CASE("run records serialize and reload faithfully") {
  EvalRunRecord record;
  record.instance_id = "d0001#007";
  record.method = "vanilla-2shot";
  record.iteration = 1;
  record.phase = "refine";
  record.terminal = true;
  record.prompt_messages = {{"user", "hello\nworld"}};
  record.raw_completion = "Strategy: Question\nUtterance: And then?";
  record.parsed_strategy = Strategy::kQuestion;
  record.parsed_utterance = "And then?";
  record.parse_status = ParseStatus::kOk;
  record.latency_ms = 42;
  record.attempt_count = 2;
  const auto reloaded =
      harness::record_from_json(harness::record_to_json(record));
  CHECK(harness::record_to_json(reloaded) == harness::record_to_json(record));
}

TEST_SUITE_END();
