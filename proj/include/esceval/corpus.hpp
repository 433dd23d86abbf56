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

#ifndef ESCEVAL_CORPUS_HPP
#define ESCEVAL_CORPUS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esceval/strategy.hpp"

namespace esceval::corpus {

enum class Speaker { kSeeker, kSupporter };

// Pre-chat survey; all three fields must be non-empty in a valid dialogue.
struct SurveyBackground {
  std::string emotion_type;
  std::string problem_type;
  std::string situation;

  bool operator==(const SurveyBackground&) const = default;
};

// One utterance. Supporter turns carry a strategy, seeker turns never do.
struct Turn {
  Speaker speaker = Speaker::kSeeker;
  std::string utterance;
  std::optional<Strategy> strategy;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  SurveyBackground background;
  std::vector<Turn> turns;

  bool operator==(const Dialogue&) const = default;
};

// A sliced dialogue prefix awaiting stage annotation. The context includes
// the label turn as its final element; the label turn is a supporter turn
// and equals (gold_strategy, gold_response).
struct InstanceDraft {
  std::string instance_id;
  std::string dialogue_id;
  SurveyBackground background;
  std::vector<Turn> context;
  Strategy gold_strategy = Strategy::kOthers;
  std::string gold_response;
};

struct TestInstance {
  std::string instance_id;
  std::string dialogue_id;
  SurveyBackground background;
  std::vector<Turn> context;
  Strategy gold_strategy = Strategy::kOthers;
  std::string gold_response;
  Stage stage = Stage::kExploration;

  bool operator==(const TestInstance&) const = default;
};

struct TestSets {
  // Indexed by Stage: [0] exploration, [1] comforting, [2] action.
  std::array<std::vector<TestInstance>, kNumStages> sets;

  std::vector<TestInstance>& by_stage(Stage s) {
    return sets[static_cast<int>(s)];
  }
  const std::vector<TestInstance>& by_stage(Stage s) const {
    return sets[static_cast<int>(s)];
  }
  std::size_t total() const {
    return sets[0].size() + sets[1].size() + sets[2].size();
  }
};

struct Stats {
  std::size_t samples = 0;
  std::size_t dialogues = 0;
  double avg_turns = 0.0;
  double avg_utterance_len = 0.0;  // whitespace tokens per utterance
  std::array<double, kNumStrategies> strategy_ratio{};  // percent, sums to 100
};

// Parses the published ESConv serialization: a top-level array of dialogue
// objects holding emotion_type / problem_type / situation and a `dialog`
// list of {speaker, annotation.strategy, content}. Ids are assigned by
// input order ("d0000", "d0001", ...). Malformed JSON raises FormatError
// with the byte offset; an unknown strategy string raises FormatError
// naming the string.
std::vector<Dialogue> parse_corpus(std::string_view raw);
std::vector<Dialogue> load_corpus(const std::filesystem::path& file);

// Re-serializes in the same shape parse_corpus accepts (round-trips
// field-for-field).
std::string serialize_corpus(std::span<const Dialogue> dialogues);

// Majority stage of the `window` supporter strategies nearest the label
// turn: the label turn itself plus its closest supporter neighbors, with
// earlier turns preferred on distance ties. Strategies without a stage in
// the mapping cast no vote. Returns the unique top-voted stage, or nullopt
// on a vote tie or when no votes were cast. label_index must point at a
// supporter turn.
std::optional<Stage> annotate_stage(std::span<const Turn> turns,
                                    std::size_t label_index,
                                    const StageMapping& mapping,
                                    int window = 4);
std::optional<Stage> annotate_stage(const Dialogue& dialogue,
                                    std::size_t label_index,
                                    const StageMapping& mapping,
                                    int window = 4);

// One candidate per supporter turn that admits a cut of at least min_turns:
// the cut length is drawn uniformly in [min_turns, min(max_turns, turns
// available)] from a generator derived from (seed, dialogue id), so results
// do not depend on processing order. Dialogues too short yield an empty
// list. min_turns >= 2.
std::vector<InstanceDraft> slice_instances(const Dialogue& dialogue,
                                           std::uint64_t seed,
                                           int min_turns = 5,
                                           int max_turns = 15);

// Stage-partitioned test-set construction: dialogues are shuffled with the
// seed and split into three near-equal pools (one per stage); candidates
// sliced from a pool's dialogues join that pool's set only when their
// annotated stage (computed on the candidate's own context) matches the
// pool's stage. Gold-Others candidates are admitted only while the set's
// Others ratio stays within others_cap, in admission order. Deterministic
// given (corpus, seed, mapping, others_cap).
TestSets build_test_sets(std::span<const Dialogue> corpus, std::uint64_t seed,
                         const StageMapping& mapping,
                         double others_cap = 0.05);

Stats corpus_stats(std::span<const TestInstance> instances);

// Line-delimited instance records; field names are fixed in
// docs/formats.md and covered by round-trip tests.
std::string instance_to_json(const TestInstance& instance);
TestInstance instance_from_json(std::string_view json_text);

// d1.jsonl / d2.jsonl / d3.jsonl under `dir`.
void save_test_sets(const TestSets& sets, const std::filesystem::path& dir);
TestSets load_test_sets(const std::filesystem::path& dir);

}  // namespace esceval::corpus

#endif  // ESCEVAL_CORPUS_HPP
