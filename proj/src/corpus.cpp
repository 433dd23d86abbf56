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

#include "esceval/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "esceval/errors.hpp"
#include "esceval/rng.hpp"

namespace esceval::corpus {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string dialogue_id_for(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "d%04zu", index);
  return buf;
}

std::string instance_id_for(const std::string& dialogue_id,
                            std::size_t label_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%03zu", label_index);
  return dialogue_id + buf;
}

Turn parse_turn(const json& turn_json, const std::string& dialogue_id,
                std::size_t turn_index) {
  const auto where = [&] {
    return dialogue_id + " turn " + std::to_string(turn_index);
  };
  if (!turn_json.is_object() || !turn_json.contains("speaker") ||
      !turn_json.contains("content")) {
    throw FormatError("dialog entry missing speaker/content at " + where());
  }
  Turn turn;
  const std::string speaker = turn_json.at("speaker").get<std::string>();
  if (speaker == "seeker") {
    turn.speaker = Speaker::kSeeker;
  } else if (speaker == "supporter") {
    turn.speaker = Speaker::kSupporter;
  } else {
    throw FormatError("unknown speaker \"" + speaker + "\" at " + where());
  }
  turn.utterance = turn_json.at("content").get<std::string>();
  if (turn.speaker == Speaker::kSupporter) {
    if (!turn_json.contains("annotation") ||
        !turn_json.at("annotation").contains("strategy")) {
      throw FormatError("supporter turn without strategy at " + where());
    }
    const std::string name =
        turn_json.at("annotation").at("strategy").get<std::string>();
    auto strategy = strategy_from_name(name);
    if (!strategy) {
      throw FormatError("unknown strategy string \"" + name + "\" at " +
                        where());
    }
    turn.strategy = *strategy;
  }
  return turn;
}

// Supporter-turn indices of `turns`, nearest to label_index first; equal
// distances order the earlier turn first.
std::vector<std::size_t> supporters_by_distance(std::span<const Turn> turns,
                                                std::size_t label_index) {
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].speaker == Speaker::kSupporter) indices.push_back(i);
  }
  std::stable_sort(indices.begin(), indices.end(),
                   [&](std::size_t a, std::size_t b) {
                     auto dist = [&](std::size_t i) {
                       return i > label_index ? i - label_index
                                              : label_index - i;
                     };
                     if (dist(a) != dist(b)) return dist(a) < dist(b);
                     return a < b;
                   });
  return indices;
}

std::size_t count_tokens(const std::string& text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

json turn_to_json(const Turn& turn) {
  json out;
  out["speaker"] = turn.speaker == Speaker::kSeeker ? "seeker" : "supporter";
  out["utterance"] = turn.utterance;
  if (turn.strategy) out["strategy"] = strategy_name(*turn.strategy);
  return out;
}

Turn turn_from_json(const json& in) {
  Turn turn;
  const std::string speaker = in.at("speaker").get<std::string>();
  if (speaker == "seeker") {
    turn.speaker = Speaker::kSeeker;
  } else if (speaker == "supporter") {
    turn.speaker = Speaker::kSupporter;
  } else {
    throw FormatError("unknown speaker in instance record: " + speaker);
  }
  turn.utterance = in.at("utterance").get<std::string>();
  if (in.contains("strategy")) {
    auto s = strategy_from_name(in.at("strategy").get<std::string>());
    if (!s) {
      throw FormatError("unknown strategy in instance record: " +
                        in.at("strategy").get<std::string>());
    }
    turn.strategy = *s;
  }
  return turn;
}

const char* set_file_name(Stage stage) {
  switch (stage) {
    case Stage::kExploration: return "d1.jsonl";
    case Stage::kComforting: return "d2.jsonl";
    case Stage::kAction: return "d3.jsonl";
  }
  return "d1.jsonl";
}

}  // namespace

std::vector<Dialogue> parse_corpus(std::string_view raw) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw FormatError("corpus parse error at byte " + std::to_string(e.byte) +
                      ": " + e.what());
  }
  if (!doc.is_array()) {
    throw FormatError("corpus must be a top-level array of dialogues");
  }
  std::vector<Dialogue> dialogues;
  dialogues.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& entry = doc[i];
    Dialogue d;
    d.id = dialogue_id_for(i);
    for (const char* field : {"emotion_type", "problem_type", "situation"}) {
      if (!entry.contains(field) || !entry[field].is_string() ||
          entry[field].get<std::string>().empty()) {
        throw FormatError("dialogue " + d.id + " missing field " + field);
      }
    }
    d.background.emotion_type = entry["emotion_type"].get<std::string>();
    d.background.problem_type = entry["problem_type"].get<std::string>();
    d.background.situation = entry["situation"].get<std::string>();
    if (!entry.contains("dialog") || !entry["dialog"].is_array() ||
        entry["dialog"].empty()) {
      throw FormatError("dialogue " + d.id + " has no dialog turns");
    }
    std::size_t turn_index = 0;
    for (const json& turn_json : entry["dialog"]) {
      d.turns.push_back(parse_turn(turn_json, d.id, turn_index++));
    }
    dialogues.push_back(std::move(d));
  }
  return dialogues;
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& file) {
  return parse_corpus(read_file(file));
}

std::string serialize_corpus(std::span<const Dialogue> dialogues) {
  json doc = json::array();
  for (const Dialogue& d : dialogues) {
    json entry;
    entry["emotion_type"] = d.background.emotion_type;
    entry["problem_type"] = d.background.problem_type;
    entry["situation"] = d.background.situation;
    json dialog = json::array();
    for (const Turn& turn : d.turns) {
      json t;
      t["speaker"] =
          turn.speaker == Speaker::kSeeker ? "seeker" : "supporter";
      t["annotation"] = json::object();
      if (turn.strategy) {
        t["annotation"]["strategy"] = strategy_name(*turn.strategy);
      }
      t["content"] = turn.utterance;
      dialog.push_back(std::move(t));
    }
    entry["dialog"] = std::move(dialog);
    doc.push_back(std::move(entry));
  }
  return doc.dump(2);
}

std::optional<Stage> annotate_stage(std::span<const Turn> turns,
                                    std::size_t label_index,
                                    const StageMapping& mapping, int window) {
  if (label_index >= turns.size() ||
      turns[label_index].speaker != Speaker::kSupporter) {
    throw ContractViolation("annotate_stage: label_index is not a supporter turn");
  }
  const auto ordered = supporters_by_distance(turns, label_index);
  std::array<int, kNumStages> votes{};
  int taken = 0;
  for (std::size_t idx : ordered) {
    if (taken == window) break;
    if (!turns[idx].strategy) continue;
    ++taken;
    auto stage = mapping.stage_of(*turns[idx].strategy);
    if (stage) ++votes[static_cast<int>(*stage)];
  }
  int best = 0, best_count = 0, runner_up = 0;
  for (int i = 0; i < kNumStages; ++i) {
    if (votes[i] > best_count) {
      runner_up = best_count;
      best_count = votes[i];
      best = i;
    } else if (votes[i] > runner_up) {
      runner_up = votes[i];
    }
  }
  if (best_count == 0 || best_count == runner_up) return std::nullopt;
  return static_cast<Stage>(best);
}

std::optional<Stage> annotate_stage(const Dialogue& dialogue,
                                    std::size_t label_index,
                                    const StageMapping& mapping, int window) {
  return annotate_stage(std::span<const Turn>(dialogue.turns), label_index,
                        mapping, window);
}

std::vector<InstanceDraft> slice_instances(const Dialogue& dialogue,
                                           std::uint64_t seed, int min_turns,
                                           int max_turns) {
  if (min_turns < 2) {
    throw ContractViolation("slice_instances: min_turns must be >= 2");
  }
  if (max_turns < min_turns) {
    throw ContractViolation("slice_instances: max_turns < min_turns");
  }
  Rng rng(derive_seed(seed, dialogue.id));
  std::vector<InstanceDraft> drafts;
  for (std::size_t label = 0; label < dialogue.turns.size(); ++label) {
    const Turn& turn = dialogue.turns[label];
    if (turn.speaker != Speaker::kSupporter) continue;
    const int available = static_cast<int>(label) + 1;
    if (available < min_turns) continue;
    const int length =
        static_cast<int>(rng.range(min_turns, std::min(max_turns, available)));
    InstanceDraft draft;
    draft.dialogue_id = dialogue.id;
    draft.instance_id = instance_id_for(dialogue.id, label);
    draft.background = dialogue.background;
    draft.context.assign(dialogue.turns.begin() + (label + 1 - length),
                         dialogue.turns.begin() + (label + 1));
    draft.gold_strategy = *turn.strategy;
    draft.gold_response = turn.utterance;
    drafts.push_back(std::move(draft));
  }
  return drafts;
}

TestSets build_test_sets(std::span<const Dialogue> corpus, std::uint64_t seed,
                         const StageMapping& mapping, double others_cap) {
  if (others_cap < 0.0 || others_cap > 1.0) {
    throw ContractViolation("build_test_sets: others_cap outside [0,1]");
  }
  TestSets out;
  if (corpus.empty()) return out;

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "pool-partition"));
  rng.shuffle(order);

  // Near-equal pool sizes; the remainder goes to the earlier stages.
  const std::size_t base = corpus.size() / kNumStages;
  const std::size_t extra = corpus.size() % kNumStages;
  std::array<std::vector<std::size_t>, kNumStages> pools;
  std::size_t cursor = 0;
  for (int s = 0; s < kNumStages; ++s) {
    std::size_t size = base + (static_cast<std::size_t>(s) < extra ? 1 : 0);
    pools[s].assign(order.begin() + cursor, order.begin() + cursor + size);
    std::sort(pools[s].begin(), pools[s].end());
    cursor += size;
  }

  for (int s = 0; s < kNumStages; ++s) {
    const Stage stage = static_cast<Stage>(s);
    auto& set = out.sets[s];
    std::size_t oth_count = 0;
    for (std::size_t dialogue_index : pools[s]) {
      const Dialogue& dialogue = corpus[dialogue_index];
      for (InstanceDraft& draft : slice_instances(dialogue, seed)) {
        auto annotated = annotate_stage(
            std::span<const Turn>(draft.context), draft.context.size() - 1,
            mapping);
        if (annotated != stage) continue;  // mismatch: instance excluded
        if (draft.gold_strategy == Strategy::kOthers) {
          const double ratio = static_cast<double>(oth_count + 1) /
                               static_cast<double>(set.size() + 1);
          if (ratio > others_cap) continue;
          ++oth_count;
        }
        TestInstance instance;
        instance.instance_id = std::move(draft.instance_id);
        instance.dialogue_id = std::move(draft.dialogue_id);
        instance.background = std::move(draft.background);
        instance.context = std::move(draft.context);
        instance.gold_strategy = draft.gold_strategy;
        instance.gold_response = std::move(draft.gold_response);
        instance.stage = stage;
        set.push_back(std::move(instance));
      }
    }
  }
  return out;
}

Stats corpus_stats(std::span<const TestInstance> instances) {
  Stats stats;
  stats.samples = instances.size();
  if (instances.empty()) return stats;
  std::set<std::string> dialogue_ids;
  std::array<std::size_t, kNumStrategies> strategy_counts{};
  std::size_t turn_total = 0, utterance_count = 0, token_total = 0;
  for (const TestInstance& instance : instances) {
    dialogue_ids.insert(instance.dialogue_id);
    ++strategy_counts[static_cast<int>(instance.gold_strategy)];
    turn_total += instance.context.size();
    for (const Turn& turn : instance.context) {
      ++utterance_count;
      token_total += count_tokens(turn.utterance);
    }
  }
  stats.dialogues = dialogue_ids.size();
  stats.avg_turns =
      static_cast<double>(turn_total) / static_cast<double>(instances.size());
  stats.avg_utterance_len = static_cast<double>(token_total) /
                            static_cast<double>(utterance_count);
  for (int i = 0; i < kNumStrategies; ++i) {
    stats.strategy_ratio[i] = 100.0 * static_cast<double>(strategy_counts[i]) /
                              static_cast<double>(instances.size());
  }
  return stats;
}

std::string instance_to_json(const TestInstance& instance) {
  json out;
  out["instance_id"] = instance.instance_id;
  out["dialogue_id"] = instance.dialogue_id;
  out["stage"] = stage_name(instance.stage);
  out["gold_strategy"] = strategy_name(instance.gold_strategy);
  out["gold_response"] = instance.gold_response;
  out["background"] = {
      {"emotion_type", instance.background.emotion_type},
      {"problem_type", instance.background.problem_type},
      {"situation", instance.background.situation},
  };
  json context = json::array();
  for (const Turn& turn : instance.context) context.push_back(turn_to_json(turn));
  out["context"] = std::move(context);
  return out.dump();
}

TestInstance instance_from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("instance record parse error: ") + e.what());
  }
  TestInstance instance;
  try {
    instance.instance_id = in.at("instance_id").get<std::string>();
    instance.dialogue_id = in.at("dialogue_id").get<std::string>();
    auto stage = stage_from_name(in.at("stage").get<std::string>());
    if (!stage) {
      throw FormatError("unknown stage in instance record: " +
                        in.at("stage").get<std::string>());
    }
    instance.stage = *stage;
    auto gold = strategy_from_name(in.at("gold_strategy").get<std::string>());
    if (!gold) {
      throw FormatError("unknown strategy in instance record: " +
                        in.at("gold_strategy").get<std::string>());
    }
    instance.gold_strategy = *gold;
    instance.gold_response = in.at("gold_response").get<std::string>();
    const json& bg = in.at("background");
    instance.background.emotion_type = bg.at("emotion_type").get<std::string>();
    instance.background.problem_type = bg.at("problem_type").get<std::string>();
    instance.background.situation = bg.at("situation").get<std::string>();
    for (const json& turn_json : in.at("context")) {
      instance.context.push_back(turn_from_json(turn_json));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad instance record: ") + e.what());
  }
  return instance;
}

void save_test_sets(const TestSets& sets, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int s = 0; s < kNumStages; ++s) {
    const auto path = dir / set_file_name(static_cast<Stage>(s));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const TestInstance& instance : sets.sets[s]) {
      out << instance_to_json(instance) << '\n';
    }
  }
}

TestSets load_test_sets(const std::filesystem::path& dir) {
  TestSets sets;
  for (int s = 0; s < kNumStages; ++s) {
    const auto path = dir / set_file_name(static_cast<Stage>(s));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      sets.sets[s].push_back(instance_from_json(line));
    }
  }
  return sets;
}

}  // namespace esceval::corpus
