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

#include "esceval/strategy.hpp"

#include <algorithm>
#include <cctype>

#include "esceval/errors.hpp"

namespace esceval {
namespace {

const std::array<std::string, kNumStrategies> kStrategyNames = {
    "Question",
    "Restatement or Paraphrasing",
    "Reflection of feelings",
    "Self-disclosure",
    "Affirmation and Reassurance",
    "Providing Suggestions",
    "Information",
    "Others",
};

const std::array<std::string, kNumStrategies> kStrategyCodes = {
    "Que", "Res", "Ref", "Sel", "Aff", "Pro", "Inf", "Oth",
};

const std::array<std::string, kNumStages> kStageNames = {
    "Exploration",
    "Comforting",
    "Action",
};

// Lowercases and collapses runs of whitespace to single spaces.
std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

const std::string& strategy_name(Strategy s) {
  return kStrategyNames[static_cast<int>(s)];
}

const std::string& strategy_code(Strategy s) {
  return kStrategyCodes[static_cast<int>(s)];
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  for (Strategy s : all_strategies()) {
    if (name == strategy_name(s)) return s;
  }
  return std::nullopt;
}

std::optional<Strategy> strategy_from_name_lenient(std::string_view name) {
  const std::string norm = normalize(name);
  for (Strategy s : all_strategies()) {
    if (norm == normalize(strategy_name(s))) return s;
    if (norm == normalize(strategy_code(s))) return s;
  }
  return std::nullopt;
}

const std::string& stage_name(Stage s) {
  return kStageNames[static_cast<int>(s)];
}

std::optional<Stage> stage_from_name(std::string_view name) {
  for (int i = 0; i < kNumStages; ++i) {
    if (name == kStageNames[i]) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

StageMapping StageMapping::standard() {
  StageMapping m;
  m.set(Strategy::kQuestion, Stage::kExploration);
  m.set(Strategy::kRestatement, Stage::kExploration);
  m.set(Strategy::kReflection, Stage::kExploration);
  m.set(Strategy::kSelfDisclosure, Stage::kComforting);
  m.set(Strategy::kAffirmation, Stage::kComforting);
  m.set(Strategy::kSuggestions, Stage::kAction);
  m.set(Strategy::kInformation, Stage::kAction);
  m.set(Strategy::kOthers, std::nullopt);
  return m;
}

StageMapping StageMapping::parse(std::string_view text) {
  StageMapping m = standard();
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view entry = text.substr(pos, end - pos);
    pos = end + 1;
    if (entry.empty()) continue;
    std::size_t eq = entry.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("stage mapping entry missing '=': " +
                        std::string(entry));
    }
    auto strat = strategy_from_name_lenient(entry.substr(0, eq));
    if (!strat) {
      throw ConfigError("unknown strategy in stage mapping: " +
                        std::string(entry.substr(0, eq)));
    }
    std::string_view stage_text = entry.substr(eq + 1);
    if (stage_text == "-" || stage_text == "none") {
      m.set(*strat, std::nullopt);
      continue;
    }
    auto stage = stage_from_name(stage_text);
    if (!stage) {
      throw ConfigError("unknown stage in stage mapping: " +
                        std::string(stage_text));
    }
    m.set(*strat, stage);
  }
  return m;
}

std::string StageMapping::to_string() const {
  std::string out;
  for (Strategy s : all_strategies()) {
    if (!out.empty()) out += ',';
    out += strategy_code(s);
    out += '=';
    auto stage = stage_of(s);
    out += stage ? stage_name(*stage) : "-";
  }
  return out;
}

}  // namespace esceval
