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

#ifndef ESCEVAL_STRATEGY_HPP
#define ESCEVAL_STRATEGY_HPP

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace esceval {

// The eight ESConv support strategies. The canonical names are the exact
// annotation strings used by the dataset; unknown strings are a hard error
// at parse time, never coerced to kOthers.
enum class Strategy : int {
  kQuestion = 0,
  kRestatement,
  kReflection,
  kSelfDisclosure,
  kAffirmation,
  kSuggestions,
  kInformation,
  kOthers,
};

inline constexpr int kNumStrategies = 8;

constexpr std::array<Strategy, kNumStrategies> all_strategies() {
  return {Strategy::kQuestion,       Strategy::kRestatement,
          Strategy::kReflection,     Strategy::kSelfDisclosure,
          Strategy::kAffirmation,    Strategy::kSuggestions,
          Strategy::kInformation,    Strategy::kOthers};
}

// Canonical ESConv annotation string, e.g. "Restatement or Paraphrasing".
const std::string& strategy_name(Strategy s);

// Three-letter code used in tables: Que, Res, Ref, Sel, Aff, Pro, Inf, Oth.
const std::string& strategy_code(Strategy s);

// Exact match against the canonical annotation strings.
std::optional<Strategy> strategy_from_name(std::string_view name);

// Lenient match for model output: case-insensitive, internal whitespace
// collapsed, accepts the three-letter code too.
std::optional<Strategy> strategy_from_name_lenient(std::string_view name);

// The three support stages.
enum class Stage : int {
  kExploration = 0,
  kComforting,
  kAction,
};

inline constexpr int kNumStages = 3;

const std::string& stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);

// Strategy -> stage vote table used by stage annotation. Total over all
// eight strategies; a strategy may carry no stage (casts no vote).
class StageMapping {
 public:
  // Que/Res/Ref -> Exploration, Sel/Aff -> Comforting, Pro/Inf -> Action,
  // Oth -> no vote.
  static StageMapping standard();

  std::optional<Stage> stage_of(Strategy s) const {
    return table_[static_cast<int>(s)];
  }
  void set(Strategy s, std::optional<Stage> stage) {
    table_[static_cast<int>(s)] = stage;
  }

  // Parses "Que=Exploration,Res=Exploration,...,Oth=-". Entries omitted
  // keep the standard mapping; "-" clears the vote.
  static StageMapping parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const StageMapping&) const = default;

 private:
  std::array<std::optional<Stage>, kNumStrategies> table_{};
};

}  // namespace esceval

#endif  // ESCEVAL_STRATEGY_HPP
