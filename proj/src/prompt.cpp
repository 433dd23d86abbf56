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
//
// Prompt assembly, few-shot example selection, and completion parsing.

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "esceval/errors.hpp"
#include "esceval/harness.hpp"
#include "esceval/rng.hpp"

namespace esceval::harness {
namespace {

constexpr char kStrategyDescriptions[] =
    "The strategy should be chosen from the following 8 types of strategy:\n"
    "- Question: Asking for information related to the problem to help the "
    "help-seeker articulate the issues that they face. Open-ended questions "
    "are best, and closed questions can be used to get specific "
    "information.\n"
    "- Restatement or Paraphrasing: A simple, more concise rephrasing of the "
    "help-seeker's statements that could help them see their situation more "
    "clearly.\n"
    "- Reflection of Feelings: Articulate and describe the help-seeker's "
    "feelings.\n"
    "- Self-disclosure: Divulge similar experiences that you have had or "
    "emotions that you share with the help-seeker to express your empathy.\n"
    "- Affirmation and Reassurance: Affirm the help seeker's strengths, "
    "motivation, and capabilities and provide reassurance and "
    "encouragement.\n"
    "- Providing Suggestions: Provide suggestions about how to change, but "
    "be careful to not overstep and tell them what to do.\n"
    "- Information: Provide useful information to the help-seeker, for "
    "example with data, facts, opinions, resources, or by answering "
    "questions.\n"
    "- Others: Exchange pleasantries and use other support strategies that "
    "do not fall into the above categories.";

constexpr char kTaskVanilla[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker. Your task is to make the next response based on the given "
    "dialogue context.";

constexpr char kTaskDirectRefine[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker, as well as a response written by a language model from the "
    "perspective of the supporter, including strategy and utterance. Your "
    "task is to refine the model's response (i.e., Strategy and Utterance) "
    "based on the given dialogue context.";

constexpr char kTaskSelfRefineFeedback[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker, as well as a response written by a language model from the "
    "perspective of the supporter, including strategy and utterance. Your "
    "task is to feedback for the model response (i.e., Strategy and "
    "Utterance) based on the given dialogue context.";

constexpr char kTaskSelfRefineRefine[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker, as well as a response written by a language model from the "
    "perspective of the supporter, including strategy and utterance. Your "
    "task is to refine the model response (i.e., Strategy and Utterance) "
    "based on the given dialogue context and feedback of the model "
    "response.";

constexpr char kTaskWithKnowledge[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker, and a commonsense knowledge from external model. Your task is "
    "to generate a response for the supporter based on the dialogue context "
    "and commonsense knowledge, you should ignore the commonsense knowledge "
    "if it mislead the next response.";

constexpr char kTaskEmotionalCot[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker. Your task is to first describe the seeker's current state "
    "based on the given dialogue context, and then make the next response "
    "based on the given dialogue context and the seeker's state.";

constexpr char kTaskWithPlanner[] =
    "You will be provided with a dialogue context between a supporter and "
    "seeker, as well as a strategy for the next response. Your task is to "
    "make the next response based on the given dialogue context and the "
    "given strategy.";

std::string trim(std::string_view text) {
  std::size_t begin = 0, end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin])))
    ++begin;
  while (end > begin &&
         std::isspace(static_cast<unsigned char>(text[end - 1])))
    --end;
  return std::string(text.substr(begin, end - begin));
}

std::string render_background(const corpus::SurveyBackground& bg) {
  return "The following is a conversation between a supporter and a seeker "
         "about " +
         bg.emotion_type + " regarding a/an " + bg.problem_type +
         ". The seeker says \"" + bg.situation + "\".";
}

std::string render_context(std::span<const corpus::Turn> turns) {
  std::string out;
  for (const corpus::Turn& turn : turns) {
    out += turn.speaker == corpus::Speaker::kSeeker ? "seeker: " : "supporter: ";
    out += trim(turn.utterance);
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

// Turns shown to the model: everything before the final (gold) turn.
std::span<const corpus::Turn> visible_context(
    const corpus::TestInstance& instance) {
  if (instance.context.empty()) {
    throw ContractViolation("prompt: instance has an empty context");
  }
  return {instance.context.data(), instance.context.size() - 1};
}

std::string render_example(const corpus::TestInstance& example, int number) {
  std::span<const corpus::Turn> shown = visible_context(example);
  std::string out = "[Example " + std::to_string(number) + "]\n\n";
  out += "### Dialogue background ###\n";
  out += render_background(example.background);
  out += "\n\n### Dialogue context ###\n";
  out += render_context(shown);
  out += "\n\n### Model's response ###\n";
  out += "Strategy: " + strategy_name(example.gold_strategy) + "\n";
  out += "Utterance: " + trim(example.gold_response);
  return out;
}

std::string render_knowledge(const KnowledgeRecord& knowledge) {
  std::string out;
  for (const auto& [relation, text] : knowledge.inferences) {
    switch (relation) {
      case Relation::kXReact: out += "The seeker feels " + text + "."; break;
      case Relation::kXIntent: out += "The seeker intends " + text + "."; break;
      case Relation::kXNeed: out += "The seeker needs " + text + "."; break;
      case Relation::kXEffect: out += "As a result, " + text + "."; break;
      case Relation::kXWant: out += "The seeker wants " + text + "."; break;
    }
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string prior_block(const RefinePrior& prior) {
  return "### Model's response ###\nStrategy: " +
         strategy_name(prior.strategy) + "\nUtterance: " + prior.utterance;
}

const char* task_description(const Method& method, PromptPhase phase) {
  switch (phase) {
    case PromptPhase::kFeedback:
      return kTaskSelfRefineFeedback;
    case PromptPhase::kRefine:
      return method.kind == MethodKind::kSelfRefine ? kTaskSelfRefineRefine
                                                    : kTaskDirectRefine;
    case PromptPhase::kInitial:
      break;
  }
  switch (method.kind) {
    case MethodKind::kWithKnowledge: return kTaskWithKnowledge;
    case MethodKind::kEmotionalCot: return kTaskEmotionalCot;
    case MethodKind::kWithStrategyPlanner: return kTaskWithPlanner;
    default: return kTaskVanilla;
  }
}

// Key-prefixed line such as "Strategy: ..." with brackets and markdown
// clutter around the key tolerated; returns the raw remainder.
std::optional<std::string> value_of_line(std::string_view line,
                                         std::string_view key) {
  std::size_t pos = 0;
  const auto skip_clutter = [&] {
    while (pos < line.size()) {
      const char c = line[pos];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '[' ||
          c == ']' || c == '(' || c == ')' || c == '{' || c == '}' ||
          c == '<' || c == '>' || c == '*' || c == '"' || c == '\'' ||
          c == '`' || c == '#' || c == '-') {
        ++pos;
      } else {
        break;
      }
    }
  };
  skip_clutter();
  if (line.size() - pos < key.size()) return std::nullopt;
  for (std::size_t k = 0; k < key.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(line[pos + k])) !=
        std::tolower(static_cast<unsigned char>(key[k]))) {
      return std::nullopt;
    }
  }
  pos += key.size();
  skip_clutter();
  if (pos >= line.size() || line[pos] != ':') return std::nullopt;
  ++pos;
  return std::string(line.substr(pos));
}

std::string strip_wrapping(std::string value) {
  value = trim(value);
  while (value.size() >= 2) {
    const char first = value.front(), last = value.back();
    const bool wrapped = (first == '[' && last == ']') ||
                         (first == '(' && last == ')') ||
                         (first == '"' && last == '"') ||
                         (first == '*' && last == '*');
    if (!wrapped) break;
    value = trim(value.substr(1, value.size() - 2));
  }
  return value;
}

}  // namespace

std::string Method::label() const {
  switch (kind) {
    case MethodKind::kVanilla:
      return "vanilla-" + std::to_string(shots) + "shot";
    case MethodKind::kDirectRefine:
      return "direct-refine-i" + std::to_string(iterations);
    case MethodKind::kSelfRefine:
      return "self-refine-i" + std::to_string(iterations);
    case MethodKind::kEmotionalCot:
      return "emotional-cot";
    case MethodKind::kWithKnowledge:
      return "with-knowledge";
    case MethodKind::kExampleExpansion:
      return "example-expansion-" + std::to_string(shots > 0 ? shots : 4) +
             "shot";
    case MethodKind::kWithStrategyPlanner:
      return "with-planner";
  }
  return "unknown";
}

std::vector<corpus::TestInstance> select_examples(
    std::span<const corpus::TestInstance> pool, int n, std::uint64_t seed) {
  if (n < 0) throw ContractViolation("select_examples: n must be >= 0");
  if (n == 0) return {};
  std::array<std::vector<const corpus::TestInstance*>, kNumStrategies> groups;
  for (const corpus::TestInstance& instance : pool) {
    groups[static_cast<int>(instance.gold_strategy)].push_back(&instance);
  }
  std::vector<int> present;
  for (int s = 0; s < kNumStrategies; ++s) {
    if (!groups[s].empty()) present.push_back(s);
  }
  const int needed = std::min(n, kNumStrategies);
  if (static_cast<int>(present.size()) < needed) {
    throw ConfigError("select_examples: pool offers " +
                      std::to_string(present.size()) +
                      " distinct gold strategies, need " +
                      std::to_string(needed));
  }
  Rng rng(seed);
  std::vector<corpus::TestInstance> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    // One pass over a fresh shuffle of the strategies gives each of the
    // eight before any repeats.
    std::vector<int> order = present;
    rng.shuffle(order);
    for (int s : order) {
      if (static_cast<int>(out.size()) == n) break;
      const auto& group = groups[s];
      out.push_back(*group[rng.below(group.size())]);
    }
  }
  return out;
}

std::vector<Message> build_prompt(
    const Method& method, PromptPhase phase,
    const corpus::TestInstance& instance,
    std::span<const corpus::TestInstance> examples,
    const KnowledgeRecord* knowledge, const RefinePrior* prior,
    std::optional<Strategy> planner_strategy) {
  const bool is_refine_method = method.kind == MethodKind::kDirectRefine ||
                                method.kind == MethodKind::kSelfRefine;
  if (phase != PromptPhase::kInitial && !is_refine_method) {
    throw ContractViolation("build_prompt: phase requires a refine method");
  }
  if (phase != PromptPhase::kInitial && prior == nullptr) {
    throw ContractViolation("build_prompt: refine phases need the prior turn");
  }
  if (method.kind == MethodKind::kWithKnowledge &&
      phase == PromptPhase::kInitial && knowledge == nullptr) {
    throw ContractViolation("build_prompt: knowledge record required");
  }
  if (knowledge != nullptr && method.kind != MethodKind::kWithKnowledge) {
    throw ContractViolation("build_prompt: knowledge given to another method");
  }
  if (method.kind == MethodKind::kWithStrategyPlanner &&
      phase == PromptPhase::kInitial && !planner_strategy) {
    throw ContractViolation("build_prompt: planner strategy required");
  }
  if (phase == PromptPhase::kRefine && method.kind == MethodKind::kSelfRefine &&
      !prior->feedback) {
    throw ContractViolation(
        "build_prompt: self-refine revision needs the feedback text");
  }

  std::string body = task_description(method, phase);
  body += "\n\n";
  body += kStrategyDescriptions;
  body += "\n\n";
  for (std::size_t k = 0; k < examples.size(); ++k) {
    body += render_example(examples[k], static_cast<int>(k) + 1);
    body += "\n\n";
  }
  body += "### Dialogue background ###\n";
  body += render_background(instance.background);
  body += "\n\n### Dialogue context ###\n";
  body += render_context(visible_context(instance));
  body += "\n\n";

  switch (phase) {
    case PromptPhase::kFeedback:
      body += prior_block(*prior);
      body += "\n\n### Feedback ###";
      break;
    case PromptPhase::kRefine:
      body += prior_block(*prior);
      if (method.kind == MethodKind::kSelfRefine) {
        body += "\n\n### Feedback ###\nFeedback : " + *prior->feedback;
      }
      body += "\n\n### Refined response ###";
      break;
    case PromptPhase::kInitial:
      switch (method.kind) {
        case MethodKind::kWithKnowledge:
          body += "### Commonsense knowledge ###\n";
          body += render_knowledge(*knowledge);
          body += "\n\n### Model's response ###";
          break;
        case MethodKind::kEmotionalCot:
          body += "### Seeker's state and model's response ###";
          break;
        case MethodKind::kWithStrategyPlanner:
          body += "### Model's response ###\nStrategy: " +
                  strategy_name(*planner_strategy) + "\nUtterance:";
          break;
        default:
          body += "### Model's response ###";
          break;
      }
      break;
  }
  return {Message{"user", std::move(body)}};
}

ParsedResponse parse_response(std::string_view completion) {
  ParsedResponse parsed;
  std::optional<std::string> strategy_value;
  std::optional<std::string> utterance_value;
  std::size_t pos = 0;
  bool expecting_utterance_text = false;
  while (pos <= completion.size()) {
    std::size_t eol = completion.find('\n', pos);
    if (eol == std::string_view::npos) eol = completion.size();
    std::string_view line = completion.substr(pos, eol - pos);
    pos = eol + 1;
    if (expecting_utterance_text) {
      // "Utterance:" with the text on the following line.
      if (!trim(line).empty()) {
        utterance_value = trim(line);
        expecting_utterance_text = false;
      }
      continue;
    }
    if (!strategy_value) {
      if (auto value = value_of_line(line, "strategy")) {
        strategy_value = strip_wrapping(*value);
        continue;
      }
    }
    if (!utterance_value) {
      if (auto value = value_of_line(line, "utterance")) {
        std::string text = trim(*value);
        if (text.empty()) {
          expecting_utterance_text = true;
        } else {
          utterance_value = std::move(text);
        }
      }
    }
    if (eol == completion.size()) break;
  }

  if (utterance_value && !utterance_value->empty()) {
    parsed.utterance = *utterance_value;
  }
  if (strategy_value) {
    std::string name = *strategy_value;
    if (!name.empty() && name.back() == '.') name.pop_back();
    parsed.strategy = strategy_from_name_lenient(name);
  }
  if (!strategy_value || !parsed.utterance) {
    parsed.status = ParseStatus::kMalformed;
    parsed.strategy.reset();
  } else if (!parsed.strategy) {
    parsed.status = ParseStatus::kInvalidStrategy;
  } else {
    parsed.status = ParseStatus::kOk;
  }
  return parsed;
}

}  // namespace esceval::harness
