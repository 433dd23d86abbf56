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

#include "esceval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "esceval/errors.hpp"

namespace esceval::metrics {
namespace {

using nlohmann::json;

constexpr int kHardIterationCap = 10000;

enum class EntryState { kLive, kPinnedZero, kIsolated, kUnobserved };

// Largest Zermelo stationarity gap over entries with p_i > 0:
// (1/p_i) sum_j w_ij - sum_j (w_ij + w_ji)/(p_i + p_j).
double max_residual(const ConfusionMatrix& cm,
                    const std::vector<double>& p,
                    const std::vector<EntryState>& state) {
  const int n = cm.size();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    if (state[i] != EntryState::kLive) continue;
    double win_term = 0.0, pair_term = 0.0;
    for (int j = 0; j < n; ++j) {
      win_term += static_cast<double>(cm.at(i, j));
      const double denom = p[i] + p[j];
      if (denom > 0.0) {
        pair_term += static_cast<double>(cm.at(i, j) + cm.at(j, i)) / denom;
      }
    }
    worst = std::max(worst, std::abs(win_term / p[i] - pair_term));
  }
  return worst;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int n) : n_(n) {
  if (n <= 0) throw ContractViolation("ConfusionMatrix: size must be positive");
  counts_.assign(static_cast<std::size_t>(n) * n, 0);
}

std::int64_t ConfusionMatrix::at(int predicted, int gold) const {
  if (predicted < 0 || predicted >= n_ || gold < 0 || gold >= n_) {
    throw ContractViolation("ConfusionMatrix: index out of range");
  }
  return counts_[static_cast<std::size_t>(predicted) * n_ + gold];
}

void ConfusionMatrix::add(int predicted, int gold, std::int64_t count) {
  if (predicted < 0 || predicted >= n_ || gold < 0 || gold >= n_) {
    throw ContractViolation("ConfusionMatrix: index out of range");
  }
  if (count < 0) throw ContractViolation("ConfusionMatrix: negative count");
  counts_[static_cast<std::size_t>(predicted) * n_ + gold] += count;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (std::int64_t c : counts_) sum += c;
  return sum;
}

std::int64_t ConfusionMatrix::row_total(int predicted) const {
  std::int64_t sum = 0;
  for (int j = 0; j < n_; ++j) sum += at(predicted, j);
  return sum;
}

std::int64_t ConfusionMatrix::column_total(int gold) const {
  std::int64_t sum = 0;
  for (int i = 0; i < n_; ++i) sum += at(i, gold);
  return sum;
}

ConfusionMatrix confusion(std::span<const std::optional<Strategy>> preds,
                          std::span<const Strategy> golds) {
  if (preds.size() != golds.size()) {
    throw ContractViolation("confusion: preds and golds differ in length");
  }
  ConfusionMatrix cm(kNumStrategies);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (!preds[k]) {
      cm.add_invalid();
      continue;
    }
    cm.add(static_cast<int>(*preds[k]), static_cast<int>(golds[k]));
  }
  return cm;
}

ProficiencyScores per_strategy_f1(const ConfusionMatrix& cm) {
  const int n = cm.size();
  ProficiencyScores scores;
  scores.q.resize(n, 0.0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::int64_t hits = cm.at(i, i);
    const std::int64_t row = cm.row_total(i);
    const std::int64_t col = cm.column_total(i);
    const double precision = row > 0 ? static_cast<double>(hits) / row : 0.0;
    const double recall = col > 0 ? static_cast<double>(hits) / col : 0.0;
    const double denom = precision + recall;
    scores.q[i] = denom > 0.0 ? 100.0 * 2.0 * precision * recall / denom : 0.0;
    sum += scores.q[i];
  }
  scores.macro = sum / n;
  return scores;
}

double weighted_f1(const ConfusionMatrix& cm) {
  const ProficiencyScores scores = per_strategy_f1(cm);
  double weighted = 0.0;
  std::int64_t support_total = 0;
  for (int i = 0; i < cm.size(); ++i) {
    const std::int64_t support = cm.column_total(i);
    weighted += static_cast<double>(support) * scores.q[i];
    support_total += support;
  }
  if (support_total == 0) {
    throw NumericError("weighted_f1: every gold support is zero");
  }
  return weighted / static_cast<double>(support_total);
}

PreferenceVector bt_fit(const ConfusionMatrix& cm, int max_iterations,
                        double tol) {
  const int n = cm.size();
  if (cm.total() == 0) {
    throw ContractViolation("bt_fit: matrix has no counts");
  }

  // Off-diagonal wins and losses identify the strengths; self-predictions
  // (diagonal) contribute a constant factor to the likelihood.
  std::vector<EntryState> state(n, EntryState::kLive);
  for (int i = 0; i < n; ++i) {
    if (cm.row_total(i) == 0 && cm.column_total(i) == 0) {
      state[i] = EntryState::kUnobserved;
    }
  }
  // A strategy whose every off-diagonal win is against a zero-strength
  // opponent, while it has losses, is itself driven to zero; iterate the
  // pinning until stable.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      if (state[i] != EntryState::kLive) continue;
      std::int64_t live_wins = 0, losses = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        if (state[j] != EntryState::kPinnedZero) live_wins += cm.at(i, j);
        losses += cm.at(j, i);
      }
      if (live_wins == 0 && losses > 0) {
        state[i] = EntryState::kPinnedZero;
        changed = true;
      }
    }
  }
  // Remaining entries either carry informative comparisons against other
  // surviving strategies, or only wins over zero-strength opponents: the
  // latter leave the likelihood flat (isolated, held at 1 and rescaled).
  // An entry that beats surviving opponents without ever losing has an
  // unbounded maximum-likelihood strength.
  for (int i = 0; i < n; ++i) {
    if (state[i] != EntryState::kLive) continue;
    std::int64_t live_wins = 0, live_losses = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i || state[j] == EntryState::kPinnedZero) continue;
      live_wins += cm.at(i, j);
      live_losses += cm.at(j, i);
    }
    if (live_wins > 0 && live_losses == 0) {
      throw NumericError(
          "bt_fit: strategy " + std::to_string(i) +
          " defeats surviving strategies without ever losing; its "
          "maximum-likelihood strength is unbounded");
    }
    if (live_wins == 0 && live_losses == 0 && cm.at(i, i) == 0) {
      state[i] = EntryState::kIsolated;
    }
  }

  PreferenceVector result;
  std::vector<double>& p = result.p;
  p.assign(n, 1.0);
  std::vector<int> live;
  for (int i = 0; i < n; ++i) {
    switch (state[i]) {
      case EntryState::kLive: live.push_back(i); break;
      case EntryState::kPinnedZero: p[i] = 0.0; break;
      case EntryState::kIsolated: break;  // stays 1, joins the rescale
      case EntryState::kUnobserved: result.unobserved.push_back(i); break;
    }
  }

  int sweeps = 0;
  double delta = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  // The step-size test alone can stop an order of magnitude short of the
  // stationarity the invariants promise, so the residual gates too.
  const double residual_target = std::max(1e-9, tol * 10.0);
  while (!live.empty() && sweeps < kHardIterationCap) {
    ++sweeps;
    delta = 0.0;
    // In-place sweep: each entry is updated with the freshest values.
    // Simultaneous updates are known to oscillate on small matrices.
    for (int i : live) {
      double numerator = 0.0, denominator = 0.0;
      for (int j = 0; j < n; ++j) {
        const double pair = p[i] + p[j];
        if (pair <= 0.0) continue;
        numerator += static_cast<double>(cm.at(i, j)) * p[j] / pair;
        denominator += static_cast<double>(cm.at(j, i)) / pair;
      }
      const double updated = numerator / denominator;
      delta = std::max(delta, std::abs(updated - p[i]));
      p[i] = updated;
    }
    // Geometric-mean gauge over the positive entries.
    double log_sum = 0.0;
    for (int i : live) log_sum += std::log(p[i]);
    const double gm = std::exp(log_sum / static_cast<double>(live.size()));
    for (int i : live) p[i] /= gm;

    residual = max_residual(cm, p, state);
    if (sweeps >= max_iterations && delta < tol && residual < residual_target) {
      break;
    }
  }
  result.iterations_run = sweeps;

  // Rescale so the full vector sums to n, with unobserved entries held at
  // their conventional 1.
  const auto scalable = [&](int i) {
    return state[i] == EntryState::kLive || state[i] == EntryState::kIsolated;
  };
  double positive_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (scalable(i)) positive_sum += p[i];
  }
  const double target =
      static_cast<double>(n - static_cast<int>(result.unobserved.size()));
  if (positive_sum > 0.0) {
    const double scale = target / positive_sum;
    for (int i = 0; i < n; ++i) {
      if (scalable(i)) p[i] *= scale;
    }
  }
  result.stationarity_residual = max_residual(cm, p, state);
  return result;
}

double preference_bias(std::span<const double> p) {
  const std::size_t n = p.size();
  if (n == 0) throw ContractViolation("preference_bias: empty vector");
  double sum = 0.0;
  for (double v : p) sum += v;
  const double expected = static_cast<double>(n);
  if (std::abs(sum - expected) > 0.02 * expected) {
    throw ContractViolation(
        "preference_bias: vector is not scaled to sum to the strategy count");
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : p) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n));
}

double preference_bias(const PreferenceVector& p) {
  return preference_bias(std::span<const double>(p.p));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ContractViolation("pearson: vectors must have equal length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw NumericError("pearson: correlation undefined for a constant vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string confusion_to_json(const ConfusionMatrix& cm) {
  if (cm.size() != kNumStrategies) {
    throw ContractViolation("confusion_to_json: expected 8 strategies");
  }
  json out;
  json names = json::array();
  for (Strategy s : all_strategies()) names.push_back(strategy_name(s));
  out["strategies"] = std::move(names);
  json counts = json::object();
  for (Strategy pred : all_strategies()) {
    json row = json::object();
    for (Strategy gold : all_strategies()) {
      row[strategy_name(gold)] =
          cm.at(static_cast<int>(pred), static_cast<int>(gold));
    }
    counts[strategy_name(pred)] = std::move(row);
  }
  out["counts"] = std::move(counts);
  out["invalid_count"] = cm.invalid_count();
  return out.dump();
}

ConfusionMatrix confusion_from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("confusion matrix parse error: ") + e.what());
  }
  ConfusionMatrix cm(kNumStrategies);
  try {
    const json& counts = in.at("counts");
    for (Strategy pred : all_strategies()) {
      const json& row = counts.at(strategy_name(pred));
      for (Strategy gold : all_strategies()) {
        cm.add(static_cast<int>(pred), static_cast<int>(gold),
               row.at(strategy_name(gold)).get<std::int64_t>());
      }
    }
    cm.add_invalid(in.value("invalid_count", std::int64_t{0}));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad confusion matrix record: ") + e.what());
  }
  return cm;
}

std::string preference_to_json(const PreferenceVector& p) {
  if (p.p.size() != kNumStrategies) {
    throw ContractViolation("preference_to_json: expected 8 strategies");
  }
  json out;
  json prefs = json::object();
  for (Strategy s : all_strategies()) {
    prefs[strategy_name(s)] = p.p[static_cast<int>(s)];
  }
  out["preferences"] = std::move(prefs);
  out["iterations_run"] = p.iterations_run;
  out["stationarity_residual"] = p.stationarity_residual;
  json unobserved = json::array();
  for (int i : p.unobserved) {
    unobserved.push_back(strategy_name(static_cast<Strategy>(i)));
  }
  out["unobserved"] = std::move(unobserved);
  return out.dump();
}

PreferenceVector preference_from_json(std::string_view json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("preference vector parse error: ") +
                      e.what());
  }
  PreferenceVector out;
  try {
    out.p.resize(kNumStrategies, 0.0);
    const json& prefs = in.at("preferences");
    for (Strategy s : all_strategies()) {
      out.p[static_cast<int>(s)] = prefs.at(strategy_name(s)).get<double>();
    }
    out.iterations_run = in.at("iterations_run").get<int>();
    out.stationarity_residual = in.at("stationarity_residual").get<double>();
    for (const json& name : in.at("unobserved")) {
      auto s = strategy_from_name(name.get<std::string>());
      if (!s) {
        throw FormatError("unknown strategy in preference vector: " +
                          name.get<std::string>());
      }
      out.unobserved.push_back(static_cast<int>(*s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad preference vector record: ") +
                      e.what());
  }
  return out;
}

}  // namespace esceval::metrics
