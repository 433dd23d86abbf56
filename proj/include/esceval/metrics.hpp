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

#ifndef ESCEVAL_METRICS_HPP
#define ESCEVAL_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esceval/strategy.hpp"

namespace esceval::metrics {

// Prediction-vs-gold count matrix: at(i, j) is the number of times
// strategy i was predicted when the gold strategy was j. Predictions that
// parsed to no strategy are tallied in invalid_count only.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n = kNumStrategies);

  int size() const { return n_; }
  std::int64_t at(int predicted, int gold) const;
  void add(int predicted, int gold, std::int64_t count = 1);
  void add_invalid(std::int64_t count = 1) { invalid_ += count; }
  std::int64_t invalid_count() const { return invalid_; }

  std::int64_t total() const;                // sum over all cells
  std::int64_t row_total(int predicted) const;
  std::int64_t column_total(int gold) const;  // gold support

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int n_;
  std::vector<std::int64_t> counts_;
  std::int64_t invalid_ = 0;
};

ConfusionMatrix confusion(std::span<const std::optional<Strategy>> preds,
                          std::span<const Strategy> golds);

// Strategy-name-keyed JSON, round-trips exactly (see docs/formats.md).
std::string confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(std::string_view json_text);

// Per-strategy F1 on a 0-100 scale; macro is their arithmetic mean. A
// strategy with zero precision+recall scores 0 and still enters the mean.
struct ProficiencyScores {
  std::vector<double> q;
  double macro = 0.0;
};

ProficiencyScores per_strategy_f1(const ConfusionMatrix& cm);

// Support-weighted mean of per-strategy F1 (support = gold column total).
// Raises NumericError when every support is zero.
double weighted_f1(const ConfusionMatrix& cm);

struct PreferenceVector {
  std::vector<double> p;            // scaled so the entries sum to size()
  int iterations_run = 0;
  double stationarity_residual = 0.0;
  // Strategies absent from both rows and columns: unidentifiable, held at
  // 1 by convention and excluded from the rescale.
  std::vector<int> unobserved;

  bool operator==(const PreferenceVector&) const = default;
};

// Bradley-Terry strengths from the confusion matrix via the iterative
// update p_i' = [sum_j w_ij p_j/(p_i+p_j)] / [sum_j w_ji/(p_i+p_j)],
// starting from all ones, normalizing by the geometric mean of the
// positive entries after every sweep. Runs at least max_iterations sweeps
// and keeps going until the max step falls below tol and the stationarity
// residual (below) falls under 1e-9, then rescales so the entries sum to
// the strategy count.
//
// Strategies never predicted but present as gold are pinned to 0 (their
// maximum-likelihood strength) and skipped by the normalization. A
// strategy whose only comparisons are wins over zero-strength opponents
// leaves the likelihood flat and is held at 1 before the final rescale
// (so a run predicting one single strategy puts all the preference mass
// there). A strategy that defeats surviving strategies without ever
// losing has no finite maximizer; such matrices raise NumericError.
//
// stationarity_residual is the largest |(1/p_i) sum_j w_ij -
// sum_j (w_ij+w_ji)/(p_i+p_j)| over strategies with p_i > 0.
PreferenceVector bt_fit(const ConfusionMatrix& cm, int max_iterations = 20,
                        double tol = 1e-10);

// Population standard deviation of the preferences. Requires a vector
// already scaled to mean about 1 (sum within 2% of the count); vectors
// rounded to two decimals qualify.
double preference_bias(std::span<const double> p);
double preference_bias(const PreferenceVector& p);

std::string preference_to_json(const PreferenceVector& p);
PreferenceVector preference_from_json(std::string_view json_text);

// Sample Pearson correlation; both vectors must have the same length
// >= 2 and neither may be constant (NumericError otherwise).
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace esceval::metrics

#endif  // ESCEVAL_METRICS_HPP
