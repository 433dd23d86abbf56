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

#ifndef ESCEVAL_TEXTMETRICS_HPP
#define ESCEVAL_TEXTMETRICS_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace esceval::textmetrics {

// Smoothing constant substituted for zero n-gram precisions in BLEU.
inline constexpr double kSmoothingEpsilon = 1e-9;

// Token list produced only by tokenize(), so every metric sees the same
// normalization.
class TokenSequence {
 public:
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

 private:
  friend TokenSequence tokenize(std::string_view);
  TokenSequence() = default;
  std::vector<std::string> tokens_;
};

// Lowercases, splits on whitespace, and detaches punctuation as separate
// tokens; an apostrophe starts a new token that absorbs the letters after
// it ("I'm" -> [i, 'm]).
TokenSequence tokenize(std::string_view text);

// Geometric mean of clipped modified k-gram precisions for k <= n with a
// brevity penalty; zero precisions are replaced by kSmoothingEpsilon.
// Empty hypothesis scores 0. Result in [0, 1].
double bleu_n(const TokenSequence& hyp, const TokenSequence& ref, int n);

// LCS-based F-measure with beta = 1: P = LCS/|hyp|, R = LCS/|ref|,
// F = 2PR/(P+R), and 0 when P+R = 0. Result in [0, 1].
double rouge_l(const TokenSequence& hyp, const TokenSequence& ref);

// Unique n-grams across all hypotheses over total n-grams; 0 when there
// are no n-grams at all. Result in [0, 1].
double distinct_n(std::span<const TokenSequence> hyps, int n);

}  // namespace esceval::textmetrics

#endif  // ESCEVAL_TEXTMETRICS_HPP
