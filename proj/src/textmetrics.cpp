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

#include "esceval/textmetrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "esceval/errors.hpp"

namespace esceval::textmetrics {
namespace {

bool is_word_char(unsigned char c) {
  // Bytes >= 0x80 (multi-byte UTF-8) group with word characters.
  return std::isalnum(c) || c >= 0x80;
}

using Ngram = std::vector<std::string_view>;

// Counts of each n-gram in the sequence.
std::map<Ngram, int> ngram_counts(const TokenSequence& seq, int n) {
  std::map<Ngram, int> counts;
  const auto& tokens = seq.tokens();
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
    Ngram gram;
    gram.reserve(n);
    for (int k = 0; k < n; ++k) gram.emplace_back(tokens[start + k]);
    ++counts[gram];
  }
  return counts;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence seq;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) {
      seq.tokens_.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'') {
      flush();
      current.push_back('\'');
    } else {
      flush();
      seq.tokens_.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return seq;
}

double bleu_n(const TokenSequence& hyp, const TokenSequence& ref, int n) {
  if (n < 1) throw ContractViolation("bleu_n: n must be >= 1");
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto hyp_counts = ngram_counts(hyp, k);
    const auto ref_counts = ngram_counts(ref, k);
    std::int64_t clipped = 0, total = 0;
    for (const auto& [gram, count] : hyp_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    const double precision =
        (total > 0 && clipped > 0)
            ? static_cast<double>(clipped) / static_cast<double>(total)
            : kSmoothingEpsilon;
    log_sum += std::log(precision);
  }
  const double hyp_len = static_cast<double>(hyp.size());
  const double ref_len = static_cast<double>(ref.size());
  const double brevity =
      hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return brevity * std::exp(log_sum / n);
}

double rouge_l(const TokenSequence& hyp, const TokenSequence& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto& a = hyp.tokens();
  const auto& b = ref.tokens();
  std::vector<std::size_t> prev(b.size() + 1, 0), row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      row[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], row[j - 1]);
    }
    std::swap(prev, row);
  }
  const double lcs = static_cast<double>(prev[b.size()]);
  const double precision = lcs / static_cast<double>(a.size());
  const double recall = lcs / static_cast<double>(b.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double distinct_n(std::span<const TokenSequence> hyps, int n) {
  if (n < 1) throw ContractViolation("distinct_n: n must be >= 1");
  std::set<Ngram> unique;
  std::int64_t total = 0;
  for (const TokenSequence& hyp : hyps) {
    for (const auto& [gram, count] : ngram_counts(hyp, n)) {
      unique.insert(gram);
      total += count;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

}  // namespace esceval::textmetrics
