#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "latlex/corpus.hpp"
#include "latlex/error.hpp"

namespace latlex {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const std::vector<std::string>& words, int n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i)
    ++counts[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                      words.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  return counts;
}

}  // namespace

double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs,
                     const BleuOptions& opts) {
  if (refs.empty()) throw Error(ErrorKind::InsufficientReferences, "sentence_bleu: no references");
  if (hyp.empty()) return 0.0;

  double log_precision = 0.0;
  for (int n = 1; n <= opts.max_n; ++n) {
    const NgramCounts hyp_counts = count_ngrams(hyp, n);
    NgramCounts max_ref;
    for (const auto& r : refs)
      for (const auto& [gram, c] : count_ngrams(r, n)) max_ref[gram] = std::max(max_ref[gram], c);
    int matched = 0, total = 0;
    for (const auto& [gram, c] : hyp_counts) {
      total += c;
      if (auto it = max_ref.find(gram); it != max_ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / total;
    } else {
      p = (matched + 1.0) / (total + 1.0);
    }
    log_precision += std::log(p) / opts.max_n;
  }

  // Closest reference length; ties go to the shorter reference.
  const auto c = static_cast<long>(hyp.size());
  long r = static_cast<long>(refs.front().size());
  for (const auto& ref : refs) {
    const long len = static_cast<long>(ref.size());
    if (std::labs(len - c) < std::labs(r - c) || (std::labs(len - c) == std::labs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_precision);
}

InterAnnotatorBleu inter_annotator_bleu(const std::vector<std::vector<std::string>>& groups, const BleuOptions& opts) {
  InterAnnotatorBleu out;
  double sum = 0.0;
  for (const auto& group : groups) {
    if (group.size() < 2) {
      ++out.skipped_groups;
      continue;
    }
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& text : group) tokenized.push_back(tokenize(text, false));
    for (std::size_t i = 0; i < tokenized.size(); ++i) {
      std::vector<std::vector<std::string>> refs;
      for (std::size_t j = 0; j < tokenized.size(); ++j)
        if (j != i) refs.push_back(tokenized[j]);
      sum += sentence_bleu(tokenized[i], refs, opts);
      ++out.scored;
    }
  }
  if (out.skipped_groups > 0)
    std::fprintf(stderr, "warning: inter_annotator_bleu skipped %d single-annotation groups\n", out.skipped_groups);
  if (out.scored == 0) throw Error(ErrorKind::InsufficientReferences, "no group has two or more annotations");
  out.score = 100.0 * sum / out.scored;
  return out;
}

}  // namespace latlex
