#pragma once

// Annotation data model, normalization of freeform descriptions into signed
// concept tokens, and corpus-level statistics.

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace latlex {

struct RawAnnotation {
  std::string direction_id;
  std::string annotator_id;
  std::string class_name;
  double alpha = 6.0;
  std::string text;
};

struct SignedToken {
  std::string token;
  int sign = +1;

  bool operator==(const SignedToken&) const = default;
};

struct CleanedAnnotation {
  std::string direction_id;
  std::string annotator_id;
  std::string class_name;
  std::vector<SignedToken> tokens;
};

class Lexicon {
 public:
  /// Reads dictionary.txt, lemma_exceptions.tsv, silent_e.txt, stopwords.txt,
  /// positive_modifiers.txt and negative_modifiers.txt from dir.
  static Lexicon load(const std::filesystem::path& dir);

  /// The lexicon bundled under data/lexicon.
  static const Lexicon& bundled();

  /// Builds a lexicon from in-memory lists; dictionary order is frequency rank.
  static Lexicon from_lists(std::vector<std::string> dictionary,
                            std::vector<std::pair<std::string, std::string>> exceptions,
                            std::vector<std::string> stopwords, std::vector<std::string> positive,
                            std::vector<std::string> negative, std::vector<std::string> silent_e = {});

  bool in_dictionary(const std::string& w) const { return rank_.count(w) != 0; }
  /// 0 is the most frequent word. Throws if w is not in the dictionary.
  int rank(const std::string& w) const { return rank_.at(w); }
  const std::vector<std::string>& words() const { return words_; }
  const std::unordered_set<std::string>& word_set() const { return word_set_; }
  bool is_stopword(const std::string& w) const { return stopwords_.count(w) != 0; }
  bool is_positive(const std::string& w) const { return positive_.count(w) != 0; }
  bool is_negative(const std::string& w) const { return negative_.count(w) != 0; }
  const std::unordered_map<std::string, std::string>& exceptions() const { return exceptions_; }
  /// Stems that take back a final "e" when "-ing" is removed ("shin" → "shine").
  bool restores_silent_e(const std::string& stem) const { return silent_e_.count(stem) != 0; }
  const std::unordered_set<std::string>& positive_modifiers() const { return positive_; }
  const std::unordered_set<std::string>& negative_modifiers() const { return negative_; }

  /// When set, "-er"/"-est" are stripped from words whose stem is a dictionary word.
  bool strip_comparatives = false;

 private:
  void index();

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> rank_;
  std::unordered_set<std::string> word_set_;
  std::unordered_map<std::string, std::string> exceptions_;
  std::unordered_set<std::string> silent_e_;
  std::unordered_set<std::string> stopwords_;
  std::unordered_set<std::string> positive_;
  std::unordered_set<std::string> negative_;
};

/// Plain Levenshtein distance (unit insert/delete/substitute).
int levenshtein(const std::string& a, const std::string& b);

/// Levenshtein distance, or bound + 1 as soon as it provably exceeds bound.
int levenshtein_bounded(const std::string& a, const std::string& b, int bound);

/// Dictionary words pass through. Otherwise the closest dictionary word at
/// distance ≤ 2 (ties: better rank, then lexicographic); else the input.
std::string spell_correct(const std::string& token, const Lexicon& lexicon);

std::string lemmatize(const std::string& token, const Lexicon& lexicon);

/// Lowercase, split into words; punctuation other than intra-word '-' and '&'
/// is dropped. Clause punctuation (, ; . ! ? :) is returned as the token ",".
std::vector<std::string> tokenize(const std::string& text, bool keep_clause_marks);

bool valid_token(const std::string& t);

/// Full normalization pipeline. Throws EmptyResult when nothing survives.
CleanedAnnotation clean(const RawAnnotation& raw, const Lexicon& lexicon);

/// "more a, less b": a text that cleans back to the same tokens.
std::string to_text(const std::vector<SignedToken>& tokens);

struct ClassCounts {
  int distinct = 0;
  int repeated = 0;
  int unique_to_class = 0;
};

struct CorpusStatistics {
  std::map<std::string, ClassCounts> per_class;
  ClassCounts overall;
  int annotations = 0;
};

/// Token occurrence counts per class (an annotation counts each token once,
/// sign ignored).
CorpusStatistics corpus_statistics(const std::vector<CleanedAnnotation>& corpus);

/// Distinct word n-grams across normalized raw texts.
std::size_t ngram_diversity(const std::vector<std::string>& texts, int n);

struct BleuOptions {
  int max_n = 4;
};

/// Sentence BLEU of hypothesis against references, in [0, 1]: uniform
/// weights, add-one smoothing for n ≥ 2, brevity penalty against the
/// closest reference length.
double sentence_bleu(const std::vector<std::string>& hypothesis,
                     const std::vector<std::vector<std::string>>& references, const BleuOptions& opts = {});

struct InterAnnotatorBleu {
  double score = 0.0;  // mean sentence BLEU × 100
  int scored = 0;
  int skipped_groups = 0;
};

/// Each annotation is scored against the other annotations of its group;
/// singleton groups are skipped. Throws InsufficientReferences if none remain.
InterAnnotatorBleu inter_annotator_bleu(const std::vector<std::vector<std::string>>& groups,
                                        const BleuOptions& opts = {});

}  // namespace latlex
