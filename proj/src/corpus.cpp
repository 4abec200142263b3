#include "latlex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "latlex/error.hpp"

namespace latlex {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read lexicon file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

Lexicon Lexicon::from_lists(std::vector<std::string> dictionary,
                            std::vector<std::pair<std::string, std::string>> exceptions,
                            std::vector<std::string> stopwords, std::vector<std::string> positive,
                            std::vector<std::string> negative, std::vector<std::string> silent_e) {
  Lexicon lex;
  lex.words_ = std::move(dictionary);
  for (auto& [form, lemma] : exceptions) lex.exceptions_[form] = lemma;
  lex.stopwords_.insert(stopwords.begin(), stopwords.end());
  lex.positive_.insert(positive.begin(), positive.end());
  lex.negative_.insert(negative.begin(), negative.end());
  lex.silent_e_.insert(silent_e.begin(), silent_e.end());
  lex.index();
  return lex;
}

void Lexicon::index() {
  rank_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) rank_.emplace(words_[i], static_cast<int>(i));
  word_set_ = std::unordered_set<std::string>(words_.begin(), words_.end());
  for (const auto& w : positive_)
    if (negative_.count(w)) throw Error(ErrorKind::InvalidConfig, "modifier listed as both positive and negative: " + w);
  auto check_lower = [](const std::string& w) {
    for (unsigned char c : w)
      if (std::isupper(c)) throw Error(ErrorKind::InvalidConfig, "lexicon entries must be lowercase: " + w);
  };
  for (const auto& w : words_) check_lower(w);
  for (const auto& w : stopwords_) check_lower(w);
}

Lexicon Lexicon::load(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> exceptions;
  for (const auto& line : read_lines(dir / "lemma_exceptions.tsv")) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::Parse, "lemma exception without tab: " + line);
    exceptions.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  std::vector<std::string> silent_e;
  if (std::filesystem::exists(dir / "silent_e.txt")) silent_e = read_lines(dir / "silent_e.txt");
  return from_lists(read_lines(dir / "dictionary.txt"), std::move(exceptions), read_lines(dir / "stopwords.txt"),
                    read_lines(dir / "positive_modifiers.txt"), read_lines(dir / "negative_modifiers.txt"),
                    std::move(silent_e));
}

const Lexicon& Lexicon::bundled() {
  static const Lexicon lex = load(std::filesystem::path(LATLEX_DATA_DIR) / "lexicon");
  return lex;
}

int levenshtein_bounded(const std::string& a, const std::string& b, int bound) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  if (std::abs(n - m) > bound) return bound + 1;
  std::vector<int> prev(m + 1), cur(m + 1);
  for (int j = 0; j <= m; ++j) prev[j] = j;
  for (int i = 1; i <= n; ++i) {
    cur[0] = i;
    int row_min = cur[0];
    for (int j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > bound) return bound + 1;
    std::swap(prev, cur);
  }
  return std::min(prev[m], bound + 1);
}

int levenshtein(const std::string& a, const std::string& b) {
  return levenshtein_bounded(a, b, static_cast<int>(std::max(a.size(), b.size())));
}

std::string spell_correct(const std::string& token, const Lexicon& lexicon) {
  if (token.empty() || lexicon.in_dictionary(token)) return token;
  constexpr int kMaxDistance = 2;
  const std::string* best = nullptr;
  int best_distance = kMaxDistance + 1;
  // Dictionary order is rank order, so the first word found at a given
  // distance already wins the rank tie-break.
  for (const auto& w : lexicon.words()) {
    const int d = levenshtein_bounded(token, w, best_distance);
    if (d < best_distance) {
      best_distance = d;
      best = &w;
    }
  }
  return best ? *best : token;
}

std::string lemmatize(const std::string& token, const Lexicon& lexicon) {
  if (const auto it = lexicon.exceptions().find(token); it != lexicon.exceptions().end()) return it->second;

  auto accept = [&](const std::string& stem) { return stem.size() >= 2 && lexicon.in_dictionary(stem); };
  auto strip = [&](std::size_t n) { return token.substr(0, token.size() - n); };

  if (ends_with(token, "ies") && accept(strip(3) + "y")) return strip(3) + "y";
  if (ends_with(token, "es") && accept(strip(2))) return strip(2);
  if (ends_with(token, "s") && !ends_with(token, "ss") && accept(strip(1))) return strip(1);

  auto strip_with_restoration = [&](std::size_t n, std::string& out) {
    const std::string stem = strip(n);
    if (stem.size() < 2) return false;
    if (lexicon.restores_silent_e(stem) && accept(stem + "e")) {
      out = stem + "e";
      return true;
    }
    if (accept(stem)) {
      out = stem;
      return true;
    }
    if (accept(stem + "e")) {
      out = stem + "e";
      return true;
    }
    // Doubled final consonant: "running" → "run".
    if (stem.size() >= 3 && stem.back() == stem[stem.size() - 2] && !is_vowel(stem.back()) &&
        accept(stem.substr(0, stem.size() - 1))) {
      out = stem.substr(0, stem.size() - 1);
      return true;
    }
    return false;
  };

  std::string out;
  if (ends_with(token, "ing") && strip_with_restoration(3, out)) return out;
  if (lexicon.strip_comparatives) {
    if (ends_with(token, "est") && strip_with_restoration(3, out)) return out;
    if (ends_with(token, "er") && strip_with_restoration(2, out)) return out;
  }
  return token;
}

std::vector<std::string> tokenize(const std::string& text, bool keep_clause_marks) {
  std::vector<std::string> out;
  std::string cur;
  auto is_word = [](unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  auto flush = [&] {
    while (!cur.empty() && (cur.back() == '-' || cur.back() == '&')) cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c < 128) c = static_cast<unsigned char>(std::tolower(c));
    if (is_word(c)) {
      cur.push_back(static_cast<char>(c));
    } else if ((c == '-' || c == '&') && !cur.empty() && is_word(static_cast<unsigned char>(cur.back())) &&
               i + 1 < text.size() && is_word(static_cast<unsigned char>(std::tolower(text[i + 1])))) {
      cur.push_back(static_cast<char>(c));
    } else if (c == '\'' && !cur.empty()) {
      // apostrophes are dropped inside words ("tree's" → "trees")
    } else {
      flush();
      if (keep_clause_marks && (c == ',' || c == ';' || c == '.' || c == '!' || c == '?' || c == ':'))
        if (out.empty() || out.back() != ",") out.push_back(",");
    }
  }
  flush();
  return out;
}

bool valid_token(const std::string& t) {
  if (t.empty() || t[0] < 'a' || t[0] > 'z') return false;
  return std::all_of(t.begin(), t.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '&' || c == '-';
  });
}

namespace {

enum class ItemKind { Boundary, Modifier, Content };

struct Item {
  ItemKind kind;
  int sign = +1;
  std::string token;
};

int modifier_sign(const std::string& w, const Lexicon& lexicon) {
  if (lexicon.is_positive(w)) return +1;
  if (lexicon.is_negative(w)) return -1;
  return 0;
}

}  // namespace

CleanedAnnotation clean(const RawAnnotation& raw, const Lexicon& lexicon) {
  CleanedAnnotation out;
  out.direction_id = raw.direction_id;
  out.annotator_id = raw.annotator_id;
  out.class_name = raw.class_name;

  std::vector<std::string> words = tokenize(raw.text, true);
  // Multiword modifiers are stored hyphenated ("goes-from").
  std::vector<std::string> merged;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i + 1 < words.size() && words[i] != "," && words[i + 1] != ",") {
      const std::string joined = words[i] + "-" + words[i + 1];
      if (modifier_sign(joined, lexicon) != 0) {
        merged.push_back(joined);
        ++i;
        continue;
      }
    }
    merged.push_back(words[i]);
  }

  std::vector<Item> items;
  for (const auto& w : merged) {
    if (w == ",") {
      items.push_back({ItemKind::Boundary, +1, {}});
      continue;
    }
    if (int s = modifier_sign(w, lexicon)) {
      items.push_back({ItemKind::Modifier, s, {}});
      continue;
    }
    const std::string corrected = spell_correct(w, lexicon);
    if (corrected == "and" || corrected == "but") {
      items.push_back({ItemKind::Boundary, +1, {}});
      continue;
    }
    if (int s = modifier_sign(corrected, lexicon)) {
      items.push_back({ItemKind::Modifier, s, {}});
      continue;
    }
    const std::string lemma = lemmatize(corrected, lexicon);
    if (int s = modifier_sign(lemma, lexicon)) {
      items.push_back({ItemKind::Modifier, s, {}});
      continue;
    }
    if (lexicon.is_stopword(corrected) || lexicon.is_stopword(lemma) || !valid_token(lemma)) continue;
    items.push_back({ItemKind::Content, +1, lemma});
  }

  // Within a clause, content takes the sign of the closest preceding
  // modifier; content ahead of the clause's first modifier takes that
  // modifier's sign ("window is removed"). No modifier means +1.
  std::vector<SignedToken> signed_tokens;
  std::size_t start = 0;
  while (start < items.size()) {
    std::size_t end = start;
    while (end < items.size() && items[end].kind != ItemKind::Boundary) ++end;
    int leading = +1;
    for (std::size_t i = start; i < end; ++i)
      if (items[i].kind == ItemKind::Modifier) {
        leading = items[i].sign;
        break;
      }
    int current = leading;
    for (std::size_t i = start; i < end; ++i) {
      if (items[i].kind == ItemKind::Modifier) current = items[i].sign;
      if (items[i].kind == ItemKind::Content) signed_tokens.push_back({items[i].token, current});
    }
    start = end + 1;
  }

  std::unordered_set<std::string> seen;
  for (auto& t : signed_tokens)
    if (seen.insert(t.token).second) out.tokens.push_back(std::move(t));
  if (out.tokens.empty()) throw Error(ErrorKind::EmptyResult, "no content tokens in annotation of " + raw.direction_id);
  return out;
}

std::string to_text(const std::vector<SignedToken>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ", ";
    s += tokens[i].sign > 0 ? "more " : "less ";
    s += tokens[i].token;
  }
  return s;
}

CorpusStatistics corpus_statistics(const std::vector<CleanedAnnotation>& corpus) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyResult, "corpus_statistics: empty corpus");
  std::map<std::string, std::map<std::string, int>> per_class;  // class → token → count
  std::map<std::string, int> overall;
  std::map<std::string, std::set<std::string>> classes_of;
  for (const auto& a : corpus) {
    std::set<std::string> seen;
    for (const auto& t : a.tokens) {
      if (!seen.insert(t.token).second) continue;
      ++per_class[a.class_name][t.token];
      ++overall[t.token];
      classes_of[t.token].insert(a.class_name);
    }
    per_class.try_emplace(a.class_name);
  }
  CorpusStatistics stats;
  stats.annotations = static_cast<int>(corpus.size());
  for (const auto& [cls, counts] : per_class) {
    ClassCounts c;
    for (const auto& [tok, n] : counts) {
      ++c.distinct;
      if (n > 1) ++c.repeated;
      if (classes_of[tok].size() == 1) ++c.unique_to_class;
    }
    stats.per_class[cls] = c;
  }
  for (const auto& [tok, n] : overall) {
    ++stats.overall.distinct;
    if (n > 1) ++stats.overall.repeated;
    if (classes_of[tok].size() == 1) ++stats.overall.unique_to_class;
  }
  return stats;
}

std::size_t ngram_diversity(const std::vector<std::string>& texts, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidConfig, "ngram order must be positive");
  std::set<std::vector<std::string>> grams;
  for (const auto& text : texts) {
    const auto words = tokenize(text, false);
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i)
      grams.emplace(words.begin() + static_cast<std::ptrdiff_t>(i),
                    words.begin() + static_cast<std::ptrdiff_t>(i) + n);
  }
  return grams.size();
}

}  // namespace latlex
