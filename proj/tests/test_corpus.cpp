#include <doctest.h>

#include <cmath>
#include <set>

#include "latlex/corpus.hpp"
#include "latlex/error.hpp"

using namespace latlex;

namespace {

std::vector<SignedToken> clean_text(const std::string& text) {
  RawAnnotation r;
  r.direction_id = "d";
  r.text = text;
  return clean(r, Lexicon::bundled()).tokens;
}

std::vector<std::string> words(const std::string& s) { return tokenize(s, false); }

}  // namespace

TEST_CASE("levenshtein distances") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("tree", "tree") == 0);
  CHECK(levenshtein_bounded("kitten", "sitting", 2) == 3);
  CHECK(levenshtein_bounded("bulding", "building", 2) == 1);
}

TEST_CASE("spell correction") {
  const auto& lex = Lexicon::bundled();
  CHECK(spell_correct("tree", lex) == "tree");
  CHECK(spell_correct("bulding", lex) == "building");
  CHECK(spell_correct("xqzv", lex) == "xqzv");
  // No dictionary word lies within distance 2 of the uncorrected token.
  for (const auto& w : lex.words()) CHECK_FALSE(levenshtein_bounded("xqzv", w, 2) <= 2);
}

TEST_CASE("lemmatizer") {
  const auto& lex = Lexicon::bundled();
  CHECK(lemmatize("trees", lex) == "tree");
  CHECK(lemmatize("appliances", lex) == "appliance");
  CHECK(lemmatize("leaves", lex) == "leaf");
  CHECK(lemmatize("people", lex) == "people");
  CHECK(lemmatize("darker", lex) == "darker");
  CHECK(lemmatize("fading", lex) == "fade");
  Lexicon stripping = lex;
  stripping.strip_comparatives = true;
  CHECK(lemmatize("darker", stripping) == "dark");
}

TEST_CASE("cleaning assigns clause-scoped signs") {
  CHECK(clean_text("less green, more trees") == std::vector<SignedToken>{{"green", -1}, {"tree", +1}});
  CHECK(clean_text("the image is darker") == std::vector<SignedToken>{{"darker", +1}});
  CHECK(clean_text("snow is removed and sky appears") == std::vector<SignedToken>{{"snow", -1}, {"sky", +1}});
  CHECK(clean_text("Less   SNOW!!") == std::vector<SignedToken>{{"snow", -1}});
  CHECK(clean_text("more trees, more tree") == std::vector<SignedToken>{{"tree", +1}});
  CHECK_THROWS_AS(clean_text("no change"), Error);
  CHECK_THROWS_AS(clean_text(""), Error);
}

TEST_CASE("typos are repaired inside cleaning") {
  CHECK(clean_text("more bulding") == std::vector<SignedToken>{{"building", +1}});
}

TEST_CASE("cleaning is idempotent on its own output") {
  for (const char* t : {"less green, more trees", "snow is removed and sky appears", "more light and less water"}) {
    const auto once = clean_text(t);
    CHECK(clean_text(to_text(once)) == once);
  }
}

TEST_CASE("more and less give opposite signs for content words") {
  const auto& lex = Lexicon::bundled();
  int checked = 0;
  for (std::size_t i = 0; i < 300; ++i) {
    const auto& w = lex.words()[i];
    std::vector<SignedToken> up, down;
    bool up_ok = true, down_ok = true;
    try { up = clean_text("more " + w); } catch (const Error&) { up_ok = false; }
    try { down = clean_text("less " + w); } catch (const Error&) { down_ok = false; }
    REQUIRE(up_ok == down_ok);
    if (!up_ok) continue;
    REQUIRE(up.size() == down.size());
    for (std::size_t k = 0; k < up.size(); ++k) {
      CHECK(up[k].token == down[k].token);
      CHECK(up[k].sign == -down[k].sign);
    }
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("tokenizer keeps intra-word hyphen and ampersand") {
  CHECK(words("Goes-from black&white, to COLOR.") ==
        std::vector<std::string>{"goes-from", "black&white", "to", "color"});
  CHECK(tokenize("a, b; c", true) == std::vector<std::string>{"a", ",", "b", ",", "c"});
  CHECK(valid_token("tree"));
  CHECK_FALSE(valid_token(""));
}

TEST_CASE("corpus statistics") {
  CleanedAnnotation a{"d1", "x", "lake", {{"a", +1}}};
  auto s = corpus_statistics({a});
  CHECK(s.overall.distinct == 1);
  CHECK(s.overall.repeated == 0);
  CHECK(s.per_class["lake"].unique_to_class == 1);

  CleanedAnnotation b{"d2", "x", "lake", {{"blue", +1}}};
  CleanedAnnotation c{"d3", "x", "city", {{"blue", -1}, {"road", +1}}};
  s = corpus_statistics({a, b, c});
  CHECK(s.overall.distinct == 3);
  CHECK(s.overall.repeated == 1);
  CHECK(s.per_class["lake"].unique_to_class == 1);
  CHECK(s.per_class["city"].unique_to_class == 1);
  CHECK(s.annotations == 3);
  CHECK_THROWS_AS(corpus_statistics({}), Error);
}

TEST_CASE("n-gram diversity") {
  CHECK(ngram_diversity({"a b", "a b"}, 2) == 1);
  CHECK(ngram_diversity({"a b c"}, 3) == 1);
  CHECK(ngram_diversity({"a b c"}, 1) == 3);
  CHECK(ngram_diversity({"A, b!"}, 1) == 2);
  const std::vector<std::string> texts = {"more trees and less snow", "less snow", "the sky is brighter"};
  std::set<std::string> bigrams;
  for (const auto& t : texts) {
    const auto w = words(t);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) bigrams.insert(w[i] + " " + w[i + 1]);
  }
  CHECK(ngram_diversity(texts, 2) == bigrams.size());
  auto more = texts;
  more.push_back("more snow");
  CHECK(ngram_diversity(more, 2) >= ngram_diversity(texts, 2));
}

TEST_CASE("sentence bleu") {
  const std::vector<std::string> s = {"more", "trees", "and", "less", "snow"};
  CHECK(sentence_bleu(s, {s}) == doctest::Approx(1.0));
  CHECK(sentence_bleu({"a", "b", "c"}, {{"x", "y", "z"}}) < 0.1);
  // Two-sentence case by hand: unigrams 3/4, bigrams (1+1)/(3+1), trigrams (0+1)/(2+1), 4-grams (0+1)/(1+1).
  const std::vector<std::string> h = {"the", "sky", "is", "blue"}, r = {"the", "sky", "was", "blue"};
  const double expect = std::exp((std::log(0.75) + std::log(0.5) + std::log(1.0 / 3.0) + std::log(0.5)) / 4.0);
  CHECK(sentence_bleu(h, {r}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("inter-annotator bleu") {
  auto same = inter_annotator_bleu({{"more light", "more light", "more light"}});
  CHECK(same.score >= 95.0);
  auto disjoint = inter_annotator_bleu({{"alpha beta", "gamma delta"}});
  CHECK(disjoint.score < 10.0);
  auto skipped = inter_annotator_bleu({{"x y"}, {"a b", "a b"}});
  CHECK(skipped.skipped_groups == 1);
  CHECK(skipped.scored == 2);
  CHECK_THROWS_AS(inter_annotator_bleu({{"only one"}}), Error);
}
