#include <doctest.h>

#include <algorithm>

#include "latlex/eval.hpp"

using namespace latlex;

namespace {

SyntheticWorld flat_world(bool all_visible) {
  WorldConfig c;
  c.epsilon = 0.0;
  if (all_visible) c.class_mask.assign(8, std::vector<bool>(4, true));
  return SyntheticWorld::build(c);
}

// The planted directions themselves, posing as a distilled vocabulary.
ConceptVocabulary planted_vocab(const SyntheticWorld& w, int count = 8) {
  ConceptVocabulary v;
  v.tokens.assign(w.concept_tokens().begin(), w.concept_tokens().begin() + count);
  v.embedding = w.planted().topRows(count);
  v.freq.assign(static_cast<std::size_t>(count), 10);
  v.class_counts.resize(static_cast<std::size_t>(count));
  return v;
}

Direction planted(const SyntheticWorld& w, int k) {
  Direction d;
  d.id = w.concept_tokens()[static_cast<std::size_t>(k)];
  d.vector = w.planted_direction(k);
  return d;
}

OracleAnnotator quiet_oracle() {
  auto o = OracleAnnotator::with_defaults();
  o.p_typo = 0.0;
  o.p_syn = 0.0;
  return o;
}

}  // namespace

TEST_CASE("oracle describes a planted step by its concept word") {
  const auto w = flat_world(false);
  const auto o = quiet_oracle();
  const Vector z = Vector::Zero(32);
  const std::string& token = w.concept_tokens()[0];
  const auto up = oracle_annotate(w, o, z, 0, w.planted_direction(0), 6.0, 0);
  CHECK(up.text.find("more " + token) != std::string::npos);
  const auto down = oracle_annotate(w, o, z, 0, -w.planted_direction(0), 6.0, 0);
  CHECK(down.text.find("less " + token) != std::string::npos);
  for (std::size_t k = 1; k < 8; ++k) CHECK(up.text.find(w.concept_tokens()[k]) == std::string::npos);
  CHECK(up.annotator_id == "oracle");
  CHECK(up.class_name == w.class_names()[0]);
}

TEST_CASE("cleaning an oracle sentence recovers the thresholded changes") {
  const auto w = SyntheticWorld::build({});
  const auto o = quiet_oracle();
  Rng rng(31);
  int compared = 0;
  for (int i = 0; i < 40; ++i) {
    const Vector z = rng.normal_vector(32);
    const Vector d = rng.normal_vector(32).normalized();
    const int y = i % 4;
    const Vector before = visible_attributes(w, z, y), after = visible_attributes(w, z + 6.0 * d, y);
    std::vector<SignedToken> expect;
    for (int k = 0; k < 8; ++k) {
      const double delta = after[k] - before[k];
      if (std::abs(delta) > o.threshold) expect.push_back({w.concept_tokens()[k], delta > 0 ? 1 : -1});
    }
    const auto raw = oracle_annotate(w, o, z, y, d, 6.0, static_cast<std::uint64_t>(i));
    if (expect.empty()) {
      CHECK(raw.text == "no change");
      continue;
    }
    auto got = clean(raw, Lexicon::bundled()).tokens;
    auto by_token = [](const SignedToken& a, const SignedToken& b) { return a.token < b.token; };
    std::sort(got.begin(), got.end(), by_token);
    std::sort(expect.begin(), expect.end(), by_token);
    CHECK(got == expect);
    ++compared;
  }
  CHECK(compared > 10);
}

TEST_CASE("synonyms and typos still clean back to the concept") {
  auto o = OracleAnnotator::with_defaults();
  o.p_typo = 0.5;
  o.p_syn = 0.5;
  const auto w = flat_world(false);
  int hits = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto raw = oracle_annotate(w, o, Vector::Zero(32), 0, w.planted_direction(1), 6.0, s);
    const auto tokens = clean(raw, Lexicon::bundled()).tokens;
    hits += tokens.size() == 1 && tokens[0].token == w.concept_tokens()[1] && tokens[0].sign == 1;
  }
  CHECK(hits >= 48);
}

TEST_CASE("typos avoid dictionary words") {
  Rng rng(5);
  const auto& lex = Lexicon::bundled();
  for (int i = 0; i < 200; ++i) {
    const std::string t = inject_typo("water", rng, lex);
    CHECK(levenshtein(t, "water") == 1);
    CHECK_FALSE(lex.in_dictionary(t));
  }
}

TEST_CASE("oracle choice") {
  const auto w = flat_world(true);
  const auto o = quiet_oracle();
  const Vector z = Vector::Zero(32);
  const std::vector<Direction> c = {planted(w, 0), planted(w, 1), planted(w, 2), planted(w, 3)};
  CHECK(oracle_choose(w, o, z, 0, {{w.concept_tokens()[2], 1}}, c, 6.0) == 2);
  const std::vector<Direction> same(4, planted(w, 5));
  CHECK(oracle_choose(w, o, z, 0, {{w.concept_tokens()[2], 1}}, same, 6.0) == 0);
  CHECK_THROWS_AS(oracle_choose(w, o, z, 0, {{"nonsense", 1}}, c, 6.0), Error);

  // Pair scores agree with a direct recomputation.
  const std::vector<SignedToken> pair = {{w.concept_tokens()[0], 1}, {w.concept_tokens()[1], 1}};
  const std::vector<Direction> composed = {compose(c[0], c[1]), compose(c[0], c[2]), compose(c[1], c[3]),
                                           compose(c[2], c[3])};
  const auto scores = oracle_scores(w, z, 0, pair, composed, 6.0);
  const Vector base = visible_attributes(w, z, 0);
  for (int i = 0; i < 4; ++i) {
    const Vector moved = visible_attributes(w, z + 6.0 * composed[i].vector, 0);
    CHECK(scores[i] == doctest::Approx((moved[0] - base[0]) + (moved[1] - base[1])));
  }
  CHECK(oracle_choose(w, o, z, 0, pair, composed, 6.0) == 0);
}

TEST_CASE("binomial helpers") {
  CHECK(binomial_upper_tail(10, 10, 0.5) == doctest::Approx(1.0 / 1024.0));
  CHECK(binomial_upper_tail(0, 10, 0.3) == doctest::Approx(1.0));
  const auto [lo, hi] = binomial_interval(0, 10);
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(1.0 - std::pow(0.025, 0.1)).epsilon(1e-8));
  const auto [lo2, hi2] = binomial_interval(5, 10);
  CHECK(lo2 < 0.5);
  CHECK(hi2 > 0.5);
  CHECK(lo2 == doctest::Approx(1.0 - hi2).epsilon(1e-9));
  const auto a = make_accuracy("x", 3, 4);
  CHECK(a.accuracy == 0.75);
}

TEST_CASE("planted vocabulary is perfectly separable across z") {
  const auto w = flat_world(true);
  ForcedChoiceOptions opts;
  opts.seed = 3;
  const auto r = run_generalize_z(w, planted_vocab(w), quiet_oracle(), 0, opts);
  CHECK(r.overall.trials == 24);
  CHECK(r.overall.accuracy == 1.0);
  CHECK(r.p_value < 1e-10);
  const auto again = run_generalize_z(w, planted_vocab(w), quiet_oracle(), 0, opts);
  CHECK(again.overall.correct == r.overall.correct);
  for (std::size_t i = 0; i < r.trials.size(); ++i) CHECK(again.trials[i].chosen == r.trials[i].chosen);
  CHECK_THROWS_AS(run_generalize_z(w, planted_vocab(w, 3), quiet_oracle(), 0, opts), Error);
}

TEST_CASE("class transfer splits shared and unshared concepts") {
  const auto w = flat_world(false);
  ForcedChoiceOptions opts;
  opts.trials_per_concept = 20;
  opts.seed = 8;
  const auto r = run_generalize_y(w, planted_vocab(w), quiet_oracle(), 0, opts);
  REQUIRE(r.shared);
  CHECK(r.shared->accuracy == 1.0);
  if (r.unshared && r.unshared->trials > 0) CHECK(r.shared->accuracy >= r.unshared->accuracy);
  for (const auto& t : r.trials) CHECK(t.trial.class_index != 0);
}

TEST_CASE("composition of planted concepts") {
  const auto w = flat_world(true);
  CompositionOptions opts;
  opts.pair_count = 30;
  opts.seed = 2;
  const auto r = run_composition(w, planted_vocab(w), quiet_oracle(), 1, opts);
  REQUIRE(r.histogram);
  const auto& h = *r.histogram;
  CHECK(h[0] + h[1] + h[2] + h[3] == 30);
  CHECK(r.overall.accuracy == 1.0);
}

TEST_CASE("merged reports add up") {
  const auto w = flat_world(true);
  ForcedChoiceOptions opts;
  std::vector<ExperimentReport> parts;
  for (int y = 0; y < 2; ++y) parts.push_back(run_generalize_z(w, planted_vocab(w), quiet_oracle(), y, opts));
  const auto m = merge_reports(parts);
  CHECK(m.overall.trials == parts[0].overall.trials + parts[1].overall.trials);
  CHECK(m.trials.size() == parts[0].trials.size() + parts[1].trials.size());
}

TEST_CASE("linear classifier on toy data") {
  Matrix pos(4, 3), neg(4, 3);
  pos << 2, 0, 1, 3, 1, 0, 2, 1, 1, 4, 0, 0;
  neg << -2, 0, 1, -3, 1, 0, -2, -1, 1, -1, 0, 0;
  const auto clf = train_linear_classifier(pos, neg);
  for (int i = 0; i < 4; ++i) {
    CHECK(clf.predict(pos.row(i).transpose()) == 1);
    CHECK(clf.predict(neg.row(i).transpose()) == -1);
  }
  const auto flipped = train_linear_classifier(neg, pos);
  CHECK((clf.weights + flipped.weights).norm() <= 1e-6);

  Matrix p2(1, 2), n2(1, 2);
  p2 << 1, 3;
  n2 << -1, 0;
  Matrix p2x(2, 2), n2x(2, 2);
  p2x << p2, p2;
  n2x << n2, n2;
  const auto two = train_linear_classifier(p2x, n2x);
  const Vector diff = ((p2 - n2).transpose().array() / two.scale.array()).matrix().normalized();
  CHECK(std::abs(two.weights.normalized().dot(diff)) == doctest::Approx(1.0).epsilon(1e-3));

  CHECK_THROWS_AS(train_linear_classifier(pos, pos), Error);
}

TEST_CASE("objective never increases over training") {
  Rng rng(6);
  const Matrix pos = rng.normal_matrix(20, 5).array() + 0.3, neg = rng.normal_matrix(20, 5).array() - 0.3;
  SvmOptions few;
  few.epochs = 10;
  SvmOptions many;
  many.epochs = 200;
  const auto a = train_linear_classifier(pos, neg, few), b = train_linear_classifier(pos, neg, many);
  CHECK(b.objective <= a.objective + 1e-12);
  CHECK(linear_objective(b, pos, neg, many.regularization) == doctest::Approx(b.objective));
}

TEST_CASE("svm concept accuracy") {
  const auto w = flat_world(true);
  const auto v = planted_vocab(w);
  SvmConceptOptions opts;
  opts.seed = 4;
  // 26 held-out images per run, so average a few seeds.
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    opts.seed = seed;
    mean += svm_concept_accuracy(w, v, w.concept_tokens()[0], 0, opts).accuracy / 5.0;
  }
  CHECK(mean >= 0.9);
  opts.seed = 4;
  const auto r = svm_concept_accuracy(w, v, w.concept_tokens()[0], 0, opts);
  CHECK(r.train_examples + r.test_examples == 2 * opts.n_z);
  CHECK(svm_concept_accuracy(w, v, w.concept_tokens()[0], 0, opts).accuracy == r.accuracy);
  opts.alpha = 0.0;
  const auto null = svm_concept_accuracy(w, v, w.concept_tokens()[0], 0, opts);
  CHECK(null.accuracy == doctest::Approx(0.5).epsilon(0.2));
  CHECK_THROWS_AS(svm_concept_accuracy(w, v, "nonsense", 0, opts), Error);
}

TEST_CASE("recovery of planted directions") {
  const auto w = flat_world(false);
  auto v = planted_vocab(w);
  auto r = recovery_report(v, w);
  CHECK(r.correct_count == 8);
  CHECK(r.median_diagonal == doctest::Approx(1.0));
  // Swap two rows: both become wrong.
  v.embedding.row(0).swap(v.embedding.row(1));
  r = recovery_report(v, w);
  CHECK(r.correct_count == 6);
  const auto partial = recovery_report(planted_vocab(w, 7), w);
  CHECK(partial.unmatched == std::vector<std::string>{w.concept_tokens()[7]});
  CHECK(partial.correct_count == 7);
}

TEST_CASE("oracle settings are validated") {
  auto o = OracleAnnotator::with_defaults();
  CHECK_NOTHROW(o.validate());
  o.threshold = 1.5;
  CHECK_THROWS_AS(o.validate(), Error);
  o = OracleAnnotator::with_defaults();
  o.p_typo = -0.1;
  CHECK_THROWS_AS(o.validate(), Error);
}
