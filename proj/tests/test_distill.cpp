#include <doctest.h>

#include <algorithm>

#include "latlex/distill.hpp"
#include "latlex/rng.hpp"

using namespace latlex;

namespace {

Direction unit_direction(const std::string& id, const Vector& v) {
  Direction d;
  d.id = id;
  d.vector = v.normalized();
  return d;
}

CleanedAnnotation note(const std::string& dir, std::vector<SignedToken> tokens, const std::string& cls = "lake") {
  return {dir, "a", cls, std::move(tokens)};
}

// A random corpus over a handful of tokens and directions.
struct Fixture {
  std::map<std::string, Direction> store;
  std::vector<CleanedAnnotation> corpus;

  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed);
    const std::vector<std::string> vocab = {"sky", "tree", "snow", "water", "light"};
    for (int i = 0; i < 20; ++i) {
      const std::string id = "d" + std::to_string(i);
      store[id] = unit_direction(id, rng.normal_vector(6));
      std::vector<SignedToken> t;
      for (const auto& w : vocab)
        if (rng.uniform() < 0.4) t.push_back({w, rng.uniform() < 0.3 ? -1 : +1});
      if (t.empty()) t.push_back({vocab[i % vocab.size()], +1});
      corpus.push_back(note(id, t, i % 2 ? "lake" : "city"));
    }
  }
};

}  // namespace

TEST_CASE("single annotation assembles to a 1x1 system") {
  const Vector v = Vector::Unit(4, 1);
  std::map<std::string, Direction> store{{"d", unit_direction("d", v)}};
  AssembleOptions o;
  o.min_freq = 1;
  const auto m = assemble_matrices({note("d", {{"a", +1}})}, store, o);
  CHECK(m.words.w.rows() == 1);
  CHECK(m.words.w(0, 0) == 1.0);
  CHECK(m.directions.d.row(0).transpose() == v);

  const auto exact = distill(m.words, m.directions, 0.0);
  CHECK((exact.embedding.row(0).transpose() - v).norm() < 1e-15);
  CHECK((concept_direction(exact, "a").vector - v).norm() < 1e-15);
  const auto shrunk = distill(m.words, m.directions, 100.0);
  CHECK((shrunk.embedding.row(0).transpose() - v / 101.0).norm() < 1e-15);
}

TEST_CASE("frequency threshold, negation and dropped rows") {
  std::map<std::string, Direction> store{{"d1", unit_direction("d1", Vector::Unit(3, 0))},
                                         {"d2", unit_direction("d2", Vector::Unit(3, 1))},
                                         {"d3", unit_direction("d3", Vector::Unit(3, 2))}};
  const std::vector<CleanedAnnotation> corpus = {note("d1", {{"sky", +1}}), note("d2", {{"sky", -1}, {"rare", +1}}),
                                                 note("d3", {{"rare2", +1}})};
  const auto m = assemble_matrices(corpus, store);
  CHECK(m.words.tokens == std::vector<std::string>{"sky"});
  CHECK(m.words.w.rows() == 2);
  CHECK(m.words.w(1, 0) == -1.0);
  CHECK(m.words.freq[0] == 2);

  AssembleOptions split;
  split.min_freq = 1;
  split.negation = NegationMode::Split;
  const auto s = assemble_matrices(corpus, store, split);
  CHECK(std::find(s.words.tokens.begin(), s.words.tokens.end(), "not-sky") != s.words.tokens.end());
  CHECK((s.words.w.array() >= 0.0).all());

  AssembleOptions only_city;
  only_city.class_name = "city";
  CHECK_THROWS_AS(assemble_matrices(corpus, store, only_city), Error);
  CHECK_THROWS_AS(assemble_matrices({note("missing", {{"sky", +1}})}, store), Error);
}

TEST_CASE("co-occurring tokens get identical embeddings") {
  Rng rng(2);
  std::map<std::string, Direction> store;
  std::vector<CleanedAnnotation> corpus;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "d" + std::to_string(i);
    store[id] = unit_direction(id, rng.normal_vector(5));
    corpus.push_back(note(id, {{"snow", +1}, {"white", +1}}));
    if (i % 2) corpus.push_back(note(id, {{"sky", +1}}));
  }
  const auto m = assemble_matrices(corpus, store);
  const auto v = distill(m.words, m.directions, 100.0);
  CHECK((v.embedding.row(v.index("snow")) - v.embedding.row(v.index("white"))).norm() < 1e-14);
}

TEST_CASE("normal equations hold and shrinkage is monotone") {
  const Fixture f(7);
  const auto m = assemble_matrices(f.corpus, f.store);
  double previous = std::numeric_limits<double>::infinity();
  const Matrix wtd = m.words.w.transpose() * m.directions.d;
  for (double lambda : {0.0, 0.5, 1.0, 10.0, 100.0, 1e4, 1e9}) {
    const auto v = distill(m.words, m.directions, lambda);
    CHECK(normal_equation_residual(m.words.w, m.directions.d, lambda, v.embedding) <= 1e-8 * (1.0 + wtd.norm()));
    CHECK(v.embedding.norm() <= previous + 1e-15);
    previous = v.embedding.norm();
  }
  CHECK(previous <= 1e-6 * wtd.norm());
}

TEST_CASE("row order does not matter") {
  Fixture f(9);
  const auto a = distill(assemble_matrices(f.corpus, f.store).words, assemble_matrices(f.corpus, f.store).directions,
                         100.0);
  std::reverse(f.corpus.begin(), f.corpus.end());
  const auto mb = assemble_matrices(f.corpus, f.store);
  const auto b = distill(mb.words, mb.directions, 100.0);
  for (const auto& t : a.tokens) CHECK((a.embedding.row(a.index(t)) - b.embedding.row(b.index(t))).norm() < 1e-12);
}

TEST_CASE("flipping one token's signs negates only its row") {
  Fixture f(11);
  const auto ma = assemble_matrices(f.corpus, f.store);
  const auto a = distill(ma.words, ma.directions, 100.0);
  auto mb = ma;
  const int j = a.index("sky");
  REQUIRE(j >= 0);
  mb.words.w.col(j) *= -1.0;
  const auto b = distill(mb.words, mb.directions, 100.0);
  for (int k = 0; k < a.size(); ++k) {
    const double err = k == j ? (a.embedding.row(k) + b.embedding.row(k)).norm()
                              : (a.embedding.row(k) - b.embedding.row(k)).norm();
    CHECK(err < 1e-12);
  }
}

TEST_CASE("rank-deficient system without ridge is rejected") {
  WordMatrix w;
  w.w = Matrix::Ones(2, 2);
  w.tokens = {"a", "b"};
  w.freq = {2, 2};
  w.class_counts.resize(2);
  DirectionMatrix d{Matrix::Identity(2, 3)};
  CHECK_THROWS_AS(distill(w, d, 0.0), Error);
  CHECK_NOTHROW(distill(w, d, 1.0));
}

TEST_CASE("concept directions and application") {
  const Fixture f(4);
  const auto m = assemble_matrices(f.corpus, f.store);
  const auto v = distill(m.words, m.directions, 100.0);
  double raw = 0.0;
  const auto d = concept_direction(v, v.tokens[0], &raw);
  CHECK(d.vector.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(raw == doctest::Approx(v.embedding.row(0).norm()));
  CHECK(d.source == DirectionSource::Distilled);
  CHECK_THROWS_AS(concept_direction(v, "unknown"), Error);
}

TEST_CASE("applying planted directions in a flat world") {
  WorldConfig c;
  c.epsilon = 0.0;
  const auto world = SyntheticWorld::build(c);
  Rng rng(1);
  const Vector z = rng.normal_vector(32);
  Direction u;
  u.vector = world.planted_direction(0);
  CHECK(apply_concept(world, z, 0, u, 0.0).pixels == render(world, z, 0).pixels);
  const auto zero = Vector::Zero(32);
  const Vector up = attributes(world, zero + 6.0 * u.vector, 0);
  CHECK(up[0] == doctest::Approx(sigmoid(6.0 + world.class_offsets()(0, 0))));
  CHECK(apply_concept(world, zero, 0, u, 6.0).mean() > apply_concept(world, zero, 0, u, -6.0).mean());
}

TEST_CASE("composition") {
  Direction a = unit_direction("a", Vector::Unit(4, 0)), b = unit_direction("b", Vector::Unit(4, 1));
  CHECK((compose(a, a).vector - a.vector).norm() == 0.0);
  CHECK(compose(a, b).vector == compose(b, a).vector);
  CHECK(compose(a, b).vector.norm() == doctest::Approx(std::sqrt(0.5)));
  CHECK(compose(a, b).source == DirectionSource::Composed);
  Direction neg = a;
  neg.vector = -a.vector;
  CHECK_THROWS_AS(compose(a, neg), Error);
  Direction short_one = unit_direction("s", Vector::Unit(3, 0));
  CHECK_THROWS_AS(compose(a, short_one), Error);
}
