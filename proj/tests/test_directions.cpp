#include <doctest.h>

#include "latlex/directions.hpp"
#include "latlex/rng.hpp"

using namespace latlex;

namespace {

SyntheticWorld flat_world() {
  WorldConfig c;
  c.epsilon = 0.0;
  return SyntheticWorld::build(c);
}

double max_cross_dot(const std::vector<Direction>& ds, bool same_layer_too) {
  double worst = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      if (!same_layer_too && ds[i].layer && ds[j].layer && *ds[i].layer == *ds[j].layer) continue;
      worst = std::max(worst, std::abs(ds[i].vector.dot(ds[j].vector)));
    }
  return worst;
}

}  // namespace

TEST_CASE("zero perturbation has zero loss and zero gradient") {
  const auto w = SyntheticWorld::build({});
  Rng rng(1);
  const Vector z = rng.normal_vector(32);
  for (int layer = 0; layer < kLayerCount; ++layer) {
    CHECK(layer_change_loss(w, z, 0, Vector::Zero(32), layer) == 0.0);
    CHECK(layer_change_gradient(w, z, 0, Vector::Zero(32), layer).norm() == 0.0);
  }
}

TEST_CASE("loss equals squared feature delta from two forward passes") {
  const auto w = SyntheticWorld::build({});
  Rng rng(8);
  const Vector z = rng.normal_vector(32), d = rng.normal_vector(32);
  for (int layer = 0; layer < kLayerCount; ++layer) {
    const double ref = (layer_features(w, z + d, 2, layer) - layer_features(w, z, 2, layer)).squaredNorm();
    CHECK(layer_change_loss(w, z, 2, d, layer) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("attribute-layer gradient stays in the planted span without perturbation net") {
  const auto w = flat_world();
  Rng rng(5);
  const Vector z = rng.normal_vector(32), d = rng.normal_vector(32);
  const Vector g = layer_change_gradient(w, z, 1, d, 2);
  const Vector outside = g - w.planted().transpose() * (w.planted() * g);
  CHECK(outside.norm() <= 1e-10 * std::max(1.0, g.norm()));
  // A direction orthogonal to every u_k leaves the attributes unchanged.
  std::vector<Vector> basis;
  for (int k = 0; k < 8; ++k) basis.push_back(w.planted_direction(k));
  const Vector perp = project_orthonormal(rng.normal_vector(32), basis);
  CHECK(layer_change_loss(w, z, 1, perp, 2) < 1e-24);
}

TEST_CASE("optimizer escapes the planted span") {
  const auto w = flat_world();
  Rng rng(12);
  const Vector z = rng.normal_vector(32);
  const auto r = optimize_lsd(w, z, 0, 2, {}, rng.normal_vector(32));
  CHECK(r.final_loss <= 1e-10);
  CHECK(r.final_loss <= r.initial_loss);
  CHECK(r.direction.norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) CHECK(r.loss_history[i] <= r.loss_history[i - 1]);
}

TEST_CASE("a loss-free initialization is a fixed point") {
  const auto w = flat_world();
  Rng rng(3);
  std::vector<Vector> planted;
  for (int k = 0; k < 8; ++k) planted.push_back(w.planted_direction(k));
  const Vector init = project_orthonormal(rng.normal_vector(32), planted);
  const auto r = optimize_lsd(w, rng.normal_vector(32), 0, 2, {}, init);
  CHECK((r.direction - init).norm() < 1e-12);
}

TEST_CASE("optimizer respects the orthogonality constraint") {
  const auto w = SyntheticWorld::build({});
  Rng rng(21);
  std::vector<Vector> basis = {w.planted_direction(0), w.planted_direction(3)};
  LsdOptions opts;
  opts.max_iterations = 50;
  const auto r = optimize_lsd(w, rng.normal_vector(32), 1, 3, basis, rng.normal_vector(32), opts);
  for (const auto& b : basis) CHECK(std::abs(b.dot(r.direction)) < 1e-10);
  CHECK(r.iterations <= 50);
}

TEST_CASE("small schedule gives orthonormal directions across layers") {
  const auto w = SyntheticWorld::build({});
  LsdSchedule s;
  s.per_layer = {1, 1, 1, 1};
  s.extra_orthogonal_count = 1;
  s.options.max_iterations = 60;
  Rng rng(4);
  const Vector z = rng.normal_vector(32);
  const auto ds = generate_lsd_set(w, z, 0, s, 77);
  REQUIRE(ds.size() == 5);
  for (const auto& d : ds) CHECK(d.vector.norm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(max_cross_dot(ds, true) <= 1e-8);
  // Last layer first, extras last.
  CHECK(*ds[0].layer == 3);
  CHECK(*ds[3].layer == 0);
  CHECK(ds[4].source == DirectionSource::ExtraOrthogonal);
  CHECK(!ds[4].layer);

  const auto again = generate_lsd_set(w, z, 0, s, 77);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds[i].vector == again[i].vector);
}

TEST_CASE("extras only reduce to orthonormal sampling") {
  const auto w = SyntheticWorld::build({});
  LsdSchedule s;
  s.per_layer = {0, 0, 0, 0};
  s.extra_orthogonal_count = 6;
  const auto ds = generate_lsd_set(w, Vector::Zero(32), 0, s, 9);
  REQUIRE(ds.size() == 6);
  Matrix g(32, 6);
  for (int i = 0; i < 6; ++i) g.col(i) = ds[i].vector;
  CHECK((g.transpose() * g - Matrix::Identity(6, 6)).norm() < 1e-10);
}

TEST_CASE("schedule larger than the latent space is rejected") {
  const auto w = SyntheticWorld::build({});
  LsdSchedule s;
  s.per_layer = {10, 10, 10, 10};
  CHECK_THROWS_AS(generate_lsd_set(w, Vector::Zero(32), 0, s, 1), Error);
}

TEST_CASE("random directions are unit, reproducible and spread out") {
  const auto a = random_directions(100, 32, 5), b = random_directions(100, 32, 5);
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].vector.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a[i].vector == b[i].vector);
    for (std::size_t j = i + 1; j < a.size(); ++j, ++pairs) sum += std::abs(a[i].vector.dot(a[j].vector));
  }
  CHECK(sum / pairs <= 0.35);
  CHECK(random_directions(1, 32, 6)[0].vector != a[0].vector);
}

TEST_CASE("pca baseline directions are unit latent vectors") {
  const auto w = SyntheticWorld::build({});
  const auto ds = pca_baseline_directions(w, 0, 3, 200, 11);
  REQUIRE(ds.size() == 3);
  for (const auto& d : ds) {
    CHECK(d.vector.size() == 32);
    CHECK(d.vector.norm() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.source == DirectionSource::PcaBaseline);
  }
  CHECK_THROWS_AS(pca_baseline_directions(w, 0, 100000, 200, 11), Error);
}

TEST_CASE("source names round-trip") {
  for (auto s : {DirectionSource::Lsd, DirectionSource::ExtraOrthogonal, DirectionSource::Random,
                 DirectionSource::PcaBaseline, DirectionSource::Distilled, DirectionSource::Composed})
    CHECK(direction_source_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(direction_source_from_string("bogus"), Error);
}
