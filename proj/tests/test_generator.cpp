#include <doctest.h>

#include "latlex/generator.hpp"
#include "latlex/rng.hpp"

using namespace latlex;

namespace {

// Attributes recomputed straight from the network parameters.
Vector reference_attributes(const SyntheticWorld& w, const Vector& z, int y) {
  Vector h1(w.w1().rows());
  for (Eigen::Index i = 0; i < h1.size(); ++i)
    h1[i] = std::tanh(w.w1().row(i).dot(z) + w.b1()[i] + w.class_embedding()(i, y));
  Vector h2(w.w2().rows());
  for (Eigen::Index i = 0; i < h2.size(); ++i) h2[i] = std::tanh(w.w2().row(i).dot(h1) + w.b2()[i]);
  Vector a(w.concept_count());
  for (int k = 0; k < w.concept_count(); ++k) {
    const double logit = w.planted().row(k).dot(z) + w.epsilon() * w.w3().row(k).dot(h2) + w.class_offsets()(k, y);
    a[k] = 1.0 / (1.0 + std::exp(-logit));
  }
  return a;
}

}  // namespace

TEST_CASE("default world shape and planted directions") {
  const auto w = SyntheticWorld::build({});
  CHECK(w.latent_dim() == 32);
  CHECK(w.concept_count() == 8);
  CHECK(w.class_count() == 4);
  CHECK((w.planted() * w.planted().transpose() - Matrix::Identity(8, 8)).norm() < 1e-12);
  CHECK(w.concept_tokens().front() == "light");
  CHECK(w.class_names().size() == 4);
  // At least half of the concepts are visible in every class.
  int shared = 0;
  for (int k = 0; k < 8; ++k) {
    bool all = true;
    for (int y = 0; y < 4; ++y) all = all && w.concept_in_class(k, y);
    shared += all;
  }
  CHECK(shared >= 4);
}

TEST_CASE("attributes match an independent recomputation") {
  const auto w = SyntheticWorld::build({});
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    const Vector z = rng.normal_vector(32);
    const int y = i % 4;
    const Vector a = attributes(w, z, y);
    CHECK((a - reference_attributes(w, z, y)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((a.array() > 0.0).all());
    CHECK((a.array() < 1.0).all());
  }
}

TEST_CASE("masked concepts are invisible") {
  const auto w = SyntheticWorld::build({});
  Rng rng(2);
  const Vector z = rng.normal_vector(32);
  for (int y = 0; y < 4; ++y) {
    const Vector v = visible_attributes(w, z, y);
    for (int k = 0; k < 8; ++k)
      if (!w.concept_in_class(k, y)) CHECK(v[k] == 0.0);
  }
}

TEST_CASE("analytic layer gradients match central differences") {
  const auto w = SyntheticWorld::build({});
  Rng rng(17);
  for (int layer = 0; layer < kLayerCount; ++layer) {
    for (int i = 0; i < 3; ++i) {
      const Vector z = rng.normal_vector(32);
      const Vector d = 0.5 * rng.normal_vector(32);
      const int y = i % 4;
      const Vector g = layer_change_gradient(w, z, y, d, layer);
      const Vector fd =
          finite_difference_gradient([&](const Vector& x) { return layer_change_loss(w, z, y, x, layer); }, d, 1e-5);
      CHECK((g - fd).norm() <= 1e-4 * std::max(fd.norm(), 1e-8));
    }
  }
}

TEST_CASE("render_backward matches central differences in attribute space") {
  const auto w = SyntheticWorld::build({});
  Rng rng(4);
  Vector v = (rng.normal_vector(8).array() * 0.2 + 0.5).matrix();
  const Vector up = rng.normal_vector(w.image_shape().pixel_count());
  const Vector g = render_backward(w, v, up);
  const Vector fd = finite_difference_gradient(
      [&](const Vector& x) { return up.dot(render_attributes(w, x).pixels); }, v, 1e-6);
  CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
}

TEST_CASE("rendered pixels stay in the unit interval and depend on attributes") {
  const auto w = SyntheticWorld::build({});
  const Vector lo = Vector::Zero(8), hi = Vector::Ones(8);
  const auto a = render_attributes(w, lo), b = render_attributes(w, hi);
  CHECK(a.pixels.minCoeff() >= 0.0);
  CHECK(b.pixels.maxCoeff() <= 1.0);
  CHECK(b.mean() > a.mean());
}

TEST_CASE("single-channel worlds render and differentiate") {
  WorldConfig c;
  c.image = {16, 16, 1};
  c.concept_count = 3;
  const auto w = SyntheticWorld::build(c);
  Rng rng(1);
  const Vector z = rng.normal_vector(32);
  CHECK(render(w, z, 0).pixels.size() == 256);
  const Vector d = 0.3 * rng.normal_vector(32);
  const Vector g = layer_change_gradient(w, z, 0, d, 3);
  const Vector fd =
      finite_difference_gradient([&](const Vector& x) { return layer_change_loss(w, z, 0, x, 3); }, d, 1e-5);
  CHECK((g - fd).norm() <= 1e-4 * std::max(fd.norm(), 1e-8));
}

TEST_CASE("planted step with no perturbation follows the logistic closed form") {
  WorldConfig c;
  c.epsilon = 0.0;
  const auto w = SyntheticWorld::build(c);
  const Vector z = Vector::Zero(32);
  for (double alpha : {6.0, -6.0}) {
    const Vector a = attributes(w, z + alpha * w.planted_direction(0), 0);
    CHECK(a[0] == doctest::Approx(sigmoid(alpha + w.class_offsets()(0, 0))).epsilon(1e-14));
    for (int k = 1; k < 8; ++k) CHECK(a[k] == doctest::Approx(sigmoid(w.class_offsets()(k, 0))).epsilon(1e-14));
  }
}

TEST_CASE("world construction validates its config") {
  WorldConfig c;
  c.concept_count = 40;
  CHECK_THROWS_AS(SyntheticWorld::build(c), Error);
  c = {};
  c.class_count = 1;
  CHECK_THROWS_AS(SyntheticWorld::build(c), Error);
  c = {};
  c.image.channels = 2;
  CHECK_THROWS_AS(SyntheticWorld::build(c), Error);
  const auto w = SyntheticWorld::build({});
  CHECK_THROWS_AS(layer_features(w, Vector::Zero(32), 0, 4), Error);
  CHECK_THROWS_AS(attributes(w, Vector::Zero(31), 0), Error);
}

TEST_CASE("same seed builds the same world") {
  const auto a = SyntheticWorld::build({}), b = SyntheticWorld::build({});
  CHECK(a.planted() == b.planted());
  CHECK(a.w3() == b.w3());
  WorldConfig other;
  other.seed = 2;
  CHECK(SyntheticWorld::build(other).planted() != a.planted());
}

TEST_CASE("pnm encoding round-trips quantized pixels") {
  const auto w = SyntheticWorld::build({});
  Rng rng(3);
  const auto img = render(w, rng.normal_vector(32), 1);
  const auto back = decode_pnm(encode_pnm(img));
  CHECK(back.shape == img.shape);
  CHECK((back.pixels - quantized_copy(img).pixels).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(encode_pnm(img).substr(0, 2) == "P6");
  CHECK_THROWS_AS(decode_pnm("P3\n1 1\n255\n0 0 0"), Error);
}
