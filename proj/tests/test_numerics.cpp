#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "latlex/numerics.hpp"
#include "latlex/rng.hpp"

using namespace latlex;

namespace {

Matrix random_spd(Rng& rng, int n, double shift) {
  const Matrix a = rng.normal_matrix(n, n);
  return a.transpose() * a + shift * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("solve_spd residual on random systems") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(30));
    const Matrix a = random_spd(rng, n, 0.5);
    const Matrix b = rng.normal_matrix(n, 3);
    const Matrix x = solve_spd(a, b);
    CHECK((a * x - b).norm() <= 1e-8 * (1.0 + b.norm()));
  }
}

TEST_CASE("solve_spd rejects singular and indefinite matrices") {
  Matrix singular(2, 2);
  singular << 1, 1, 1, 1;
  CHECK_THROWS_AS(solve_spd(singular, Matrix::Ones(2, 1)), Error);
  try {
    solve_spd(singular, Matrix::Ones(2, 1));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
  }
  Matrix indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  CHECK_THROWS_AS(solve_spd(indefinite, Matrix::Ones(2, 1)), Error);
  CHECK_THROWS_AS(solve_spd(Matrix::Identity(2, 2), Matrix::Ones(3, 1)), Error);
}

TEST_CASE("project_orthonormal removes basis components") {
  Rng rng(3);
  const Matrix q = orthonormal_columns(rng.normal_matrix(10, 4));
  std::vector<Vector> basis;
  for (int j = 0; j < 4; ++j) basis.push_back(q.col(j));
  const Vector v = project_orthonormal(rng.normal_vector(10), basis);
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& b : basis) CHECK(std::abs(b.dot(v)) < 1e-14);
  CHECK_THROWS_AS(project_orthonormal(q.col(0), basis), Error);
}

TEST_CASE("orthonormal_columns gives Q with QᵀQ = I") {
  Rng rng(5);
  const Matrix q = orthonormal_columns(rng.normal_matrix(12, 5));
  CHECK((q.transpose() * q - Matrix::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("principal components agree with a dense eigensolver") {
  Rng rng(11);
  // Anisotropic cloud so the spectrum is well separated.
  Matrix x = rng.normal_matrix(400, 6);
  for (int j = 0; j < 6; ++j) x.col(j) *= 6.0 - j;
  const PcaResult pca = top_principal_components(x, 3);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sample_covariance(x));
  for (int c = 0; c < 3; ++c) {
    const Vector ref = es.eigenvectors().col(5 - c);
    CHECK(pca.eigenvalues[c] == doctest::Approx(es.eigenvalues()[5 - c]).epsilon(1e-8));
    CHECK(std::abs(ref.dot(pca.components.row(c).transpose())) == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK_THROWS_AS(top_principal_components(x, 7), Error);
}

TEST_CASE("finite differences match a known gradient") {
  auto f = [](const Vector& v) { return v.squaredNorm() + std::sin(v[0]); };
  Vector x(3);
  x << 0.3, -1.0, 2.0;
  Vector expected = 2.0 * x;
  expected[0] += std::cos(x[0]);
  CHECK((finite_difference_gradient(f, x, 1e-5) - expected).norm() < 1e-8);
}

TEST_CASE("rng streams are reproducible and labels separate them") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, "net") != derive_seed(1, "mask"));
  CHECK(derive_seed(1, "net") == derive_seed(1, "net"));
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
  }
}
