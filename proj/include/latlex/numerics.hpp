#pragma once

// Dense linear algebra and differentiation helpers shared by every module.
// All functions are pure and templated on the Eigen expression type.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "latlex/error.hpp"

namespace latlex {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

/// Solves A X = B for symmetric positive definite A via a Cholesky (LLᵀ)
/// factorization. The residual satisfies ‖AX − B‖_F ≤ 1e-8 (1 + ‖B‖_F) for
/// reasonably conditioned systems.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_spd(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.rows() != a.cols() || a.rows() != b.rows() || a.rows() == 0)
    throw Error(ErrorKind::DimensionMismatch, "solve_spd: A must be square and match B's rows");
  if (!all_finite(a) || !all_finite(b))
    throw Error(ErrorKind::NonFinite, "solve_spd: non-finite input");
  const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-10) * std::max(Scalar(1), a.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::DimensionMismatch, "solve_spd: A is not symmetric");

  Eigen::LLT<Dense> llt(a.derived());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "solve_spd: non-positive pivot in Cholesky");
  // Eigen's LLT does not report near-zero pivots, which show up as blown-up solutions.
  const auto& lower = llt.matrixLLT();
  const Scalar max_pivot = lower.diagonal().cwiseAbs().maxCoeff();
  const Scalar min_pivot = lower.diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot > max_pivot * Scalar(1e-7)))
    throw Error(ErrorKind::NotPositiveDefinite, "solve_spd: matrix is numerically singular");
  Dense x = llt.solve(b.derived());
  // One step of iterative refinement tightens the residual on poorly scaled systems.
  x += llt.solve(b.derived() - a.derived() * x);
  if (!all_finite(x))
    throw Error(ErrorKind::NotPositiveDefinite, "solve_spd: non-finite solution");
  return x;
}

/// Removes the components of v along each (orthonormal) basis vector and
/// normalizes the residual. Gram-Schmidt is applied twice, which keeps the
/// result orthogonal to ~1e-16 even when v is nearly in the span.
template <typename Derived>
Vector project_orthonormal(const Eigen::MatrixBase<Derived>& v, const std::vector<Vector>& basis) {
  Vector r = v;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      if (b.size() != r.size())
        throw Error(ErrorKind::DimensionMismatch, "project_orthonormal: basis dimension");
      r -= b.dot(r) * b;
    }
  }
  const double n = r.norm();
  if (!(n >= 1e-12)) throw Error(ErrorKind::DegenerateInput, "project_orthonormal: residual collapsed");
  return r / n;
}

struct PcaResult {
  Matrix components;  // k rows, one unit component per row
  Vector eigenvalues;  // descending
  Vector mean;
};

struct PcaOptions {
  int max_iterations = 10000;
  double tolerance = 1e-10;
};

/// Sample covariance (divides by n − 1) of the rows of x, after centering.
inline Matrix sample_covariance(const Matrix& x, Vector* mean_out = nullptr) {
  const Vector mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - mean.transpose();
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  if (mean_out) *mean_out = mean;
  return (centered.transpose() * centered) / denom;
}

/// Top-k principal components of the rows of x by power iteration with
/// Hotelling deflation on the sample covariance. Iteration for a component
/// stops once ‖C v − λ v‖ ≤ tol · λ_max.
inline PcaResult top_principal_components(const Matrix& x, int k, const PcaOptions& opts = {}) {
  if (k < 1 || x.rows() < k || x.cols() < k)
    throw Error(ErrorKind::DimensionMismatch, "top_principal_components: need samples >= k >= 1 and k <= features");
  if (!all_finite(x)) throw Error(ErrorKind::NonFinite, "top_principal_components: non-finite samples");

  PcaResult out;
  Matrix cov = sample_covariance(x, &out.mean);
  const Eigen::Index dim = cov.rows();
  out.components.resize(k, dim);
  out.eigenvalues.resize(k);

  // Gershgorin bound on the spectral radius gives an absolute tolerance scale.
  const double scale = std::max(cov.cwiseAbs().rowwise().sum().maxCoeff(), 1e-300);
  const double abs_tol = opts.tolerance * scale;

  for (int c = 0; c < k; ++c) {
    // Deterministic start: the column of largest diagonal weight plus a small
    // uniform bias, so that no start is orthogonal to the leading eigvector.
    Vector v = Vector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    Eigen::Index arg;
    cov.diagonal().maxCoeff(&arg);
    v[arg] += 1.0;
    for (int p = 0; p < c; ++p) v -= out.components.row(p).dot(v) * out.components.row(p).transpose();
    if (v.norm() < 1e-300) v = Vector::Unit(dim, (arg + 1) % dim);
    v.normalize();

    double lambda = v.dot(cov * v);
    bool converged = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      Vector w = cov * v;
      lambda = v.dot(w);
      const double residual = (w - lambda * v).norm();
      if (residual <= abs_tol) {
        converged = true;
        break;
      }
      // Keep the iterate in the deflated subspace against round-off.
      for (int p = 0; p < c; ++p) w -= out.components.row(p).dot(w) * out.components.row(p).transpose();
      const double wn = w.norm();
      if (wn <= abs_tol) {  // remaining spectrum is numerically zero
        converged = true;
        break;
      }
      v = w / wn;
    }
    if (!converged)
      throw Error(ErrorKind::ConvergenceFailure, "top_principal_components: power iteration did not converge");
    out.components.row(c) = v.transpose();
    out.eigenvalues[c] = std::max(lambda, 0.0);
    cov -= lambda * v * v.transpose();
  }
  return out;
}

/// Central finite differences (f(x + h eᵢ) − f(x − h eᵢ)) / 2h.
template <typename F>
Vector finite_difference_gradient(F&& f, const Vector& x, double h) {
  if (!(h > 0)) throw Error(ErrorKind::InvalidConfig, "finite_difference_gradient: h must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Householder orthonormalization of the columns of a (full column rank).
inline Matrix orthonormal_columns(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  // Fix signs so that R has a positive diagonal; the result is then unique.
  const Matrix r = qr.matrixQR().topRows(a.cols()).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace latlex
