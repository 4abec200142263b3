#include "latlex/directions.hpp"

#include <cstdio>

#include "latlex/rng.hpp"

namespace latlex {

const char* to_string(DirectionSource source) {
  switch (source) {
    case DirectionSource::Lsd: return "lsd";
    case DirectionSource::ExtraOrthogonal: return "extra_orthogonal";
    case DirectionSource::Random: return "random";
    case DirectionSource::PcaBaseline: return "pca_baseline";
    case DirectionSource::Distilled: return "distilled";
    case DirectionSource::Composed: return "composed";
  }
  return "random";
}

DirectionSource direction_source_from_string(const std::string& s) {
  for (auto src : {DirectionSource::Lsd, DirectionSource::ExtraOrthogonal, DirectionSource::Random,
                   DirectionSource::PcaBaseline, DirectionSource::Distilled, DirectionSource::Composed})
    if (s == to_string(src)) return src;
  throw Error(ErrorKind::Parse, "unknown direction source: " + s);
}

int LsdSchedule::total() const {
  int t = extra_orthogonal_count;
  for (int n : per_layer) t += n;
  return t;
}

LsdResult optimize_lsd(const SyntheticWorld& world, const Vector& z, int y, int layer, const std::vector<Vector>& basis,
                       const Vector& init, const LsdOptions& opts) {
  if (static_cast<int>(basis.size()) >= world.latent_dim())
    throw Error(ErrorKind::DegenerateInput, "optimize_lsd: basis leaves no feasible direction");
  const Vector base = layer_features(world, z, y, layer);

  LsdResult res;
  Vector d = project_orthonormal(init, basis);
  Vector grad;
  double loss = layer_change_loss_and_gradient(world, z, y, d, layer, base, &grad);
  if (!std::isfinite(loss) || !all_finite(grad)) throw Error(ErrorKind::NonFinite, "optimize_lsd: initial loss");
  res.initial_loss = loss;
  res.loss_history.push_back(loss);

  // A successful step doubles the next trial step; a failed trial halves it.
  double step = opts.step_size;
  for (int it = 0; it < opts.max_iterations && loss > 0.0; ++it) {
    bool accepted = false;
    Vector candidate;
    double candidate_loss = loss;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      try {
        candidate = project_orthonormal(d - step * grad, basis);
        candidate_loss = layer_change_loss_and_gradient(world, z, y, candidate, layer, base, nullptr);
        if (!std::isfinite(candidate_loss)) throw Error(ErrorKind::NonFinite, "optimize_lsd: loss");
        if (candidate_loss <= loss) {
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateInput) throw;
      }
      step *= opts.backtrack_factor;
    }
    if (!accepted) break;
    const double improvement = (loss - candidate_loss) / std::max(loss, 1e-300);
    d = candidate;
    loss = layer_change_loss_and_gradient(world, z, y, d, layer, base, &grad);
    if (!std::isfinite(loss) || !all_finite(grad)) throw Error(ErrorKind::NonFinite, "optimize_lsd: gradient");
    res.loss_history.push_back(loss);
    res.iterations = it + 1;
    step *= 2.0;
    if (improvement < opts.tolerance) break;
  }
  res.direction = d;
  res.final_loss = loss;
  return res;
}

std::vector<Direction> generate_lsd_set(const SyntheticWorld& world, const Vector& z, int y, const LsdSchedule& schedule,
                                        std::uint64_t seed) {
  const int m = world.latent_dim();
  if (static_cast<int>(schedule.per_layer.size()) > kLayerCount)
    throw Error(ErrorKind::InvalidConfig, "LSD schedule lists more layers than the generator exposes");
  for (int n : schedule.per_layer)
    if (n < 0) throw Error(ErrorKind::InvalidConfig, "negative per-layer count");
  if (schedule.extra_orthogonal_count < 0 || schedule.total() > m - 1)
    throw Error(ErrorKind::InvalidConfig, "LSD schedule needs at most latent_dim - 1 directions");

  std::vector<Direction> out;
  std::vector<Vector> basis;
  std::uint64_t draw = 0;
  for (int layer = static_cast<int>(schedule.per_layer.size()) - 1; layer >= 0; --layer) {
    for (int j = 0; j < schedule.per_layer[layer]; ++j) {
      Rng rng(derive_seed(seed, draw++));
      const LsdResult r = optimize_lsd(world, z, y, layer, basis, rng.normal_vector(m), schedule.options);
      Direction d;
      d.vector = r.direction;
      d.layer = layer;
      d.source = DirectionSource::Lsd;
      d.class_index = y;
      d.z = z;
      d.initial_loss = r.initial_loss;
      d.final_loss = r.final_loss;
      basis.push_back(r.direction);
      out.push_back(std::move(d));
    }
  }
  for (int j = 0; j < schedule.extra_orthogonal_count; ++j) {
    Rng rng(derive_seed(seed, draw++));
    Direction d;
    d.vector = project_orthonormal(rng.normal_vector(m), basis);
    d.source = DirectionSource::ExtraOrthogonal;
    d.class_index = y;
    d.z = z;
    basis.push_back(d.vector);
    out.push_back(std::move(d));
  }
  if (static_cast<int>(out.size()) != schedule.total())
    throw Error(ErrorKind::DegenerateInput, "generate_lsd_set produced the wrong number of directions");
  return out;
}

std::vector<Direction> random_directions(int n, int dim, std::uint64_t seed) {
  if (n < 1 || dim < 1) throw Error(ErrorKind::InvalidConfig, "random_directions: n and dim must be positive");
  Rng rng(seed);
  std::vector<Direction> out;
  for (int i = 0; i < n; ++i) {
    Vector v = rng.normal_vector(dim);
    while (v.norm() < 1e-12) v = rng.normal_vector(dim);
    Direction d;
    d.vector = v.normalized();
    d.source = DirectionSource::Random;
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

// Rows: concatenated features of the requested layers; columns: latent coordinates.
Matrix feature_jacobian(const SyntheticWorld& world, const ForwardPass& fp, const std::vector<int>& layers) {
  const Matrix d_h1 = (1.0 - fp.h1.array().square()).matrix().asDiagonal() * world.w1();
  const Matrix d_h2 = (1.0 - fp.h2.array().square()).matrix().asDiagonal() * (world.w2() * d_h1);
  std::vector<Matrix> blocks;
  Eigen::Index rows = 0;
  for (int layer : layers) {
    switch (layer) {
      case 0: blocks.push_back(d_h1); break;
      case 1: blocks.push_back(d_h2); break;
      case 2: {
        const Vector slope = fp.attributes.array() * (1.0 - fp.attributes.array());
        blocks.push_back(slope.asDiagonal() * (world.planted() + world.epsilon() * (world.w3() * d_h2)));
        break;
      }
      default: throw Error(ErrorKind::UnknownLayer, "PCA baseline supports layers 0-2");
    }
    rows += blocks.back().rows();
  }
  Matrix j(rows, world.latent_dim());
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    j.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return j;
}

Vector concatenated_features(const ForwardPass& fp, const std::vector<int>& layers) {
  Eigen::Index n = 0;
  for (int l : layers) n += (l == 0 ? fp.h1.size() : l == 1 ? fp.h2.size() : fp.attributes.size());
  Vector f(n);
  Eigen::Index r = 0;
  for (int l : layers) {
    const Vector& part = l == 0 ? fp.h1 : l == 1 ? fp.h2 : fp.attributes;
    f.segment(r, part.size()) = part;
    r += part.size();
  }
  return f;
}

}  // namespace

std::vector<Direction> pca_baseline_directions(const SyntheticWorld& world, int y, int n, int sample_count,
                                               std::uint64_t seed, const PcaBaselineOptions& opts) {
  const int m = world.latent_dim();
  if (n < 1) throw Error(ErrorKind::InvalidConfig, "pca_baseline_directions: n must be positive");
  if (sample_count < std::max(n, 2 * m))
    throw Error(ErrorKind::InvalidConfig, "pca_baseline_directions: sample_count must be >= max(n, 2m)");
  if (opts.layers.empty()) throw Error(ErrorKind::InvalidConfig, "pca_baseline_directions: no feature layers");
  for (int l : opts.layers)
    if (l < 0 || l > 2) throw Error(ErrorKind::UnknownLayer, "PCA baseline supports layers 0-2");

  Rng rng(seed);
  Matrix features;
  Matrix mean_jacobian;
  for (int s = 0; s < sample_count; ++s) {
    const Vector z = rng.normal_vector(m);
    const ForwardPass fp = world.forward(z, y);
    const Vector f = concatenated_features(fp, opts.layers);
    if (s == 0) {
      features.resize(sample_count, f.size());
      mean_jacobian = Matrix::Zero(f.size(), m);
    }
    features.row(s) = f.transpose();
    mean_jacobian += feature_jacobian(world, fp, opts.layers);
  }
  mean_jacobian /= sample_count;
  if (n > features.cols())
    throw Error(ErrorKind::InvalidConfig, "pca_baseline_directions: more components than feature dimensions");

  const PcaResult pca = top_principal_components(features, n, opts.pca);
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(mean_jacobian);
  std::vector<Direction> out;
  for (int c = 0; c < n; ++c) {
    // Minimum-norm latent step whose linearized feature change best matches the component.
    const Vector latent = cod.solve(pca.components.row(c).transpose());
    const double norm = latent.norm();
    if (!(norm > 1e-12)) throw Error(ErrorKind::DegenerateInput, "principal component has no latent pre-image");
    Direction d;
    d.vector = latent / norm;
    d.source = DirectionSource::PcaBaseline;
    d.class_index = y;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace latlex
