#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latlex/generator.hpp"

namespace latlex {

enum class DirectionSource { Lsd, ExtraOrthogonal, Random, PcaBaseline, Distilled, Composed };

const char* to_string(DirectionSource source);
DirectionSource direction_source_from_string(const std::string& s);

/// A unit latent direction plus the provenance needed to reproduce it.
struct Direction {
  std::string id;
  Vector vector;
  std::optional<int> layer;
  DirectionSource source = DirectionSource::Random;
  int class_index = 0;
  std::uint64_t z_seed = 0;
  Vector z;  // starting latent the direction was found for (may be empty)
  // Optimizer diagnostics, meaningful for LSDs only.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct LsdOptions {
  double step_size = 0.1;
  int max_iterations = 500;
  double tolerance = 1e-9;  // stop when relative loss improvement drops below
  double backtrack_factor = 0.5;
  int max_halvings = 30;
};

struct LsdSchedule {
  /// Directions per layer, indexed by layer; layers are processed last to first.
  std::vector<int> per_layer = {4, 4, 4, 4};
  int extra_orthogonal_count = 4;
  LsdOptions options;

  int total() const;
};

struct LsdResult {
  Vector direction;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  std::vector<double> loss_history;  // accepted iterates, starting with the initial loss
};

/// Projected gradient descent on the unit sphere, restricted to the
/// orthogonal complement of `basis`: step along −∇, project, renormalize,
/// halve the step whenever the loss would increase.
LsdResult optimize_lsd(const SyntheticWorld& world, const Vector& z, int y, int layer, const std::vector<Vector>& basis,
                       const Vector& init, const LsdOptions& opts = {});

/// Directions for one z, last layer first; each is orthogonal to every
/// direction selected before it. Ends with the extra orthogonal directions.
std::vector<Direction> generate_lsd_set(const SyntheticWorld& world, const Vector& z, int y, const LsdSchedule& schedule,
                                        std::uint64_t seed);

std::vector<Direction> random_directions(int n, int dim, std::uint64_t seed);

struct PcaBaselineOptions {
  std::vector<int> layers = {0, 1, 2};
  PcaOptions pca;
};

/// Principal components of early-layer features, pulled back to latent space
/// by least squares through the mean feature Jacobian.
std::vector<Direction> pca_baseline_directions(const SyntheticWorld& world, int y, int n, int sample_count,
                                               std::uint64_t seed, const PcaBaselineOptions& opts = {});

}  // namespace latlex
