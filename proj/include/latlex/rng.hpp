#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace latlex {

/// Deterministic random source used everywhere in the project.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform doubles take the top 53 bits; normals use the polar
/// Box-Muller method. None of the std:: distribution adaptors are used since
/// their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();

  Eigen::VectorXd normal_vector(Eigen::Index dim);

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed and a stage label:
/// mix64(parent ^ mix64(fnv1a(label))). Changing one label's seed never
/// perturbs another stage.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace latlex
