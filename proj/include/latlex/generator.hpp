#pragma once

// A small class-conditional differentiable generator with planted concept
// directions. Attributes a_k = sigmoid(u_k·z + ε n_k(z, y) + β_{k,y}), where n
// is a fixed two-hidden-layer tanh network. Four feature taps are exposed:
//   0: hidden-1 of the perturbation net
//   1: hidden-2 of the perturbation net
//   2: the attribute vector
//   3: the rendered image, flattened (HWC order)

#include <cstdint>
#include <string>
#include <vector>

#include "latlex/image.hpp"
#include "latlex/numerics.hpp"

namespace latlex {

inline constexpr int kLayerCount = 4;

struct WorldConfig {
  std::uint64_t seed = 1;
  int latent_dim = 32;
  int concept_count = 8;
  int class_count = 4;
  double epsilon = 0.1;
  ImageShape image{32, 32, 3};
  int hidden1 = 48;
  int hidden2 = 48;
  /// Empty means "use the default token list".
  std::vector<std::string> concept_tokens;
  /// Empty means "generate from the seed"; otherwise concept_count rows of class_count flags.
  std::vector<std::vector<bool>> class_mask;
  std::vector<std::string> class_names;
};

std::vector<std::string> default_concept_tokens(int count);
std::vector<std::string> default_class_names(int count);

/// Intermediate values of one forward pass through the perturbation net.
struct ForwardPass {
  Vector h1;
  Vector h2;
  Vector logits;
  Vector attributes;
};

/// Geometry and colors of the renderer, drawn once from the world seed.
struct RenderSpec {
  struct Blob {
    double row = 0, col = 0, sigma = 1;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
  };
  /// Extra blobs, one per concept index ≥ 4.
  std::vector<Blob> blobs;
  /// Attribute-independent geometry, per pixel (row-major).
  Vector main_r2;   // squared distance to the image center
  Matrix profiles;  // pixels × blobs, exp(−r²/2σ²)
};

class SyntheticWorld {
 public:
  /// Throws InvalidConfig unless latent_dim ≥ concept_count ≥ 2 and class_count ≥ 2.
  static SyntheticWorld build(const WorldConfig& config);

  const WorldConfig& config() const { return config_; }
  int latent_dim() const { return config_.latent_dim; }
  int concept_count() const { return config_.concept_count; }
  int class_count() const { return config_.class_count; }
  double epsilon() const { return config_.epsilon; }
  const ImageShape& image_shape() const { return config_.image; }

  /// K × m, orthonormal rows u_k.
  const Matrix& planted() const { return planted_; }
  Vector planted_direction(int k) const { return planted_.row(k).transpose(); }
  /// K × C.
  const Matrix& class_offsets() const { return offsets_; }
  bool concept_in_class(int k, int y) const { return config_.class_mask[k][y]; }
  const std::vector<std::string>& concept_tokens() const { return config_.concept_tokens; }
  const std::vector<std::string>& class_names() const { return config_.class_names; }
  const RenderSpec& render_spec() const { return render_; }

  /// Index of the class with this name, or -1.
  int class_index(const std::string& name) const;

  ForwardPass forward(const Vector& z, int y) const;

  // Network parameters (read-only; exposed for independent test oracles).
  const Matrix& w1() const { return w1_; }
  const Vector& b1() const { return b1_; }
  const Matrix& class_embedding() const { return class_embed_; }
  const Matrix& w2() const { return w2_; }
  const Vector& b2() const { return b2_; }
  const Matrix& w3() const { return w3_; }

  /// Gradient with respect to z given upstream gradients on the taps; any
  /// of the upstream pointers may be null.
  Vector backward(const ForwardPass& fp, int y, const Vector* d_h1, const Vector* d_h2,
                  const Vector* d_attributes) const;

 private:
  SyntheticWorld() = default;
  void check_inputs(const Vector& z, int y) const;

  WorldConfig config_;
  Matrix planted_;
  Matrix offsets_;
  Matrix w1_, w2_, w3_;
  Vector b1_, b2_;
  Matrix class_embed_;  // hidden1 × C
  RenderSpec render_;
};

/// Attribute vector a(z, y), each entry strictly in (0, 1).
Vector attributes(const SyntheticWorld& world, const Vector& z, int y);

/// Attributes as they appear in a rendered image of class y: concepts absent
/// from the class contribute nothing (zero).
Vector visible_attributes(const SyntheticWorld& world, const Vector& z, int y);

Vector layer_features(const SyntheticWorld& world, const Vector& z, int y, int layer);

ImageBuffer render(const SyntheticWorld& world, const Vector& z, int y);

/// Renders from an explicit visible-attribute vector.
ImageBuffer render_attributes(const SyntheticWorld& world, const Vector& visible);

/// Pulls an upstream pixel gradient back to the visible attributes.
Vector render_backward(const SyntheticWorld& world, const Vector& visible, const Vector& d_pixels);

/// ‖g_ℓ(z + d) − g_ℓ(z)‖².
double layer_change_loss(const SyntheticWorld& world, const Vector& z, int y, const Vector& d, int layer);

/// ∂/∂d of layer_change_loss by reverse accumulation.
Vector layer_change_gradient(const SyntheticWorld& world, const Vector& z, int y, const Vector& d, int layer);

/// Loss and gradient from a single forward pass at z + d; `base` holds g_ℓ(z).
double layer_change_loss_and_gradient(const SyntheticWorld& world, const Vector& z, int y, const Vector& d,
                                      int layer, const Vector& base, Vector* gradient);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace latlex
