#include "latlex/generator.hpp"

#include <algorithm>
#include <numeric>

#include "latlex/rng.hpp"

namespace latlex {

namespace {

const std::vector<std::string>& token_pool() {
  static const std::vector<std::string> pool = {
      "light",  "large",   "glow",    "red",    "tree",  "cloud",  "snow",   "water",
      "window", "road",    "grass",   "mountain", "roof", "wall",  "door",   "flower",
      "rock",   "sand",    "boat",    "bridge", "fence", "lamp",   "table",  "chair",
      "floor",  "ceiling", "cabinet", "counter", "street", "people", "sky",   "sun",
      "moon",   "river",   "field",   "hill",   "stone", "brick",  "wood",   "leaf"};
  return pool;
}

constexpr double kMaskedOffset = -4.0;

// Renderer constants. Every blend is a convex combination, so pixels stay in
// [0, 1] without clamping and the map is smooth in the attributes.
constexpr double kBackgroundBase = 0.1;
constexpr double kBackgroundGain = 0.6;
constexpr double kMainSigmaBase = 3.0;
constexpr double kMainSigmaGain = 9.0;
constexpr double kBlobOpacity = 0.9;
constexpr double kTintGain = 0.6;
constexpr double kMonoTintGain = 0.3;
constexpr double kMissingAttribute = 0.5;

double attr_or_default(const Vector& v, int k) { return k < v.size() ? v[k] : kMissingAttribute; }

}  // namespace

std::vector<std::string> default_concept_tokens(int count) {
  const auto& pool = token_pool();
  if (count > static_cast<int>(pool.size()))
    throw Error(ErrorKind::InvalidConfig, "concept_count exceeds the built-in token list; supply concept_tokens");
  return {pool.begin(), pool.begin() + count};
}

std::vector<std::string> default_class_names(int count) {
  static const std::vector<std::string> base = {"cottage", "kitchen", "lake", "medina"};
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i)
    names.push_back(i < static_cast<int>(base.size()) ? base[i] : "class" + std::to_string(i));
  return names;
}

SyntheticWorld SyntheticWorld::build(const WorldConfig& config) {
  const int m = config.latent_dim;
  const int k = config.concept_count;
  const int c = config.class_count;
  if (k < 2 || c < 2) throw Error(ErrorKind::InvalidConfig, "need concept_count >= 2 and class_count >= 2");
  if (k > m) throw Error(ErrorKind::InvalidConfig, "concept_count exceeds latent_dim");
  if (config.hidden1 < 1 || config.hidden2 < 1) throw Error(ErrorKind::InvalidConfig, "hidden widths must be positive");
  if (!(config.epsilon >= 0.0)) throw Error(ErrorKind::InvalidConfig, "epsilon must be >= 0");
  if (config.image.height < 1 || config.image.width < 1 ||
      (config.image.channels != 1 && config.image.channels != 3))
    throw Error(ErrorKind::InvalidConfig, "image must be HxWx1 or HxWx3");

  SyntheticWorld w;
  w.config_ = config;
  if (w.config_.concept_tokens.empty()) w.config_.concept_tokens = default_concept_tokens(k);
  if (static_cast<int>(w.config_.concept_tokens.size()) != k)
    throw Error(ErrorKind::InvalidConfig, "concept_tokens must have concept_count entries");
  for (const auto& t : w.config_.concept_tokens)
    if (t.empty()) throw Error(ErrorKind::InvalidConfig, "empty concept token");
  if (w.config_.class_names.empty()) w.config_.class_names = default_class_names(c);
  if (static_cast<int>(w.config_.class_names.size()) != c)
    throw Error(ErrorKind::InvalidConfig, "class_names must have class_count entries");

  Rng planted_rng(derive_seed(config.seed, "planted"));
  w.planted_ = orthonormal_columns(planted_rng.normal_matrix(m, k)).transpose();

  Rng net_rng(derive_seed(config.seed, "net"));
  w.w1_ = net_rng.normal_matrix(config.hidden1, m, 1.0 / std::sqrt(static_cast<double>(m)));
  w.b1_ = net_rng.normal_matrix(config.hidden1, 1, 0.1).col(0);
  w.class_embed_ = net_rng.normal_matrix(config.hidden1, c, 0.5);
  w.w2_ = net_rng.normal_matrix(config.hidden2, config.hidden1, 1.0 / std::sqrt(static_cast<double>(config.hidden1)));
  w.b2_ = net_rng.normal_matrix(config.hidden2, 1, 0.1).col(0);
  w.w3_ = net_rng.normal_matrix(k, config.hidden2, 1.0 / std::sqrt(static_cast<double>(config.hidden2)));

  auto& mask = w.config_.class_mask;
  if (mask.empty()) {
    // The first ceil(K/2) concepts appear in every class; each remaining one
    // appears in a seeded proper subset of the classes.
    Rng mask_rng(derive_seed(config.seed, "mask"));
    const int shared = (k + 1) / 2;
    mask.assign(k, std::vector<bool>(c, true));
    for (int kk = shared; kk < k; ++kk) {
      const int present = 1 + static_cast<int>(mask_rng.below(static_cast<std::uint64_t>(c - 1)));
      std::vector<int> classes(c);
      std::iota(classes.begin(), classes.end(), 0);
      mask_rng.shuffle(classes);
      std::fill(mask[kk].begin(), mask[kk].end(), false);
      for (int i = 0; i < present; ++i) mask[kk][classes[i]] = true;
    }
  }
  if (static_cast<int>(mask.size()) != k) throw Error(ErrorKind::InvalidConfig, "class_mask must have concept_count rows");
  int shared_count = 0;
  for (const auto& row : mask) {
    if (static_cast<int>(row.size()) != c) throw Error(ErrorKind::InvalidConfig, "class_mask row length");
    if (std::all_of(row.begin(), row.end(), [](bool b) { return b; })) ++shared_count;
  }
  if (2 * shared_count < k) throw Error(ErrorKind::InvalidConfig, "class_mask must share at least half of the concepts");

  Rng offset_rng(derive_seed(config.seed, "offsets"));
  w.offsets_.resize(k, c);
  for (int kk = 0; kk < k; ++kk)
    for (int y = 0; y < c; ++y) {
      const double draw = offset_rng.uniform(-1.0, 1.0);
      w.offsets_(kk, y) = mask[kk][y] ? draw : kMaskedOffset;
    }

  Rng render_rng(derive_seed(config.seed, "render"));
  const double h = config.image.height, wd = config.image.width;
  const double scale = std::min(h, wd) / 32.0;
  for (int kk = 4; kk < k; ++kk) {
    RenderSpec::Blob b;
    b.row = render_rng.uniform(0.2, 0.8) * (h - 1);
    b.col = render_rng.uniform(0.2, 0.8) * (wd - 1);
    b.sigma = render_rng.uniform(2.5, 4.5) * scale;
    for (int ch = 0; ch < 3; ++ch) b.color[ch] = render_rng.uniform();
    w.render_.blobs.push_back(b);
  }
  const int pixels = config.image.height * config.image.width;
  const double cr = (h - 1) / 2.0, cc = (wd - 1) / 2.0;
  w.render_.main_r2.resize(pixels);
  w.render_.profiles.resize(pixels, static_cast<Eigen::Index>(w.render_.blobs.size()));
  for (int r = 0; r < config.image.height; ++r)
    for (int c2 = 0; c2 < config.image.width; ++c2) {
      const int i = r * config.image.width + c2;
      w.render_.main_r2[i] = (r - cr) * (r - cr) + (c2 - cc) * (c2 - cc);
      for (std::size_t bi = 0; bi < w.render_.blobs.size(); ++bi) {
        const auto& b = w.render_.blobs[bi];
        const double dr = r - b.row, dc = c2 - b.col;
        w.render_.profiles(i, static_cast<Eigen::Index>(bi)) = std::exp(-(dr * dr + dc * dc) / (2.0 * b.sigma * b.sigma));
      }
    }
  return w;
}

int SyntheticWorld::class_index(const std::string& name) const {
  const auto& names = config_.class_names;
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

void SyntheticWorld::check_inputs(const Vector& z, int y) const {
  if (z.size() != config_.latent_dim) throw Error(ErrorKind::DimensionMismatch, "latent vector has wrong dimension");
  if (y < 0 || y >= config_.class_count) throw Error(ErrorKind::DimensionMismatch, "class index out of range");
}

ForwardPass SyntheticWorld::forward(const Vector& z, int y) const {
  check_inputs(z, y);
  ForwardPass fp;
  fp.h1 = (w1_ * z + b1_ + class_embed_.col(y)).array().tanh();
  fp.h2 = (w2_ * fp.h1 + b2_).array().tanh();
  fp.logits = planted_ * z + config_.epsilon * (w3_ * fp.h2) + offsets_.col(y);
  fp.attributes = fp.logits.unaryExpr([](double s) { return sigmoid(s); });
  return fp;
}

Vector SyntheticWorld::backward(const ForwardPass& fp, int y, const Vector* d_h1, const Vector* d_h2,
                                const Vector* d_attributes) const {
  (void)y;
  Vector grad = Vector::Zero(config_.latent_dim);
  Vector g_h2 = d_h2 ? *d_h2 : Vector::Zero(fp.h2.size());
  if (d_attributes) {
    const Vector d_logit = d_attributes->cwiseProduct(fp.attributes.cwiseProduct((1.0 - fp.attributes.array()).matrix()));
    grad += planted_.transpose() * d_logit;
    if (config_.epsilon != 0.0) g_h2 += config_.epsilon * (w3_.transpose() * d_logit);
  }
  const Vector d_pre2 = g_h2.array() * (1.0 - fp.h2.array().square());
  Vector g_h1 = w2_.transpose() * d_pre2;
  if (d_h1) g_h1 += *d_h1;
  const Vector d_pre1 = g_h1.array() * (1.0 - fp.h1.array().square());
  grad += w1_.transpose() * d_pre1;
  return grad;
}

Vector attributes(const SyntheticWorld& world, const Vector& z, int y) { return world.forward(z, y).attributes; }

namespace {
Vector mask_to_class(const SyntheticWorld& world, Vector a, int y) {
  for (int k = 0; k < a.size(); ++k)
    if (!world.concept_in_class(k, y)) a[k] = 0.0;
  return a;
}
}  // namespace

Vector visible_attributes(const SyntheticWorld& world, const Vector& z, int y) {
  return mask_to_class(world, attributes(world, z, y), y);
}

namespace {

double tint_gain(int channels, int ch) {
  if (channels == 1) return kMonoTintGain;
  return ch == 0 ? 0.0 : kTintGain;
}

using Array = Eigen::ArrayXd;
using ChannelView = Eigen::Map<Eigen::ArrayXd, 0, Eigen::InnerStride<>>;

ChannelView channel(Vector& pixels, const ImageShape& shape, int ch) {
  return ChannelView(pixels.data() + ch, shape.height * shape.width, Eigen::InnerStride<>(shape.channels));
}

// Quantities shared by the forward and backward passes.
struct RenderState {
  double bg, sigma, intensity, tint, scale;
  Array main_profile;  // exp(−r²/2σ²) of the main blob
  Array p0;            // base layer before the extra blobs
};

RenderState render_state(const SyntheticWorld& world, const Vector& v) {
  const auto& shape = world.image_shape();
  const auto& spec = world.render_spec();
  RenderState s;
  s.scale = std::min(shape.height, shape.width) / 32.0;
  s.bg = kBackgroundBase + kBackgroundGain * attr_or_default(v, 0);
  s.sigma = (kMainSigmaBase + kMainSigmaGain * attr_or_default(v, 1)) * s.scale;
  s.intensity = attr_or_default(v, 2);
  s.tint = attr_or_default(v, 3);
  s.main_profile = (-spec.main_r2.array() / (2.0 * s.sigma * s.sigma)).exp();
  const Array o = s.intensity * s.main_profile;
  s.p0 = s.bg * (1.0 - o) + o;
  return s;
}

double blob_color(const RenderSpec::Blob& b, const ImageShape& shape, int ch) {
  return b.color[shape.channels == 1 ? 0 : ch];
}

}  // namespace

ImageBuffer render_attributes(const SyntheticWorld& world, const Vector& v) {
  const auto& shape = world.image_shape();
  const auto& spec = world.render_spec();
  const RenderState s = render_state(world, v);
  ImageBuffer img;
  img.shape = shape;
  img.pixels.resize(shape.pixel_count());
  for (int ch = 0; ch < shape.channels; ++ch) {
    Array p = s.p0;
    for (std::size_t b = 0; b < spec.blobs.size(); ++b) {
      const Array ob = kBlobOpacity * v[4 + static_cast<Eigen::Index>(b)] * spec.profiles.col(static_cast<Eigen::Index>(b)).array();
      p = p * (1.0 - ob) + ob * blob_color(spec.blobs[b], shape, ch);
    }
    channel(img.pixels, shape, ch) = (p * (1.0 - tint_gain(shape.channels, ch) * s.tint)).min(1.0).max(0.0);
  }
  return img;
}

Vector render_backward(const SyntheticWorld& world, const Vector& v, const Vector& d_pixels) {
  const auto& shape = world.image_shape();
  const auto& spec = world.render_spec();
  if (d_pixels.size() != shape.pixel_count())
    throw Error(ErrorKind::DimensionMismatch, "render_backward: pixel gradient size");
  const RenderState s = render_state(world, v);
  Vector up_all = d_pixels;

  Vector grad = Vector::Zero(v.size());
  auto add = [&](int k, double g) {
    if (k < grad.size()) grad[k] += g;
  };
  const std::size_t blob_count = spec.blobs.size();
  std::vector<Array> before(blob_count), opacity(blob_count);
  for (std::size_t b = 0; b < blob_count; ++b)
    opacity[b] = kBlobOpacity * v[4 + static_cast<Eigen::Index>(b)] * spec.profiles.col(static_cast<Eigen::Index>(b)).array();

  Array d_p0 = Array::Zero(s.p0.size());
  for (int ch = 0; ch < shape.channels; ++ch) {
    Array p = s.p0;
    for (std::size_t b = 0; b < blob_count; ++b) {
      before[b] = p;
      p = p * (1.0 - opacity[b]) + opacity[b] * blob_color(spec.blobs[b], shape, ch);
    }
    const double gain = tint_gain(shape.channels, ch);
    const Array up = channel(up_all, shape, ch);
    add(3, -gain * (up * p).sum());
    Array dp = up * (1.0 - gain * s.tint);
    for (std::size_t b = blob_count; b-- > 0;) {
      const Array d_opacity = dp * (blob_color(spec.blobs[b], shape, ch) - before[b]);
      add(4 + static_cast<int>(b), kBlobOpacity * (d_opacity * spec.profiles.col(static_cast<Eigen::Index>(b)).array()).sum());
      dp *= 1.0 - opacity[b];
    }
    d_p0 += dp;
  }
  const Array o = s.intensity * s.main_profile;
  add(0, kBackgroundGain * (d_p0 * (1.0 - o)).sum());
  const Array d_o = d_p0 * (1.0 - s.bg);
  add(2, (d_o * s.main_profile).sum());
  const Array d_g = d_o * s.intensity;
  add(1, (d_g * s.main_profile * spec.main_r2.array()).sum() / (s.sigma * s.sigma * s.sigma) * kMainSigmaGain * s.scale);
  return grad;
}

ImageBuffer render(const SyntheticWorld& world, const Vector& z, int y) {
  return render_attributes(world, visible_attributes(world, z, y));
}

Vector layer_features(const SyntheticWorld& world, const Vector& z, int y, int layer) {
  if (layer < 0 || layer >= kLayerCount) throw Error(ErrorKind::UnknownLayer, "layer must be in [0, 4)");
  const ForwardPass fp = world.forward(z, y);
  switch (layer) {
    case 0: return fp.h1;
    case 1: return fp.h2;
    case 2: return fp.attributes;
    default: return render_attributes(world, mask_to_class(world, fp.attributes, y)).pixels;
  }
}

double layer_change_loss_and_gradient(const SyntheticWorld& world, const Vector& z, int y, const Vector& d,
                                      int layer, const Vector& base, Vector* gradient) {
  if (layer < 0 || layer >= kLayerCount) throw Error(ErrorKind::UnknownLayer, "layer must be in [0, 4)");
  if (d.size() != world.latent_dim() || z.size() != world.latent_dim())
    throw Error(ErrorKind::DimensionMismatch, "direction has wrong dimension");
  const ForwardPass fp = world.forward(z + d, y);
  Vector delta;
  Vector visible;
  switch (layer) {
    case 0: delta = fp.h1 - base; break;
    case 1: delta = fp.h2 - base; break;
    case 2: delta = fp.attributes - base; break;
    default:
      visible = mask_to_class(world, fp.attributes, y);
      delta = render_attributes(world, visible).pixels - base;
      break;
  }
  const double loss = delta.squaredNorm();
  if (gradient) {
    const Vector up = 2.0 * delta;
    switch (layer) {
      case 0: *gradient = world.backward(fp, y, &up, nullptr, nullptr); break;
      case 1: *gradient = world.backward(fp, y, nullptr, &up, nullptr); break;
      case 2: *gradient = world.backward(fp, y, nullptr, nullptr, &up); break;
      default: {
        const Vector d_attr = mask_to_class(world, render_backward(world, visible, up), y);
        *gradient = world.backward(fp, y, nullptr, nullptr, &d_attr);
        break;
      }
    }
  }
  return loss;
}

double layer_change_loss(const SyntheticWorld& world, const Vector& z, int y, const Vector& d, int layer) {
  return layer_change_loss_and_gradient(world, z, y, d, layer, layer_features(world, z, y, layer), nullptr);
}

Vector layer_change_gradient(const SyntheticWorld& world, const Vector& z, int y, const Vector& d, int layer) {
  Vector g;
  layer_change_loss_and_gradient(world, z, y, d, layer, layer_features(world, z, y, layer), &g);
  return g;
}

}  // namespace latlex
