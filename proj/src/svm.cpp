#include <algorithm>
#include <cmath>

#include "latlex/eval.hpp"

namespace latlex {

namespace {

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vector r = m.row(i).transpose();
    rows.emplace_back(r.data(), r.data() + r.size());
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

bool same_rows(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && sorted_rows(a) == sorted_rows(b);
}

// Objective on standardized data x (rows) with labels ±1.
double objective(const Matrix& x, const Vector& labels, const Vector& w, double b, double reg) {
  const Vector margins = labels.cwiseProduct((x * w).array().matrix() + Vector::Constant(x.rows(), b));
  const double hinge = (1.0 - margins.array()).max(0.0).mean();
  return 0.5 * reg * w.squaredNorm() + hinge;
}

}  // namespace

double LinearClassifier::decision(const Vector& pixels) const {
  if (pixels.size() != weights.size()) throw Error(ErrorKind::DimensionMismatch, "classifier input size");
  return weights.dot(((pixels - mean).array() / scale.array()).matrix()) + bias;
}

double linear_objective(const LinearClassifier& clf, const Matrix& positives, const Matrix& negatives,
                        double regularization) {
  Matrix x(positives.rows() + negatives.rows(), positives.cols());
  x << positives, negatives;
  x = ((x.rowwise() - clf.mean.transpose()).array().rowwise() / clf.scale.transpose().array()).matrix();
  Vector labels(x.rows());
  labels << Vector::Ones(positives.rows()), -Vector::Ones(negatives.rows());
  return objective(x, labels, clf.weights, clf.bias, regularization);
}

LinearClassifier train_linear_classifier(const Matrix& positives, const Matrix& negatives, const SvmOptions& opts) {
  if (positives.rows() < 2 || negatives.rows() < 2)
    throw Error(ErrorKind::DegenerateInput, "need at least two examples per class");
  if (positives.cols() != negatives.cols()) throw Error(ErrorKind::DimensionMismatch, "example sizes differ");
  if (!all_finite(positives) || !all_finite(negatives)) throw Error(ErrorKind::NonFinite, "non-finite pixels");
  if (same_rows(positives, negatives)) throw Error(ErrorKind::DegenerateInput, "positive and negative sets are identical");
  if (!(opts.regularization > 0.0) || opts.epochs < 1 || !(opts.step > 0.0))
    throw Error(ErrorKind::InvalidConfig, "invalid classifier options");

  Matrix x(positives.rows() + negatives.rows(), positives.cols());
  x << positives, negatives;
  Vector labels(x.rows());
  labels << Vector::Ones(positives.rows()), -Vector::Ones(negatives.rows());

  LinearClassifier clf;
  clf.mean = x.colwise().mean().transpose();
  x.rowwise() -= clf.mean.transpose();
  clf.scale = (x.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().transpose();
  for (Eigen::Index j = 0; j < clf.scale.size(); ++j)
    if (clf.scale[j] < 1e-12) clf.scale[j] = 1.0;
  x = (x.array().rowwise() / clf.scale.transpose().array()).matrix();

  const auto n = static_cast<double>(x.rows());
  Vector w = Vector::Zero(x.cols());
  double b = 0.0;
  double f = objective(x, labels, w, b, opts.regularization);
  for (int t = 0; t < opts.epochs; ++t) {
    const Vector margins = labels.cwiseProduct(x * w + Vector::Constant(x.rows(), b));
    Vector coeff = Vector::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (margins[i] < 1.0) coeff[i] = -labels[i] / n;
    const Vector gw = opts.regularization * w + x.transpose() * coeff;
    const double gb = coeff.sum();

    double step = opts.step / std::sqrt(t + 1.0);
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      const Vector w_new = w - step * gw;
      const double b_new = b - step * gb;
      const double f_new = objective(x, labels, w_new, b_new, opts.regularization);
      if (f_new <= f) {
        w = w_new, b = b_new, f = f_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    clf.iterations = t + 1;
    if (!accepted) break;
  }
  clf.weights = w;
  clf.bias = b;
  clf.objective = f;
  if (!all_finite(clf.weights) || !std::isfinite(clf.bias)) throw Error(ErrorKind::NonFinite, "classifier diverged");
  return clf;
}

SvmConceptResult svm_concept_accuracy(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                      const std::string& token, int y, const SvmConceptOptions& opts) {
  if (opts.n_z < 4 || !(opts.holdout > 0.0 && opts.holdout < 1.0))
    throw Error(ErrorKind::InvalidConfig, "svm: need n_z >= 4 and holdout in (0,1)");
  std::vector<std::string> others;
  for (const auto& t : distractor_pool(vocab, opts.pool_min_freq))
    if (t != token) others.push_back(t);
  if (vocab.index(token) < 0) throw Error(ErrorKind::UnknownToken, "token not in vocabulary: " + token);
  if (others.empty()) throw Error(ErrorKind::VocabularyTooSmall, "svm needs at least two vocabulary concepts");

  const Direction target = concept_direction(vocab, token);
  Rng rng(opts.seed);
  const int n_train = static_cast<int>(std::lround(opts.n_z * (1.0 - opts.holdout)));
  const int pixels = world.image_shape().pixel_count();
  Matrix pos_train(n_train, pixels), neg_train(n_train, pixels);
  Matrix pos_test(opts.n_z - n_train, pixels), neg_test(opts.n_z - n_train, pixels);
  for (int i = 0; i < opts.n_z; ++i) {
    const Vector z = rng.normal_vector(world.latent_dim());
    const Direction other = concept_direction(vocab, others[rng.below(others.size())]);
    const Vector p = apply_concept(world, z, y, target, opts.alpha).pixels;
    const Vector q = apply_concept(world, z, y, other, opts.alpha).pixels;
    if (i < n_train) {
      pos_train.row(i) = p.transpose();
      neg_train.row(i) = q.transpose();
    } else {
      pos_test.row(i - n_train) = p.transpose();
      neg_test.row(i - n_train) = q.transpose();
    }
  }

  SvmConceptResult r;
  r.token = token;
  r.class_index = y;
  r.train_examples = 2 * n_train;
  r.test_examples = 2 * (opts.n_z - n_train);
  try {
    const LinearClassifier clf = train_linear_classifier(pos_train, neg_train, opts.svm);
    int correct = 0;
    for (Eigen::Index i = 0; i < pos_test.rows(); ++i) {
      correct += clf.predict(pos_test.row(i).transpose()) == 1;
      correct += clf.predict(neg_test.row(i).transpose()) == -1;
    }
    r.accuracy = static_cast<double>(correct) / r.test_examples;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateInput) throw;
    // Indistinguishable classes: a constant prediction, right half the time.
    r.degenerate = true;
    r.accuracy = 0.5;
  }
  return r;
}

}  // namespace latlex
