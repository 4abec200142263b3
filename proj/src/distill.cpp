#include "latlex/distill.hpp"

#include <set>

namespace latlex {

namespace {

std::string column_name(const SignedToken& t, NegationMode mode) {
  if (mode == NegationMode::Split && t.sign < 0) return "not-" + t.token;
  return t.token;
}

}  // namespace

AssembledMatrices assemble_matrices(const std::vector<CleanedAnnotation>& corpus,
                                    const std::map<std::string, Direction>& store, const AssembleOptions& opts) {
  if (opts.min_freq < 1) throw Error(ErrorKind::InvalidConfig, "min_freq must be at least 1");

  std::vector<const CleanedAnnotation*> rows;
  for (const auto& a : corpus) {
    if (!store.count(a.direction_id))
      throw Error(ErrorKind::UnresolvedDirection, "annotation refers to unknown direction '" + a.direction_id + "'");
    if (opts.class_name.empty() || a.class_name == opts.class_name) rows.push_back(&a);
  }

  // Counts are per annotation: a token repeated within one record counts once.
  std::map<std::string, int> freq;
  std::map<std::string, std::map<std::string, int>> per_class;
  for (const auto* a : rows) {
    std::set<std::string> seen;
    for (const auto& t : a->tokens) seen.insert(column_name(t, opts.negation));
    for (const auto& s : seen) {
      ++freq[s];
      ++per_class[s][a->class_name];
    }
  }

  AssembledMatrices out;
  std::map<std::string, int> column;
  for (const auto& [token, n] : freq) {
    if (n < opts.min_freq) continue;
    column[token] = static_cast<int>(out.words.tokens.size());
    out.words.tokens.push_back(token);
    out.words.freq.push_back(n);
    out.words.class_counts.push_back(per_class[token]);
  }
  if (column.empty()) throw Error(ErrorKind::EmptyVocabulary, "no token reaches min_freq");

  std::vector<Eigen::RowVectorXd> w_rows;
  std::vector<Eigen::RowVectorXd> d_rows;
  const Eigen::Index dim = store.at(rows.front()->direction_id).vector.size();
  for (const auto* a : rows) {
    Eigen::RowVectorXd wr = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(column.size()));
    bool any = false;
    for (const auto& t : a->tokens) {
      auto it = column.find(column_name(t, opts.negation));
      if (it == column.end() || wr[it->second] != 0.0) continue;
      wr[it->second] = opts.negation == NegationMode::Split ? 1.0 : static_cast<double>(t.sign);
      any = true;
    }
    if (!any) continue;
    const Vector& v = store.at(a->direction_id).vector;
    if (v.size() != dim) throw Error(ErrorKind::DimensionMismatch, "directions differ in dimension");
    w_rows.push_back(wr);
    d_rows.push_back(v.transpose());
    out.words.direction_ids.push_back(a->direction_id);
  }

  out.words.w.resize(static_cast<Eigen::Index>(w_rows.size()), static_cast<Eigen::Index>(column.size()));
  out.directions.d.resize(static_cast<Eigen::Index>(d_rows.size()), dim);
  for (std::size_t i = 0; i < w_rows.size(); ++i) {
    out.words.w.row(static_cast<Eigen::Index>(i)) = w_rows[i];
    out.directions.d.row(static_cast<Eigen::Index>(i)) = d_rows[i];
  }
  return out;
}

int ConceptVocabulary::index(const std::string& token) const {
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == token) return static_cast<int>(i);
  return -1;
}

double normal_equation_residual(const Matrix& w, const Matrix& d, double lambda, const Matrix& e) {
  Matrix gram = w.transpose() * w;
  gram.diagonal().array() += lambda;
  return (gram * e - w.transpose() * d).norm();
}

ConceptVocabulary distill(const WordMatrix& w, const DirectionMatrix& d, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidConfig, "lambda must be finite and >= 0");
  if (w.w.rows() != d.d.rows()) throw Error(ErrorKind::DimensionMismatch, "W and D row counts differ");
  if (w.w.cols() == 0) throw Error(ErrorKind::EmptyVocabulary, "distill: no tokens");

  Matrix gram = w.w.transpose() * w.w;
  gram.diagonal().array() += lambda;
  const Matrix rhs = w.w.transpose() * d.d;

  ConceptVocabulary v;
  v.lambda = lambda;
  v.tokens = w.tokens;
  v.freq = w.freq;
  v.class_counts = w.class_counts;
  v.embedding = solve_spd(gram, rhs);

  const double residual = (gram * v.embedding - rhs).norm();
  if (!(residual <= 1e-8 * (1.0 + rhs.norm())))
    throw Error(ErrorKind::NotPositiveDefinite, "distill: normal equations poorly solved");
  return v;
}

Direction concept_direction(const ConceptVocabulary& vocab, const std::string& token, double* raw_norm) {
  const int i = vocab.index(token);
  if (i < 0) throw Error(ErrorKind::UnknownToken, "token not in vocabulary: " + token);
  const Vector e = vocab.embedding.row(i).transpose();
  const double n = e.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::DegenerateInput, "zero embedding for token " + token);
  if (raw_norm) *raw_norm = n;
  Direction d;
  d.id = token;
  d.vector = e / n;
  d.source = DirectionSource::Distilled;
  return d;
}

ImageBuffer apply_concept(const SyntheticWorld& world, const Vector& z, int y, const Direction& d, double alpha) {
  if (!std::isfinite(alpha)) throw Error(ErrorKind::InvalidConfig, "alpha must be finite");
  if (d.vector.size() != z.size()) throw Error(ErrorKind::DimensionMismatch, "direction and latent differ");
  const double n = d.vector.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::DegenerateInput, "apply_concept: zero direction");
  // Composed directions keep their shorter length; everything else is unit already.
  const Vector step = d.source == DirectionSource::Composed ? d.vector : Vector(d.vector / n);
  return render(world, z + alpha * step, y);
}

ImageBuffer apply_concept(const SyntheticWorld& world, const Vector& z, int y, const ConceptVocabulary& vocab,
                          const std::string& token, double alpha) {
  return apply_concept(world, z, y, concept_direction(vocab, token), alpha);
}

Direction compose(const Direction& a, const Direction& b) {
  if (a.vector.size() != b.vector.size()) throw Error(ErrorKind::DimensionMismatch, "compose: dimensions differ");
  Direction c;
  c.vector = 0.5 * (a.vector + b.vector);
  if (!(c.vector.norm() > 1e-12)) throw Error(ErrorKind::DegenerateInput, "compose: directions cancel");
  c.id = a.id + "+" + b.id;
  c.source = DirectionSource::Composed;
  c.class_index = a.class_index;
  return c;
}

}  // namespace latlex
