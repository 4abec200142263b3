#pragma once

// Word/direction matrices and the ridge solution E = (WᵀW + λI)⁻¹WᵀD that
// attributes one latent direction to each vocabulary token.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latlex/corpus.hpp"
#include "latlex/directions.hpp"

namespace latlex {

enum class NegationMode {
  Signed,  // one column per token, entry −1 when negated
  Split,   // negated occurrences get their own "not-<token>" column
};

struct AssembleOptions {
  int min_freq = 2;
  /// Keep only annotations of this class; empty pools all classes.
  std::string class_name;
  NegationMode negation = NegationMode::Signed;
};

struct WordMatrix {
  Matrix w;  // annotations × tokens
  std::vector<std::string> tokens;
  std::vector<int> freq;
  std::vector<std::map<std::string, int>> class_counts;  // per token
  std::vector<std::string> direction_ids;                // per row
};

struct DirectionMatrix {
  Matrix d;  // annotations × latent_dim
};

struct AssembledMatrices {
  WordMatrix words;
  DirectionMatrix directions;
};

/// Rows are annotations. Throws UnresolvedDirection or EmptyVocabulary.
AssembledMatrices assemble_matrices(const std::vector<CleanedAnnotation>& corpus,
                                    const std::map<std::string, Direction>& store, const AssembleOptions& opts = {});

struct ConceptVocabulary {
  double lambda = 100.0;
  int min_freq = 2;
  std::string class_name;  // empty when pooled
  std::vector<std::string> tokens;
  Matrix embedding;  // tokens × latent_dim, rows not renormalized
  std::vector<int> freq;
  std::vector<std::map<std::string, int>> class_counts;
  std::string corpus_hash;
  std::string directions_hash;

  /// Row of the token, or -1.
  int index(const std::string& token) const;
  int size() const { return static_cast<int>(tokens.size()); }
};

/// Residual of the normal equations, ‖(WᵀW+λI)E − WᵀD‖_F.
double normal_equation_residual(const Matrix& w, const Matrix& d, double lambda, const Matrix& e);

ConceptVocabulary distill(const WordMatrix& w, const DirectionMatrix& d, double lambda);

/// Unit copy of e_token; the raw norm is written to raw_norm when given.
Direction concept_direction(const ConceptVocabulary& vocab, const std::string& token, double* raw_norm = nullptr);

ImageBuffer apply_concept(const SyntheticWorld& world, const Vector& z, int y, const Direction& d, double alpha);
ImageBuffer apply_concept(const SyntheticWorld& world, const Vector& z, int y, const ConceptVocabulary& vocab,
                          const std::string& token, double alpha);

/// (a + b)/2, not renormalized.
Direction compose(const Direction& a, const Direction& b);

}  // namespace latlex
