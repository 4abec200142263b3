#pragma once

// Oracle annotator, forced-choice protocols, linear concept classifiers and
// planted-direction recovery.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latlex/corpus.hpp"
#include "latlex/distill.hpp"
#include "latlex/rng.hpp"

namespace latlex {

struct OracleAnnotator {
  double threshold = 0.15;
  double p_typo = 0.1;
  double p_syn = 0.1;
  std::uint64_t seed = 0;
  /// 0 picks the argmax; otherwise choices are sampled with softmax(score / T).
  double choice_temperature = 0.0;
  std::map<std::string, std::vector<std::string>> synonyms;
  /// "{}" marks where the change list goes.
  std::vector<std::string> templates;

  static OracleAnnotator with_defaults();
  void validate() const;
};

/// Concepts whose visible attribute moves by more than the threshold, with
/// the sign of the move, ordered by |Δ| descending.
std::vector<SignedToken> oracle_changes(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z,
                                        int y, const Vector& d, double alpha);

/// Free-text description of the change from z to z + αd. `stream` selects
/// the random stream (typos, synonyms, template).
RawAnnotation oracle_annotate(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z, int y,
                              const Vector& d, double alpha, std::uint64_t stream);

/// One character deleted, inserted or substituted; avoids dictionary words.
std::string inject_typo(const std::string& word, Rng& rng, const Lexicon& lexicon);

/// Concept index of a token in the world, or -1.
int concept_index(const SyntheticWorld& world, const std::string& token);

/// Σ over targets of sign · Δ(visible attribute) for each candidate.
std::vector<double> oracle_scores(const SyntheticWorld& world, const Vector& z, int y,
                                  const std::vector<SignedToken>& targets, const std::vector<Direction>& candidates,
                                  double alpha);

int oracle_choose(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z, int y,
                  const std::vector<SignedToken>& targets, const std::vector<Direction>& candidates, double alpha,
                  Rng* rng = nullptr);

struct ForcedChoiceTrial {
  std::vector<std::string> targets;
  std::vector<std::string> candidate_labels;  // presentation order
  int target_position = 0;
  int class_index = 0;
  Vector z;
};

struct TrialResult {
  ForcedChoiceTrial trial;
  int chosen = 0;
  bool correct = false;
  std::vector<double> scores;
};

struct Accuracy {
  std::string label;
  int trials = 0;
  int correct = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

Accuracy make_accuracy(std::string label, int correct, int trials);

/// Exact (Clopper-Pearson) two-sided interval.
std::pair<double, double> binomial_interval(int successes, int trials, double confidence = 0.95);

/// P(X ≥ successes) for X ~ Binomial(trials, p).
double binomial_upper_tail(int successes, int trials, double p);

struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  double alpha = 6.0;
  std::vector<Accuracy> per_concept;
  Accuracy overall;
  double p_value = 1.0;  // against chance
  double chance = 0.25;
  std::optional<Accuracy> shared;
  std::optional<Accuracy> unshared;
  /// Composition only: choices of {target, a∘c, b∘d, c∘d}.
  std::optional<std::array<int, 4>> histogram;
  std::vector<TrialResult> trials;
};

struct ForcedChoiceOptions {
  int trials_per_concept = 3;
  double alpha = 6.0;
  int pool_min_freq = 5;
  std::uint64_t seed = 0;
};

/// Vocabulary tokens eligible as distractors (frequency ≥ pool_min_freq).
std::vector<std::string> distractor_pool(const ConceptVocabulary& vocab, int min_freq);

/// Trials in class y with fresh z per trial.
ExperimentReport run_generalize_z(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                  const OracleAnnotator& oracle, int y, const ForcedChoiceOptions& opts);

/// Vocabulary trained on class y_train; each trial renders in a random other class.
ExperimentReport run_generalize_y(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                  const OracleAnnotator& oracle, int y_train, const ForcedChoiceOptions& opts);

struct CompositionOptions {
  int pair_count = 50;
  double alpha = 6.0;
  int pool_min_freq = 5;
  std::uint64_t seed = 0;
};

ExperimentReport run_composition(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                 const OracleAnnotator& oracle, int y, const CompositionOptions& opts);

/// Merges per-class reports of one experiment into a single report.
ExperimentReport merge_reports(const std::vector<ExperimentReport>& parts);

struct LinearClassifier {
  Vector weights;  // over standardized pixels
  double bias = 0.0;
  Vector mean;
  Vector scale;
  double objective = 0.0;
  int iterations = 0;

  double decision(const Vector& pixels) const;
  int predict(const Vector& pixels) const { return decision(pixels) >= 0.0 ? 1 : -1; }
};

struct SvmOptions {
  double regularization = 1e-3;
  int epochs = 300;
  double step = 1.0;
};

/// Rows are examples. L2-regularized hinge loss by full-batch subgradient
/// descent; the objective never increases between accepted iterates.
LinearClassifier train_linear_classifier(const Matrix& positives, const Matrix& negatives, const SvmOptions& opts = {});

double linear_objective(const LinearClassifier& clf, const Matrix& positives, const Matrix& negatives,
                        double regularization);

struct SvmConceptOptions {
  int n_z = 64;
  double holdout = 0.2;
  double alpha = 6.0;
  int pool_min_freq = 5;
  std::uint64_t seed = 0;
  SvmOptions svm;
};

struct SvmConceptResult {
  std::string token;
  int class_index = 0;
  int train_examples = 0;
  int test_examples = 0;
  double accuracy = 0.5;
  bool degenerate = false;
};

/// Held-out accuracy of a classifier separating G(z + α d_token) from
/// G(z + α d_j), d_j another vocabulary direction drawn per sample.
SvmConceptResult svm_concept_accuracy(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                      const std::string& token, int y, const SvmConceptOptions& opts);

struct RecoveryReport {
  std::vector<std::string> concepts;
  Matrix cosines;  // |cos(e_k, u_j)|, rows by concept k
  std::vector<bool> correct;
  std::vector<std::string> unmatched;
  int correct_count = 0;
  double median_diagonal = 0.0;
};

RecoveryReport recovery_report(const ConceptVocabulary& vocab, const SyntheticWorld& world);

}  // namespace latlex
