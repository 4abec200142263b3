#pragma once

// Stage functions shared by the command-line tool and the acceptance run.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "latlex/io.hpp"

namespace latlex {

struct OracleConfig {
  double threshold = 0.15;
  double p_typo = 0.1;
  double p_syn = 0.1;
  double choice_temperature = 0.0;
  int annotators_per_direction = 3;
};

struct EvalConfig {
  int trials_per_concept = 3;
  int pair_count = 50;
  int pool_min_freq = 5;
  int svm_n_z = 64;
  double svm_holdout = 0.2;
};

struct PipelineConfig {
  WorldConfig world;
  int z_count = 64;
  LsdSchedule schedule;
  OracleConfig oracle;
  EvalConfig eval;
  double lambda = 100.0;
  double alpha = 6.0;
  int min_freq = 2;
  NegationMode negation = NegationMode::Signed;
  std::uint64_t seed = 1;
  /// Per-stage seed overrides; a stage without one derives its seed from `seed`.
  std::map<std::string, std::uint64_t> stage_seeds;
  std::filesystem::path out_dir = "out";
  std::filesystem::path lexicon_dir;  // empty: bundled lexicon
  int threads = 0;                    // 0: hardware concurrency

  /// derive_seed(seed, stage) unless overridden.
  std::uint64_t stage_seed(const std::string& stage) const;
  void validate() const;
};

PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json config_to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

OracleAnnotator make_oracle(const PipelineConfig& c);
Lexicon pipeline_lexicon(const PipelineConfig& c);

/// The latent code and class assigned to the i-th direction batch.
Vector batch_latent(const PipelineConfig& c, int i, std::uint64_t* z_seed = nullptr);
int batch_class(const SyntheticWorld& world, int i);

/// z_count × schedule.total() LSDs, ids "z<i>-d<j>". Runs batches in parallel;
/// output order does not depend on the thread count.
std::vector<Direction> generate_directions(const SyntheticWorld& world, const PipelineConfig& c);

/// Random unit directions paired with the same latents and classes as the LSD set.
std::vector<Direction> generate_random_directions(const SyntheticWorld& world, const PipelineConfig& c);

/// annotators_per_direction oracle annotations for every direction.
std::vector<RawAnnotation> annotate_directions(const SyntheticWorld& world, const OracleAnnotator& oracle,
                                               const std::vector<Direction>& directions, int annotators,
                                               double alpha);

struct CleanSummary {
  std::vector<CleanedAnnotation> cleaned;
  int dropped = 0;  // annotations with nothing left after cleaning
};

CleanSummary clean_corpus(const std::vector<RawAnnotation>& raw, const Lexicon& lexicon);

/// Empty class_name pools all classes.
ConceptVocabulary build_vocabulary(const std::vector<CleanedAnnotation>& cleaned,
                                   const std::map<std::string, Direction>& store, const PipelineConfig& c,
                                   const std::string& class_name);

/// Runs work(i) for i in [0, n) on up to `threads` threads.
void parallel_for(int n, int threads, const std::function<void(int)>& work);

}  // namespace latlex
