#include "latlex/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace latlex {

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  if (auto it = stage_seeds.find(stage); it != stage_seeds.end()) return it->second;
  return derive_seed(seed, stage);
}

void PipelineConfig::validate() const {
  if (z_count < 1) throw Error(ErrorKind::InvalidConfig, "z_count must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidConfig, "lambda must be >= 0");
  if (!std::isfinite(alpha)) throw Error(ErrorKind::InvalidConfig, "alpha must be finite");
  if (min_freq < 1) throw Error(ErrorKind::InvalidConfig, "min_freq must be >= 1");
  if (oracle.annotators_per_direction < 1) throw Error(ErrorKind::InvalidConfig, "annotators_per_direction must be >= 1");
  if (!lexicon_dir.empty() && !std::filesystem::is_directory(lexicon_dir))
    throw Error(ErrorKind::Io, "lexicon directory not found: " + lexicon_dir.string());
  make_oracle(*this).validate();
}

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorKind::Parse, std::string("config: bad value for '") + key + "'");
  }
}

void check_keys(const Json& j, const char* where, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorKind::Parse, std::string("config: unknown key '") + key + "' in " + where);
  }
}

}  // namespace

PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "config must be a JSON object");
  check_keys(j, "config",
             {"world", "z_count", "lsd", "oracle", "eval", "lambda", "alpha", "min_freq", "negation", "seed",
              "stage_seeds", "out_dir", "lexicon_dir", "threads"});
  PipelineConfig c;
  if (j.contains("world")) c.world = world_config_from_json(j["world"]);
  read_if(j, "z_count", c.z_count);
  if (j.contains("lsd")) {
    const Json& l = j["lsd"];
    check_keys(l, "lsd",
               {"per_layer", "extra_orthogonal", "step_size", "max_iterations", "tolerance", "backtrack_factor",
                "max_halvings"});
    read_if(l, "per_layer", c.schedule.per_layer);
    read_if(l, "extra_orthogonal", c.schedule.extra_orthogonal_count);
    read_if(l, "step_size", c.schedule.options.step_size);
    read_if(l, "max_iterations", c.schedule.options.max_iterations);
    read_if(l, "tolerance", c.schedule.options.tolerance);
    read_if(l, "backtrack_factor", c.schedule.options.backtrack_factor);
    read_if(l, "max_halvings", c.schedule.options.max_halvings);
  }
  if (j.contains("oracle")) {
    const Json& o = j["oracle"];
    check_keys(o, "oracle", {"threshold", "p_typo", "p_syn", "choice_temperature", "annotators_per_direction"});
    read_if(o, "threshold", c.oracle.threshold);
    read_if(o, "p_typo", c.oracle.p_typo);
    read_if(o, "p_syn", c.oracle.p_syn);
    read_if(o, "choice_temperature", c.oracle.choice_temperature);
    read_if(o, "annotators_per_direction", c.oracle.annotators_per_direction);
  }
  if (j.contains("eval")) {
    const Json& e = j["eval"];
    check_keys(e, "eval", {"trials_per_concept", "pair_count", "pool_min_freq", "svm_n_z", "svm_holdout"});
    read_if(e, "trials_per_concept", c.eval.trials_per_concept);
    read_if(e, "pair_count", c.eval.pair_count);
    read_if(e, "pool_min_freq", c.eval.pool_min_freq);
    read_if(e, "svm_n_z", c.eval.svm_n_z);
    read_if(e, "svm_holdout", c.eval.svm_holdout);
  }
  read_if(j, "lambda", c.lambda);
  read_if(j, "alpha", c.alpha);
  read_if(j, "min_freq", c.min_freq);
  if (j.contains("negation")) {
    const std::string n = j["negation"].get<std::string>();
    if (n == "signed") c.negation = NegationMode::Signed;
    else if (n == "split") c.negation = NegationMode::Split;
    else throw Error(ErrorKind::InvalidConfig, "negation must be 'signed' or 'split'");
  }
  read_if(j, "seed", c.seed);
  read_if(j, "stage_seeds", c.stage_seeds);
  std::string out_dir = c.out_dir.string(), lexicon_dir;
  read_if(j, "out_dir", out_dir);
  read_if(j, "lexicon_dir", lexicon_dir);
  c.out_dir = out_dir;
  if (!lexicon_dir.empty()) {
    c.lexicon_dir = lexicon_dir;
    if (c.lexicon_dir.is_relative() && !base_dir.empty()) c.lexicon_dir = base_dir / c.lexicon_dir;
  }
  read_if(j, "threads", c.threads);
  c.validate();
  return c;
}

Json config_to_json(const PipelineConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["stage_seeds"] = c.stage_seeds;
  j["world"] = world_config_to_json(c.world);
  j["z_count"] = c.z_count;
  j["lsd"] = {{"per_layer", c.schedule.per_layer},
              {"extra_orthogonal", c.schedule.extra_orthogonal_count},
              {"step_size", c.schedule.options.step_size},
              {"max_iterations", c.schedule.options.max_iterations},
              {"tolerance", c.schedule.options.tolerance},
              {"backtrack_factor", c.schedule.options.backtrack_factor},
              {"max_halvings", c.schedule.options.max_halvings}};
  j["oracle"] = {{"threshold", c.oracle.threshold},
                 {"p_typo", c.oracle.p_typo},
                 {"p_syn", c.oracle.p_syn},
                 {"choice_temperature", c.oracle.choice_temperature},
                 {"annotators_per_direction", c.oracle.annotators_per_direction}};
  j["eval"] = {{"trials_per_concept", c.eval.trials_per_concept},
               {"pair_count", c.eval.pair_count},
               {"pool_min_freq", c.eval.pool_min_freq},
               {"svm_n_z", c.eval.svm_n_z},
               {"svm_holdout", c.eval.svm_holdout}};
  j["lambda"] = c.lambda;
  j["alpha"] = c.alpha;
  j["min_freq"] = c.min_freq;
  j["negation"] = c.negation == NegationMode::Signed ? "signed" : "split";
  j["out_dir"] = c.out_dir.string();
  j["lexicon_dir"] = c.lexicon_dir.string();
  return j;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

OracleAnnotator make_oracle(const PipelineConfig& c) {
  OracleAnnotator o = OracleAnnotator::with_defaults();
  o.threshold = c.oracle.threshold;
  o.p_typo = c.oracle.p_typo;
  o.p_syn = c.oracle.p_syn;
  o.choice_temperature = c.oracle.choice_temperature;
  o.seed = c.stage_seed("oracle");
  return o;
}

Lexicon pipeline_lexicon(const PipelineConfig& c) {
  return c.lexicon_dir.empty() ? Lexicon::bundled() : Lexicon::load(c.lexicon_dir);
}

void parallel_for(int n, int threads, const std::function<void(int)>& work) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

Vector batch_latent(const PipelineConfig& c, int i, std::uint64_t* z_seed) {
  const std::uint64_t s = derive_seed(c.stage_seed("directions"), static_cast<std::uint64_t>(i));
  if (z_seed) *z_seed = s;
  Rng rng(s);
  return rng.normal_vector(c.world.latent_dim);
}

int batch_class(const SyntheticWorld& world, int i) { return i % world.class_count(); }

namespace {

std::string direction_id(int batch, int j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "z%03d-d%02d", batch, j);
  return buf;
}

}  // namespace

std::vector<Direction> generate_directions(const SyntheticWorld& world, const PipelineConfig& c) {
  std::vector<std::vector<Direction>> batches(static_cast<std::size_t>(c.z_count));
  parallel_for(c.z_count, c.threads, [&](int i) {
    std::uint64_t z_seed = 0;
    const Vector z = batch_latent(c, i, &z_seed);
    auto set = generate_lsd_set(world, z, batch_class(world, i), c.schedule, derive_seed(z_seed, "lsd"));
    for (std::size_t j = 0; j < set.size(); ++j) {
      set[j].id = direction_id(i, static_cast<int>(j));
      set[j].z_seed = z_seed;
    }
    batches[static_cast<std::size_t>(i)] = std::move(set);
  });
  std::vector<Direction> out;
  for (auto& b : batches) std::move(b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<Direction> generate_random_directions(const SyntheticWorld& world, const PipelineConfig& c) {
  const int per_z = c.schedule.total();
  std::vector<Direction> out =
      random_directions(c.z_count * per_z, world.latent_dim(), c.stage_seed("random-directions"));
  for (int i = 0; i < c.z_count; ++i) {
    std::uint64_t z_seed = 0;
    const Vector z = batch_latent(c, i, &z_seed);
    for (int j = 0; j < per_z; ++j) {
      Direction& d = out[static_cast<std::size_t>(i * per_z + j)];
      d.id = direction_id(i, j);
      d.z = z;
      d.z_seed = z_seed;
      d.class_index = batch_class(world, i);
    }
  }
  return out;
}

std::vector<RawAnnotation> annotate_directions(const SyntheticWorld& world, const OracleAnnotator& oracle,
                                               const std::vector<Direction>& directions, int annotators,
                                               double alpha) {
  if (annotators < 1) throw Error(ErrorKind::InvalidConfig, "annotators must be >= 1");
  std::vector<RawAnnotation> out;
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const Direction& d = directions[i];
    if (d.z.size() != world.latent_dim())
      throw Error(ErrorKind::DimensionMismatch, "direction " + d.id + " has no latent of the right size");
    for (int r = 0; r < annotators; ++r) {
      const auto stream = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(annotators) + r;
      RawAnnotation a = oracle_annotate(world, oracle, d.z, d.class_index, d.vector, alpha, stream);
      a.direction_id = d.id;
      a.annotator_id = "oracle-" + std::to_string(r);
      out.push_back(std::move(a));
    }
  }
  return out;
}

CleanSummary clean_corpus(const std::vector<RawAnnotation>& raw, const Lexicon& lexicon) {
  CleanSummary s;
  for (const auto& r : raw) {
    try {
      s.cleaned.push_back(clean(r, lexicon));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyResult) throw;
      ++s.dropped;
    }
  }
  return s;
}

ConceptVocabulary build_vocabulary(const std::vector<CleanedAnnotation>& cleaned,
                                   const std::map<std::string, Direction>& store, const PipelineConfig& c,
                                   const std::string& class_name) {
  AssembleOptions opts;
  opts.min_freq = c.min_freq;
  opts.class_name = class_name;
  opts.negation = c.negation;
  const AssembledMatrices m = assemble_matrices(cleaned, store, opts);
  ConceptVocabulary v = distill(m.words, m.directions, c.lambda);
  v.min_freq = c.min_freq;
  v.class_name = class_name;
  return v;
}

}  // namespace latlex
