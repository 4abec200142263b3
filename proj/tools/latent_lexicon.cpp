#include <cstdio>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "latlex/pipeline.hpp"
#include "latlex/server.hpp"

namespace fs = std::filesystem;
using namespace latlex;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::string class_name;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline config (JSON)");
  cmd->add_option("--seed", c.seed, "top-level seed");
  cmd->add_option("--out", c.out, "output file or directory");
  cmd->add_option("--lambda", c.lambda, "ridge regularization");
  cmd->add_option("--alpha", c.alpha, "edit strength");
  cmd->add_option("--class", c.class_name, "class name ('all' pools classes)");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? config_from_json(Json::object()) : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.lambda) cfg.lambda = *c.lambda;
  if (c.alpha) cfg.alpha = *c.alpha;
  cfg.validate();
  return cfg;
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

struct Paths {
  fs::path dir;
  fs::path world() const { return dir / "world.json"; }
  fs::path directions() const { return dir / "directions.jsonl"; }
  fs::path random_directions() const { return dir / "random_directions.jsonl"; }
  fs::path raw() const { return dir / "raw.jsonl"; }
  fs::path random_raw() const { return dir / "random_raw.jsonl"; }
  fs::path cleaned() const { return dir / "cleaned.jsonl"; }
  fs::path vocab_dir() const { return dir / "vocab"; }
  fs::path reports() const { return dir / "reports"; }
  fs::path pairs() const { return dir / "pairs"; }
};

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

std::string vocab_file_name(const std::string& class_name) {
  return (class_name.empty() ? std::string("all") : class_name) + ".json";
}

// ---- stages ----

std::string stage_gen_directions(const SyntheticWorld& world, const PipelineConfig& cfg, const std::string& source,
                                 const fs::path& out) {
  std::vector<Direction> dirs;
  if (source == "lsd") {
    dirs = generate_directions(world, cfg);
  } else if (source == "random") {
    dirs = generate_random_directions(world, cfg);
  } else if (source == "pca") {
    const int per_class = cfg.z_count * cfg.schedule.total() / world.class_count();
    // Components past the latent dimension pull back to dependent directions.
    const int n = std::min(per_class, world.latent_dim());
    for (int y = 0; y < world.class_count(); ++y) {
      auto part = pca_baseline_directions(world, y, n, std::max(4 * world.latent_dim(), n),
                                          derive_seed(cfg.stage_seed("pca"), static_cast<std::uint64_t>(y)));
      for (std::size_t j = 0; j < part.size(); ++j) {
        part[j].id = "pca-" + world.class_names()[static_cast<std::size_t>(y)] + "-" + std::to_string(j);
        part[j].z = batch_latent(cfg, static_cast<int>(j), &part[j].z_seed);
      }
      std::move(part.begin(), part.end(), std::back_inserter(dirs));
    }
  } else {
    throw CLI::ValidationError("--source", "must be lsd, random or pca");
  }
  std::vector<Json> records;
  std::map<std::string, int> counts;
  for (const auto& d : dirs) {
    records.push_back(direction_to_json(d, &world));
    counts[std::string(to_string(d.source)) + (d.layer ? "/layer" + std::to_string(*d.layer) : "")]++;
  }
  write_file(out, to_jsonl(records));
  std::string summary = "gen-directions: " + std::to_string(dirs.size()) + " directions";
  for (const auto& [k, n] : counts) summary += " " + k + "=" + std::to_string(n);
  return summary;
}

std::string stage_render_pairs(const SyntheticWorld& world, const PipelineConfig& cfg, const fs::path& directions,
                               const fs::path& out, int limit) {
  const auto dirs = read_directions(directions, &world);
  Json index = Json::array();
  int written = 0;
  for (const auto& d : dirs) {
    if (limit >= 0 && written >= limit) break;
    const std::string before = d.id + "_before.ppm", after = d.id + "_after.ppm";
    write_file(out / before, encode_pnm(render(world, d.z, d.class_index)));
    write_file(out / after, encode_pnm(apply_concept(world, d.z, d.class_index, d, cfg.alpha)));
    index.push_back({{"id", d.id}, {"class", world.class_names()[static_cast<std::size_t>(d.class_index)]},
                     {"before", before}, {"after", after}});
    ++written;
  }
  write_json(out / "index.json", Json{{"alpha", cfg.alpha}, {"pairs", index}});
  return "render-pairs: " + std::to_string(written) + " pairs at alpha " + std::to_string(cfg.alpha);
}

std::string stage_annotate(const SyntheticWorld& world, const PipelineConfig& cfg, const fs::path& directions,
                           const fs::path& out) {
  const auto dirs = read_directions(directions, &world);
  const auto raw = annotate_directions(world, make_oracle(cfg), dirs, cfg.oracle.annotators_per_direction, cfg.alpha);
  std::vector<Json> records;
  int no_change = 0;
  for (const auto& r : raw) {
    records.push_back(raw_to_json(r));
    no_change += r.text == "no change";
  }
  write_file(out, to_jsonl(records));
  return "annotate-oracle: " + std::to_string(raw.size()) + " annotations, " + std::to_string(no_change) +
         " without a visible change";
}

std::string stage_clean(const PipelineConfig& cfg, const fs::path& raw_path, const fs::path& out) {
  const Lexicon lexicon = pipeline_lexicon(cfg);
  const auto summary = clean_corpus(read_raw(raw_path), lexicon);
  std::vector<Json> records;
  for (const auto& c : summary.cleaned) records.push_back(cleaned_to_json(c));
  write_file(out, to_jsonl(records));
  return "clean: " + std::to_string(summary.cleaned.size()) + " kept, " + std::to_string(summary.dropped) +
         " dropped (no content words)";
}

std::string stage_distill(const SyntheticWorld& world, const PipelineConfig& cfg, const fs::path& cleaned_path,
                          const fs::path& directions_path, const std::string& only_class, const fs::path& out_dir) {
  const auto cleaned = read_cleaned(cleaned_path);
  const auto store = direction_store(read_directions(directions_path, &world));
  const std::string corpus_hash = file_hash(cleaned_path), dir_hash = file_hash(directions_path);
  std::vector<std::string> classes;
  if (only_class.empty()) {
    classes = world.class_names();
    classes.push_back("");
  } else {
    if (only_class != "all" && world.class_index(only_class) < 0)
      throw Error(ErrorKind::InvalidConfig, "unknown class '" + only_class + "'");
    classes.push_back(only_class == "all" ? "" : only_class);
  }
  std::string summary = "distill: lambda " + std::to_string(cfg.lambda);
  for (const auto& cls : classes) {
    ConceptVocabulary v = build_vocabulary(cleaned, store, cfg, cls);
    v.corpus_hash = corpus_hash;
    v.directions_hash = dir_hash;
    write_json(out_dir / vocab_file_name(cls), vocab_to_json(v));
    summary += " " + (cls.empty() ? std::string("all") : cls) + "=" + std::to_string(v.size());
  }
  return summary + " tokens";
}

std::string stage_stats(const fs::path& cleaned_path, const fs::path& out) {
  const auto stats = corpus_statistics(read_cleaned(cleaned_path));
  write_json(out, statistics_to_json(stats));
  return "stats: " + std::to_string(stats.annotations) + " annotations, " + std::to_string(stats.overall.distinct) +
         " distinct tokens, " + std::to_string(stats.overall.repeated) + " repeated";
}

Json diversity_json(const std::vector<RawAnnotation>& raw) {
  std::vector<std::string> texts;
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& r : raw) {
    texts.push_back(r.text);
    groups[r.direction_id].push_back(r.text);
  }
  Json j;
  j["annotations"] = raw.size();
  for (int n = 1; n <= 4; ++n) j[std::to_string(n) + "-grams"] = ngram_diversity(texts, n);
  std::vector<std::vector<std::string>> grouped;
  for (auto& [id, g] : groups) grouped.push_back(g);
  try {
    const auto bleu = inter_annotator_bleu(grouped);
    j["inter_annotator_bleu"] = bleu.score;
    j["bleu_scored"] = bleu.scored;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientReferences) throw;
    j["inter_annotator_bleu"] = nullptr;
  }
  return j;
}

std::string stage_diversity(const std::vector<fs::path>& inputs, const fs::path& out) {
  Json j = Json::object();
  std::string summary = "diversity:";
  for (const auto& p : inputs) {
    const Json d = diversity_json(read_raw(p));
    summary += " " + p.filename().string() + " 1-grams=" + std::to_string(d["1-grams"].get<std::size_t>());
    j[p.filename().string()] = d;
  }
  write_json(out, j);
  return summary;
}

ConceptVocabulary load_class_vocab(const fs::path& dir, const std::string& cls) {
  return read_vocab(dir / vocab_file_name(cls));
}

std::vector<int> eval_classes(const SyntheticWorld& world, const std::string& only_class) {
  if (only_class.empty() || only_class == "all") {
    std::vector<int> all(static_cast<std::size_t>(world.class_count()));
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  const int y = world.class_index(only_class);
  if (y < 0) throw Error(ErrorKind::InvalidConfig, "unknown class '" + only_class + "'");
  return {y};
}

std::string stage_eval(const SyntheticWorld& world, const PipelineConfig& cfg, const std::string& experiment,
                       const fs::path& vocab_dir, const std::string& only_class, const fs::path& out) {
  const OracleAnnotator oracle = make_oracle(cfg);
  const std::uint64_t seed = cfg.stage_seed("eval-" + experiment);
  char line[256];
  if (experiment == "recovery") {
    const auto r = recovery_report(load_class_vocab(vocab_dir, ""), world);
    write_json(out, recovery_to_json(r));
    std::snprintf(line, sizeof line, "eval recovery: %d/%d concepts recovered, median |cos| %.3f", r.correct_count,
                  world.concept_count(), r.median_diagonal);
    return line;
  }
  if (experiment == "svm") {
    const ConceptVocabulary vocab = load_class_vocab(vocab_dir, "");
    Json per = Json::array();
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < world.concept_count(); ++k) {
      const std::string& token = world.concept_tokens()[static_cast<std::size_t>(k)];
      if (vocab.index(token) < 0) {
        per.push_back({{"token", token}, {"accuracy", nullptr}, {"note", "not in vocabulary"}});
        continue;
      }
      int y = 0;
      while (!world.concept_in_class(k, y)) ++y;
      SvmConceptOptions o;
      o.n_z = cfg.eval.svm_n_z;
      o.holdout = cfg.eval.svm_holdout;
      o.alpha = cfg.alpha;
      o.pool_min_freq = cfg.eval.pool_min_freq;
      o.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
      const auto r = svm_concept_accuracy(world, vocab, token, y, o);
      per.push_back({{"token", token},
                     {"class", world.class_names()[static_cast<std::size_t>(y)]},
                     {"train", r.train_examples},
                     {"test", r.test_examples},
                     {"accuracy", r.accuracy},
                     {"degenerate", r.degenerate}});
      sum += r.accuracy;
      ++count;
    }
    if (count == 0) throw Error(ErrorKind::VocabularyTooSmall, "no world concept in the vocabulary");
    write_json(out, Json{{"experiment", "svm"}, {"seed", seed}, {"chance", 0.5}, {"per_concept", per},
                         {"mean_accuracy", sum / count}});
    std::snprintf(line, sizeof line, "eval svm: mean held-out accuracy %.3f over %d concepts", sum / count, count);
    return line;
  }

  std::vector<ExperimentReport> parts;
  Json config;
  for (int y : eval_classes(world, only_class)) {
    const std::string& cls = world.class_names()[static_cast<std::size_t>(y)];
    const ConceptVocabulary vocab = load_class_vocab(vocab_dir, cls);
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(y));
    try {
      if (experiment == "compose") {
        CompositionOptions o{cfg.eval.pair_count, cfg.alpha, cfg.eval.pool_min_freq, s};
        config = {{"pair_count", o.pair_count}, {"alpha", o.alpha}, {"pool_min_freq", o.pool_min_freq}};
        parts.push_back(run_composition(world, vocab, oracle, y, o));
      } else {
        ForcedChoiceOptions o{cfg.eval.trials_per_concept, cfg.alpha, cfg.eval.pool_min_freq, s};
        config = {{"trials_per_concept", o.trials_per_concept}, {"alpha", o.alpha}, {"pool_min_freq", o.pool_min_freq}};
        parts.push_back(experiment == "generalize-z" ? run_generalize_z(world, vocab, oracle, y, o)
                                                     : run_generalize_y(world, vocab, oracle, y, o));
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::VocabularyTooSmall) throw;
      std::fprintf(stderr, "warning: class %s skipped: %s\n", cls.c_str(), e.what());
    }
  }
  if (parts.empty()) throw Error(ErrorKind::VocabularyTooSmall, "no class vocabulary is large enough");
  ExperimentReport merged = merge_reports(parts);
  merged.seed = seed;
  Json j = report_to_json(merged, config);
  write_json(out, j);
  std::vector<Json> trials;
  for (const auto& t : merged.trials) trials.push_back(trial_to_json(t));
  write_file(fs::path(out).replace_extension(".trials.jsonl"), to_jsonl(trials));
  std::snprintf(line, sizeof line, "eval %s: accuracy %.3f (%d/%d), p=%.3g", experiment.c_str(),
                merged.overall.accuracy, merged.overall.correct, merged.overall.trials, merged.p_value);
  std::string s = line;
  if (merged.shared) {
    std::snprintf(line, sizeof line, ", shared %.3f, unshared %.3f", merged.shared->accuracy,
                  merged.unshared->accuracy);
    s += line;
  }
  if (merged.histogram) {
    const auto& h = *merged.histogram;
    std::snprintf(line, sizeof line, ", choices target=%d a+c=%d b+d=%d c+d=%d", h[0], h[1], h[2], h[3]);
    s += line;
  }
  return s;
}

int run(int argc, char** argv) {
  CLI::App app{"Concept vocabularies for a synthetic generator's latent space"};
  app.require_subcommand(1);

  Common common;
  std::string source = "lsd", directions, input, cleaned, vocab, raw_out, host = "127.0.0.1", ui_dir;
  std::vector<std::string> inputs;
  int limit = -1, port = 8080, assignments = 1;

  auto* gen = app.add_subcommand("gen-directions", "optimize layer-selective directions");
  add_common(gen, common);
  gen->add_option("--source", source, "lsd, random or pca");

  auto* pairs = app.add_subcommand("render-pairs", "write before/after images for each direction");
  add_common(pairs, common);
  pairs->add_option("--directions", directions);
  pairs->add_option("--limit", limit, "render at most this many pairs");

  auto* annotate = app.add_subcommand("annotate-oracle", "describe each direction with the oracle annotator");
  add_common(annotate, common);
  annotate->add_option("--directions", directions);

  auto* clean_cmd = app.add_subcommand("clean", "normalize raw annotations into signed tokens");
  add_common(clean_cmd, common);
  clean_cmd->add_option("--in", input, "raw corpus");

  auto* distill_cmd = app.add_subcommand("distill", "solve for one direction per vocabulary token");
  add_common(distill_cmd, common);
  distill_cmd->add_option("--cleaned", cleaned);
  distill_cmd->add_option("--directions", directions);

  auto* stats = app.add_subcommand("stats", "token counts per class");
  add_common(stats, common);
  stats->add_option("--cleaned", cleaned);

  auto* diversity = app.add_subcommand("diversity", "n-gram counts and inter-annotator BLEU of raw corpora");
  add_common(diversity, common);
  diversity->add_option("--in", inputs, "raw corpora");

  auto* eval = app.add_subcommand("eval", "evaluation protocols");
  eval->require_subcommand(1);
  std::string experiment;
  for (const char* name : {"generalize-z", "generalize-y", "compose", "svm", "recovery"}) {
    auto* sub = eval->add_subcommand(name);
    add_common(sub, common);
    sub->add_option("--vocab", vocab, "vocabulary directory");
    sub->callback([&experiment, name] { experiment = name; });
  }

  auto* serve = app.add_subcommand("serve", "serve annotation tasks over HTTP");
  add_common(serve, common);
  serve->add_option("--directions", directions);
  serve->add_option("--raw-out", raw_out, "raw corpus to append to");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--ui", ui_dir, "static UI directory");
  serve->add_option("--assignments", assignments, "annotations wanted per task");
  serve->add_option("--limit", limit, "serve only the first N directions");

  auto* pipeline = app.add_subcommand("pipeline", "run every stage");
  add_common(pipeline, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const PipelineConfig cfg = resolve(common);
  const SyntheticWorld world = SyntheticWorld::build(cfg.world);
  const Paths paths{cfg.out_dir};
  const fs::path dir_file = or_default(directions, paths.directions());
  auto say = [](const std::string& s) { std::cout << s << "\n"; };

  if (*gen) {
    const fs::path fallback = source == "lsd" ? paths.directions() : paths.dir / (source + "_directions.jsonl");
    const fs::path target = or_default(common.out, fallback);
    write_json(target.parent_path() / "world.json", world_to_json(world));
    say(stage_gen_directions(world, cfg, source, target));
  } else if (*pairs) {
    say(stage_render_pairs(world, cfg, dir_file, or_default(common.out, paths.pairs()), limit));
  } else if (*annotate) {
    say(stage_annotate(world, cfg, dir_file, or_default(common.out, paths.raw())));
  } else if (*clean_cmd) {
    say(stage_clean(cfg, or_default(input, paths.raw()), or_default(common.out, paths.cleaned())));
  } else if (*distill_cmd) {
    say(stage_distill(world, cfg, or_default(cleaned, paths.cleaned()), dir_file, common.class_name,
                      or_default(common.out, paths.vocab_dir())));
  } else if (*stats) {
    say(stage_stats(or_default(cleaned, paths.cleaned()), or_default(common.out, paths.reports() / "stats.json")));
  } else if (*diversity) {
    std::vector<fs::path> in;
    for (const auto& s : inputs) in.emplace_back(s);
    if (in.empty()) in.push_back(paths.raw());
    say(stage_diversity(in, or_default(common.out, paths.reports() / "diversity.json")));
  } else if (*eval) {
    say(stage_eval(world, cfg, experiment, or_default(vocab, paths.vocab_dir()), common.class_name,
                   or_default(common.out, paths.reports() / (experiment + ".json"))));
  } else if (*serve) {
    auto dirs = read_directions(dir_file, &world);
    if (limit >= 0 && static_cast<std::size_t>(limit) < dirs.size()) dirs.resize(static_cast<std::size_t>(limit));
    AnnotationService service(world, dirs, cfg.alpha, or_default(raw_out, paths.dir / "human_raw.jsonl"), assignments);
    std::cout << "serving " << dirs.size() << " tasks on http://" << host << ":" << port << std::endl;
    service.listen(host, port, ui_dir);
  } else if (*pipeline) {
    const fs::path out = common.out.empty() ? paths.dir : fs::path(common.out);
    const Paths p{out};
    write_json(p.world(), world_to_json(world));
    say(stage_gen_directions(world, cfg, "lsd", p.directions()));
    say(stage_gen_directions(world, cfg, "random", p.random_directions()));
    say(stage_render_pairs(world, cfg, p.directions(), p.pairs(), 20));
    say(stage_annotate(world, cfg, p.directions(), p.raw()));
    say(stage_annotate(world, cfg, p.random_directions(), p.random_raw()));
    say(stage_clean(cfg, p.raw(), p.cleaned()));
    say(stage_distill(world, cfg, p.cleaned(), p.directions(), "", p.vocab_dir()));
    say(stage_stats(p.cleaned(), p.reports() / "stats.json"));
    say(stage_diversity({p.raw(), p.random_raw()}, p.reports() / "diversity.json"));
    for (const char* e : {"generalize-z", "generalize-y", "compose", "svm", "recovery"})
      say(stage_eval(world, cfg, e, p.vocab_dir(), "", p.reports() / (std::string(e) + ".json")));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
