#include "latlex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latlex {

OracleAnnotator OracleAnnotator::with_defaults() {
  OracleAnnotator o;
  o.synonyms = {
      {"light", {"lights", "lighting", "brightness"}},
      {"large", {"big", "huge"}},
      {"glow", {"glowing", "glows", "shine"}},
      {"red", {"reddish", "crimson"}},
      {"tree", {"trees", "forest"}},
      {"cloud", {"clouds", "cloudy"}},
      {"snow", {"snowy", "snowing"}},
      {"water", {"waters", "pond"}},
  };
  o.templates = {"{}", "the image shows {}", "now there is {}", "the picture has {}", "now the image has {}",
                 "the scene has {}"};
  return o;
}

void OracleAnnotator::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidConfig, "oracle threshold must be in (0,1)");
  if (!(p_typo >= 0.0 && p_typo <= 1.0) || !(p_syn >= 0.0 && p_syn <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "oracle rates must be in [0,1]");
  if (!(choice_temperature >= 0.0)) throw Error(ErrorKind::InvalidConfig, "choice temperature must be >= 0");
  if (templates.empty()) throw Error(ErrorKind::InvalidConfig, "oracle needs at least one template");
}

namespace {

Vector step_vector(const Direction& d) {
  if (d.source == DirectionSource::Composed) return d.vector;
  const double n = d.vector.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::DegenerateInput, "zero candidate direction");
  return d.vector / n;
}

std::string fill_template(const std::string& tpl, const std::string& body) {
  const auto pos = tpl.find("{}");
  if (pos == std::string::npos) return tpl + " " + body;
  return tpl.substr(0, pos) + body + tpl.substr(pos + 2);
}

}  // namespace

std::vector<SignedToken> oracle_changes(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z,
                                        int y, const Vector& d, double alpha) {
  const Vector delta = visible_attributes(world, z + alpha * d, y) - visible_attributes(world, z, y);
  std::vector<int> order(static_cast<std::size_t>(delta.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(delta[a]) > std::abs(delta[b]); });
  std::vector<SignedToken> out;
  for (int k : order) {
    if (!world.concept_in_class(k, y) || !(std::abs(delta[k]) > oracle.threshold)) continue;
    out.push_back({world.concept_tokens()[k], delta[k] > 0 ? +1 : -1});
  }
  return out;
}

std::string inject_typo(const std::string& word, Rng& rng, const Lexicon& lexicon) {
  static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  std::string candidate = word;
  for (int attempt = 0; attempt < 64; ++attempt) {
    candidate = word;
    const auto kind = rng.below(word.size() > 2 ? 3 : 2);
    const auto pos = static_cast<std::size_t>(rng.below(word.size()));
    const char letter = letters[rng.below(letters.size())];
    if (kind == 0) {
      candidate.insert(candidate.begin() + static_cast<std::ptrdiff_t>(pos), letter);
    } else if (kind == 1) {
      candidate[pos] = letter;
    } else {
      candidate.erase(pos, 1);
    }
    if (candidate != word && !lexicon.in_dictionary(candidate)) return candidate;
  }
  return candidate;
}

RawAnnotation oracle_annotate(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z, int y,
                              const Vector& d, double alpha, std::uint64_t stream) {
  oracle.validate();
  Rng rng(derive_seed(oracle.seed, stream));
  const Lexicon& lexicon = Lexicon::bundled();

  std::vector<std::string> phrases;
  for (const auto& change : oracle_changes(world, oracle, z, y, d, alpha)) {
    std::string word = change.token;
    const double u_syn = rng.uniform();
    const double u_typo = rng.uniform();
    if (u_syn < oracle.p_syn) {
      if (auto it = oracle.synonyms.find(word); it != oracle.synonyms.end() && !it->second.empty())
        word = it->second[rng.below(it->second.size())];
    }
    if (u_typo < oracle.p_typo) word = inject_typo(word, rng, lexicon);
    phrases.push_back(std::string(change.sign > 0 ? "more " : "less ") + word);
  }

  std::string body;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i > 0) body += (i + 1 == phrases.size()) ? " and " : ", ";
    body += phrases[i];
  }
  const std::string& tpl = oracle.templates[rng.below(oracle.templates.size())];

  RawAnnotation raw;
  raw.annotator_id = "oracle";
  raw.class_name = world.class_names()[static_cast<std::size_t>(y)];
  raw.alpha = alpha;
  raw.text = phrases.empty() ? "no change" : fill_template(tpl, body);
  return raw;
}

int concept_index(const SyntheticWorld& world, const std::string& token) {
  const auto& tokens = world.concept_tokens();
  for (std::size_t k = 0; k < tokens.size(); ++k)
    if (tokens[k] == token) return static_cast<int>(k);
  return -1;
}

std::vector<double> oracle_scores(const SyntheticWorld& world, const Vector& z, int y,
                                  const std::vector<SignedToken>& targets, const std::vector<Direction>& candidates,
                                  double alpha) {
  std::vector<int> ks;
  for (const auto& t : targets) {
    const int k = concept_index(world, t.token);
    if (k < 0) throw Error(ErrorKind::UnknownToken, "not a concept of this world: " + t.token);
    ks.push_back(k);
  }
  const Vector base = visible_attributes(world, z, y);
  std::vector<double> scores;
  for (const auto& c : candidates) {
    const Vector delta = visible_attributes(world, z + alpha * step_vector(c), y) - base;
    double s = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) s += targets[i].sign * delta[ks[i]];
    scores.push_back(s);
  }
  return scores;
}

int oracle_choose(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z, int y,
                  const std::vector<SignedToken>& targets, const std::vector<Direction>& candidates, double alpha,
                  Rng* rng) {
  if (candidates.size() != 4) throw Error(ErrorKind::InvalidConfig, "forced choice needs exactly 4 candidates");
  const std::vector<double> s = oracle_scores(world, z, y, targets, candidates, alpha);
  if (oracle.choice_temperature > 0.0 && rng) {
    const double top = *std::max_element(s.begin(), s.end());
    std::vector<double> w;
    double total = 0.0;
    for (double v : s) total += w.emplace_back(std::exp((v - top) / oracle.choice_temperature));
    double u = rng->uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (u < w[i]) return static_cast<int>(i);
      u -= w[i];
    }
    return static_cast<int>(w.size()) - 1;
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(s.size()); ++i)
    if (s[i] > s[best]) best = i;
  return best;
}

namespace {

double log_binomial_pmf(int k, int n, double p) {
  if (p <= 0.0) return k == 0 ? 0.0 : -INFINITY;
  if (p >= 1.0) return k == n ? 0.0 : -INFINITY;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
         (n - k) * std::log1p(-p);
}

double binomial_lower_tail(int k, int n, double p) {
  double s = 0.0;
  for (int i = 0; i <= k; ++i) s += std::exp(log_binomial_pmf(i, n, p));
  return std::min(1.0, s);
}

// Finds p in [0,1] with f(p) = target for f monotone (increasing if `rising`).
template <typename F>
double bisect(F f, double target, bool rising) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const bool below = f(mid) < target;
    if (below == rising) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double binomial_upper_tail(int successes, int trials, double p) {
  if (successes <= 0) return 1.0;
  if (successes > trials) return 0.0;
  double s = 0.0;
  for (int i = successes; i <= trials; ++i) s += std::exp(log_binomial_pmf(i, trials, p));
  return std::min(1.0, s);
}

std::pair<double, double> binomial_interval(int k, int n, double confidence) {
  if (n <= 0) return {0.0, 1.0};
  const double a = (1.0 - confidence) / 2.0;
  const double lo = k == 0 ? 0.0 : bisect([&](double p) { return binomial_upper_tail(k, n, p); }, a, true);
  const double hi = k == n ? 1.0 : bisect([&](double p) { return binomial_lower_tail(k, n, p); }, a, false);
  return {lo, hi};
}

Accuracy make_accuracy(std::string label, int correct, int trials) {
  Accuracy a;
  a.label = std::move(label);
  a.trials = trials;
  a.correct = correct;
  a.accuracy = trials > 0 ? static_cast<double>(correct) / trials : 0.0;
  std::tie(a.ci_low, a.ci_high) = binomial_interval(correct, trials);
  return a;
}

std::vector<std::string> distractor_pool(const ConceptVocabulary& vocab, int min_freq) {
  std::vector<std::string> pool;
  for (int i = 0; i < vocab.size(); ++i)
    if (vocab.freq[static_cast<std::size_t>(i)] >= min_freq) pool.push_back(vocab.tokens[static_cast<std::size_t>(i)]);
  return pool;
}

namespace {

struct PoolInfo {
  std::vector<std::string> pool;
  std::vector<std::string> concepts;  // pool tokens the oracle can score
};

PoolInfo checked_pool(const SyntheticWorld& world, const ConceptVocabulary& vocab, int min_freq, int minimum) {
  PoolInfo info;
  info.pool = distractor_pool(vocab, min_freq);
  if (static_cast<int>(info.pool.size()) < minimum)
    throw Error(ErrorKind::VocabularyTooSmall, "need at least " + std::to_string(minimum) +
                                                   " vocabulary tokens with frequency >= " + std::to_string(min_freq));
  for (const auto& t : info.pool)
    if (concept_index(world, t) >= 0) info.concepts.push_back(t);
  return info;
}

std::vector<std::string> sample_without(const std::vector<std::string>& pool, const std::vector<std::string>& exclude,
                                        std::size_t count, Rng& rng) {
  std::vector<std::string> rest;
  for (const auto& t : pool)
    if (std::find(exclude.begin(), exclude.end(), t) == exclude.end()) rest.push_back(t);
  rng.shuffle(rest);
  rest.resize(std::min(count, rest.size()));
  return rest;
}

Accuracy tally(const std::string& label, const std::vector<const TrialResult*>& results) {
  int correct = 0;
  for (const auto* r : results) correct += r->correct ? 1 : 0;
  return make_accuracy(label, correct, static_cast<int>(results.size()));
}

void finish(ExperimentReport& report) {
  std::map<std::string, std::vector<const TrialResult*>> by_concept;
  std::vector<const TrialResult*> all;
  for (const auto& r : report.trials) {
    std::string key;
    for (const auto& t : r.trial.targets) key += (key.empty() ? "" : "+") + t;
    by_concept[key].push_back(&r);
    all.push_back(&r);
  }
  report.per_concept.clear();
  for (const auto& [token, results] : by_concept) report.per_concept.push_back(tally(token, results));
  report.overall = tally("overall", all);
  report.p_value = binomial_upper_tail(report.overall.correct, report.overall.trials, report.chance);
}

// One forced-choice trial. candidates[0] is the target before permutation.
TrialResult run_trial(const SyntheticWorld& world, const OracleAnnotator& oracle, const Vector& z, int y,
                      const std::vector<std::string>& targets, std::vector<Direction> candidates,
                      std::vector<std::string> labels, double alpha, Rng& rng) {
  std::vector<int> perm = {0, 1, 2, 3};
  rng.shuffle(perm);
  TrialResult r;
  r.trial.targets = targets;
  r.trial.class_index = y;
  r.trial.z = z;
  std::vector<Direction> shown;
  for (int i = 0; i < 4; ++i) {
    shown.push_back(candidates[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    r.trial.candidate_labels.push_back(labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    if (perm[static_cast<std::size_t>(i)] == 0) r.trial.target_position = i;
  }
  std::vector<SignedToken> signed_targets;
  for (const auto& t : targets) signed_targets.push_back({t, +1});
  r.scores = oracle_scores(world, z, y, signed_targets, shown, alpha);
  r.chosen = oracle_choose(world, oracle, z, y, signed_targets, shown, alpha, &rng);
  r.correct = r.chosen == r.trial.target_position;
  return r;
}

ExperimentReport forced_choice(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                               const OracleAnnotator& oracle, int y_train, bool across_classes,
                               const ForcedChoiceOptions& opts) {
  if (opts.trials_per_concept < 1) throw Error(ErrorKind::InvalidConfig, "trials_per_concept must be positive");
  if (across_classes && world.class_count() < 2) throw Error(ErrorKind::InvalidConfig, "need at least two classes");
  const PoolInfo info = checked_pool(world, vocab, opts.pool_min_freq, 4);

  ExperimentReport report;
  report.experiment = across_classes ? "generalize-y" : "generalize-z";
  report.seed = opts.seed;
  report.alpha = opts.alpha;
  std::vector<const TrialResult*> shared, unshared;
  std::uint64_t trial_index = 0;
  for (const auto& target : info.concepts) {
    for (int t = 0; t < opts.trials_per_concept; ++t) {
      Rng rng(derive_seed(opts.seed, trial_index++));
      int y = y_train;
      if (across_classes) {
        y = static_cast<int>(rng.below(static_cast<std::uint64_t>(world.class_count() - 1)));
        if (y >= y_train) ++y;
      }
      const Vector z = rng.normal_vector(world.latent_dim());
      std::vector<std::string> labels = {target};
      for (auto& s : sample_without(info.pool, {target}, 3, rng)) labels.push_back(s);
      std::vector<Direction> candidates;
      for (const auto& l : labels) candidates.push_back(concept_direction(vocab, l));
      report.trials.push_back(run_trial(world, oracle, z, y, {target}, candidates, labels, opts.alpha, rng));
    }
  }
  if (across_classes) {
    for (const auto& r : report.trials) {
      const int k = concept_index(world, r.trial.targets.front());
      (world.concept_in_class(k, r.trial.class_index) ? shared : unshared).push_back(&r);
    }
    report.shared = tally("shared", shared);
    report.unshared = tally("unshared", unshared);
  }
  finish(report);
  return report;
}

}  // namespace

ExperimentReport run_generalize_z(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                  const OracleAnnotator& oracle, int y, const ForcedChoiceOptions& opts) {
  return forced_choice(world, vocab, oracle, y, false, opts);
}

ExperimentReport run_generalize_y(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                  const OracleAnnotator& oracle, int y_train, const ForcedChoiceOptions& opts) {
  return forced_choice(world, vocab, oracle, y_train, true, opts);
}

ExperimentReport run_composition(const SyntheticWorld& world, const ConceptVocabulary& vocab,
                                 const OracleAnnotator& oracle, int y, const CompositionOptions& opts) {
  if (opts.pair_count < 1) throw Error(ErrorKind::InvalidConfig, "pair_count must be positive");
  const PoolInfo info = checked_pool(world, vocab, opts.pool_min_freq, 4);
  if (info.concepts.size() < 2) throw Error(ErrorKind::VocabularyTooSmall, "composition needs two scorable concepts");

  ExperimentReport report;
  report.experiment = "compose";
  report.seed = opts.seed;
  report.alpha = opts.alpha;
  std::array<int, 4> histogram{};
  for (int p = 0; p < opts.pair_count; ++p) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(p)));
    const std::string a = info.concepts[rng.below(info.concepts.size())];
    std::string b = a;
    while (b == a) b = info.concepts[rng.below(info.concepts.size())];
    const auto cd = sample_without(info.pool, {a, b}, 2, rng);
    const std::string& c = cd[0];
    const std::string& d = cd[1];
    const Vector z = rng.normal_vector(world.latent_dim());

    const Direction da = concept_direction(vocab, a), db = concept_direction(vocab, b);
    const Direction dc = concept_direction(vocab, c), dd = concept_direction(vocab, d);
    const std::vector<Direction> candidates = {compose(da, db), compose(da, dc), compose(db, dd), compose(dc, dd)};
    const std::vector<std::string> labels = {a + "+" + b, a + "+" + c, b + "+" + d, c + "+" + d};
    TrialResult r = run_trial(world, oracle, z, y, {a, b}, candidates, labels, opts.alpha, rng);
    const std::string& picked = r.trial.candidate_labels[static_cast<std::size_t>(r.chosen)];
    for (std::size_t i = 0; i < 4; ++i)
      if (labels[i] == picked) ++histogram[i];
    report.trials.push_back(std::move(r));
  }
  report.histogram = histogram;
  finish(report);
  return report;
}

ExperimentReport merge_reports(const std::vector<ExperimentReport>& parts) {
  if (parts.empty()) throw Error(ErrorKind::EmptyResult, "no reports to merge");
  ExperimentReport out;
  out.experiment = parts.front().experiment;
  out.seed = parts.front().seed;
  out.alpha = parts.front().alpha;
  out.chance = parts.front().chance;
  std::array<int, 4> histogram{};
  bool any_histogram = false;
  for (const auto& p : parts) {
    out.trials.insert(out.trials.end(), p.trials.begin(), p.trials.end());
    if (p.histogram) {
      any_histogram = true;
      for (std::size_t i = 0; i < 4; ++i) histogram[i] += (*p.histogram)[i];
    }
  }
  if (any_histogram) out.histogram = histogram;
  finish(out);
  if (parts.front().shared) {
    int sc = 0, st = 0, uc = 0, ut = 0;
    for (const auto& p : parts) {
      sc += p.shared->correct, st += p.shared->trials;
      uc += p.unshared->correct, ut += p.unshared->trials;
    }
    out.shared = make_accuracy("shared", sc, st);
    out.unshared = make_accuracy("unshared", uc, ut);
  }
  return out;
}

RecoveryReport recovery_report(const ConceptVocabulary& vocab, const SyntheticWorld& world) {
  const int k_count = world.concept_count();
  RecoveryReport r;
  r.concepts = world.concept_tokens();
  r.cosines = Matrix::Zero(k_count, k_count);
  r.correct.assign(static_cast<std::size_t>(k_count), false);
  std::vector<double> diag;
  for (int k = 0; k < k_count; ++k) {
    const int row = vocab.index(r.concepts[static_cast<std::size_t>(k)]);
    if (row < 0) {
      r.unmatched.push_back(r.concepts[static_cast<std::size_t>(k)]);
      diag.push_back(0.0);
      continue;
    }
    const Vector e = vocab.embedding.row(row).transpose();
    const double n = e.norm();
    if (n > 0.0) r.cosines.row(k) = (world.planted() * e).cwiseAbs().transpose() / n;
    Eigen::Index best = 0;
    r.cosines.row(k).maxCoeff(&best);
    r.correct[static_cast<std::size_t>(k)] = n > 0.0 && best == k;
    r.correct_count += r.correct[static_cast<std::size_t>(k)] ? 1 : 0;
    diag.push_back(r.cosines(k, k));
  }
  std::sort(diag.begin(), diag.end());
  const std::size_t h = diag.size() / 2;
  r.median_diagonal = diag.size() % 2 ? diag[h] : 0.5 * (diag[h - 1] + diag[h]);
  return r;
}

}  // namespace latlex
