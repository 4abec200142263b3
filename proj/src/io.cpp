#include "latlex/io.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace latlex {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw Error(ErrorKind::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void append_line(const fs::path& path, const std::string& line) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw Error(ErrorKind::Io, "cannot open " + path.string());
  ::flock(fd, LOCK_EX);
  const std::string data = line + "\n";
  std::size_t done = 0;
  bool ok = true;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n <= 0) {
      ok = false;
      break;
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) throw Error(ErrorKind::Io, "append failed: " + path.string());
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& path) { return content_hash(read_file(path)); }

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<Json>& records) {
  std::string s;
  for (const auto& r : records) s += r.dump() + "\n";
  return s;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "expected a number array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::Parse, "expected a number array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

namespace {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::Parse, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorKind::Parse, std::string("bad type for field '") + key + "'");
  }
}

// Parses records one by one so a schema error names its line.
template <typename F>
auto read_records(const fs::path& path, F parse) {
  std::vector<decltype(parse(Json{}))> out;
  int line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(parse(j));
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

Json world_config_to_json(const WorldConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["latent_dim"] = c.latent_dim;
  j["concept_count"] = c.concept_count;
  j["class_count"] = c.class_count;
  j["epsilon"] = c.epsilon;
  j["image"] = {{"height", c.image.height}, {"width", c.image.width}, {"channels", c.image.channels}};
  j["hidden1"] = c.hidden1;
  j["hidden2"] = c.hidden2;
  j["concept_tokens"] = c.concept_tokens;
  j["class_names"] = c.class_names;
  j["class_mask"] = c.class_mask;
  return j;
}

WorldConfig world_config_from_json(const Json& j) {
  WorldConfig c;
  if (!j.is_object()) throw Error(ErrorKind::Parse, "world config must be an object");
  c.seed = j.value("seed", c.seed);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.concept_count = j.value("concept_count", c.concept_count);
  c.class_count = j.value("class_count", c.class_count);
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("image")) {
    const Json& im = j["image"];
    c.image = {im.value("height", 32), im.value("width", 32), im.value("channels", 3)};
  }
  c.hidden1 = j.value("hidden1", c.hidden1);
  c.hidden2 = j.value("hidden2", c.hidden2);
  if (j.contains("concept_tokens")) c.concept_tokens = j["concept_tokens"].get<std::vector<std::string>>();
  if (j.contains("class_names")) c.class_names = j["class_names"].get<std::vector<std::string>>();
  if (j.contains("class_mask")) c.class_mask = j["class_mask"].get<std::vector<std::vector<bool>>>();
  return c;
}

Json world_to_json(const SyntheticWorld& w) {
  Json j = world_config_to_json(w.config());
  Json planted = Json::array();
  for (int k = 0; k < w.concept_count(); ++k) planted.push_back(vector_to_json(w.planted_direction(k)));
  j["planted"] = planted;
  return j;
}

Json direction_to_json(const Direction& d, const SyntheticWorld* world) {
  Json j;
  j["id"] = d.id;
  if (world && d.class_index >= 0 && d.class_index < world->class_count())
    j["class"] = world->class_names()[static_cast<std::size_t>(d.class_index)];
  else
    j["class"] = d.class_index;
  j["z_seed"] = d.z_seed;
  j["z"] = vector_to_json(d.z);
  j["layer"] = d.layer ? Json(*d.layer) : Json(nullptr);
  j["source"] = to_string(d.source);
  j["vector"] = vector_to_json(d.vector);
  if (d.source == DirectionSource::Lsd) {
    j["initial_loss"] = d.initial_loss;
    j["final_loss"] = d.final_loss;
  }
  return j;
}

Direction direction_from_json(const Json& j, const SyntheticWorld* world) {
  Direction d;
  d.id = field<std::string>(j, "id");
  const Json& cls = j.contains("class") ? j["class"] : Json(0);
  if (cls.is_string()) {
    if (!world) throw Error(ErrorKind::Parse, "class name needs a world to resolve");
    d.class_index = world->class_index(cls.get<std::string>());
    if (d.class_index < 0) throw Error(ErrorKind::Parse, "unknown class '" + cls.get<std::string>() + "'");
  } else if (cls.is_number_integer()) {
    d.class_index = cls.get<int>();
  } else {
    throw Error(ErrorKind::Parse, "bad class field");
  }
  d.z_seed = j.value("z_seed", std::uint64_t{0});
  if (j.contains("z")) d.z = vector_from_json(j["z"]);
  if (j.contains("layer") && !j["layer"].is_null()) d.layer = field<int>(j, "layer");
  d.source = direction_source_from_string(j.value("source", std::string("random")));
  d.vector = vector_from_json(field<Json>(j, "vector"));
  d.initial_loss = j.value("initial_loss", 0.0);
  d.final_loss = j.value("final_loss", 0.0);
  return d;
}

std::vector<Direction> read_directions(const fs::path& path, const SyntheticWorld* world) {
  return read_records(path, [&](const Json& j) { return direction_from_json(j, world); });
}

std::map<std::string, Direction> direction_store(const std::vector<Direction>& directions) {
  std::map<std::string, Direction> store;
  for (const auto& d : directions)
    if (!store.emplace(d.id, d).second) throw Error(ErrorKind::Parse, "duplicate direction id '" + d.id + "'");
  return store;
}

Json raw_to_json(const RawAnnotation& a) {
  Json j;
  j["direction_id"] = a.direction_id;
  j["annotator_id"] = a.annotator_id;
  j["class"] = a.class_name;
  j["alpha"] = a.alpha;
  j["text"] = a.text;
  return j;
}

RawAnnotation raw_from_json(const Json& j) {
  RawAnnotation a;
  a.direction_id = field<std::string>(j, "direction_id");
  a.annotator_id = field<std::string>(j, "annotator_id");
  a.class_name = field<std::string>(j, "class");
  a.alpha = j.contains("alpha") ? field<double>(j, "alpha") : 6.0;
  a.text = field<std::string>(j, "text");
  return a;
}

std::vector<RawAnnotation> read_raw(const fs::path& path) { return read_records(path, raw_from_json); }

Json cleaned_to_json(const CleanedAnnotation& a) {
  Json j;
  j["direction_id"] = a.direction_id;
  j["annotator_id"] = a.annotator_id;
  j["class"] = a.class_name;
  Json tokens = Json::array();
  for (const auto& t : a.tokens) tokens.push_back({{"token", t.token}, {"sign", t.sign}});
  j["tokens"] = tokens;
  return j;
}

CleanedAnnotation cleaned_from_json(const Json& j) {
  CleanedAnnotation a;
  a.direction_id = field<std::string>(j, "direction_id");
  a.annotator_id = field<std::string>(j, "annotator_id");
  a.class_name = j.value("class", std::string());
  for (const auto& t : field<Json>(j, "tokens")) {
    const int sign = field<int>(t, "sign");
    if (sign != 1 && sign != -1) throw Error(ErrorKind::Parse, "token sign must be +1 or -1");
    a.tokens.push_back({field<std::string>(t, "token"), sign});
  }
  return a;
}

std::vector<CleanedAnnotation> read_cleaned(const fs::path& path) { return read_records(path, cleaned_from_json); }

Json vocab_to_json(const ConceptVocabulary& v) {
  Json j;
  j["lambda"] = v.lambda;
  j["min_freq"] = v.min_freq;
  j["class"] = v.class_name;
  Json tokens = Json::array();
  for (int i = 0; i < v.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    Json t;
    t["token"] = v.tokens[u];
    t["freq"] = v.freq[u];
    t["class_counts"] = v.class_counts.size() > u ? Json(v.class_counts[u]) : Json::object();
    t["raw_norm"] = v.embedding.row(i).norm();
    t["vector"] = vector_to_json(v.embedding.row(i).transpose());
    tokens.push_back(t);
  }
  j["tokens"] = tokens;
  j["provenance"] = {{"corpus", v.corpus_hash}, {"directions", v.directions_hash}};
  return j;
}

ConceptVocabulary vocab_from_json(const Json& j) {
  ConceptVocabulary v;
  v.lambda = field<double>(j, "lambda");
  v.min_freq = field<int>(j, "min_freq");
  v.class_name = j.value("class", std::string());
  const Json& tokens = field<Json>(j, "tokens");
  if (tokens.empty()) throw Error(ErrorKind::EmptyVocabulary, "vocabulary file has no tokens");
  std::vector<Vector> rows;
  for (const auto& t : tokens) {
    v.tokens.push_back(field<std::string>(t, "token"));
    v.freq.push_back(field<int>(t, "freq"));
    v.class_counts.push_back(t.value("class_counts", std::map<std::string, int>{}));
    rows.push_back(vector_from_json(field<Json>(t, "vector")));
  }
  v.embedding.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw Error(ErrorKind::DimensionMismatch, "vocabulary rows differ");
    v.embedding.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  if (j.contains("provenance")) {
    v.corpus_hash = j["provenance"].value("corpus", std::string());
    v.directions_hash = j["provenance"].value("directions", std::string());
  }
  return v;
}

ConceptVocabulary read_vocab(const fs::path& path) {
  try {
    return vocab_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

Json accuracy_to_json(const Accuracy& a) {
  return {{"token", a.label},
          {"trials", a.trials},
          {"correct", a.correct},
          {"accuracy", a.accuracy},
          {"ci95", {a.ci_low, a.ci_high}}};
}

Json trial_to_json(const TrialResult& t) {
  Json j;
  j["targets"] = t.trial.targets;
  j["class"] = t.trial.class_index;
  j["candidates"] = t.trial.candidate_labels;
  j["target_position"] = t.trial.target_position;
  j["chosen"] = t.chosen;
  j["correct"] = t.correct;
  j["scores"] = t.scores;
  return j;
}

Json report_to_json(const ExperimentReport& r, const Json& config) {
  Json j;
  j["experiment"] = r.experiment;
  j["seed"] = r.seed;
  j["config"] = config;
  Json per = Json::array();
  for (const auto& a : r.per_concept) per.push_back(accuracy_to_json(a));
  j["per_concept"] = per;
  j["overall"] = accuracy_to_json(r.overall);
  j["chance"] = r.chance;
  j["p_value"] = r.p_value;
  if (r.shared) j["shared"] = accuracy_to_json(*r.shared);
  if (r.unshared) j["unshared"] = accuracy_to_json(*r.unshared);
  if (r.histogram)
    j["histogram"] = {{"target", (*r.histogram)[0]},
                      {"a+c", (*r.histogram)[1]},
                      {"b+d", (*r.histogram)[2]},
                      {"c+d", (*r.histogram)[3]}};
  return j;
}

Json recovery_to_json(const RecoveryReport& r) {
  Json j;
  j["experiment"] = "recovery";
  j["concepts"] = r.concepts;
  Json rows = Json::array();
  for (Eigen::Index k = 0; k < r.cosines.rows(); ++k) rows.push_back(vector_to_json(r.cosines.row(k).transpose()));
  j["abs_cosine"] = rows;
  j["correct"] = r.correct;
  j["correct_count"] = r.correct_count;
  j["median_diagonal"] = r.median_diagonal;
  j["unmatched"] = r.unmatched;
  return j;
}

Json statistics_to_json(const CorpusStatistics& s) {
  auto counts = [](const ClassCounts& c) {
    return Json{{"distinct", c.distinct}, {"repeated", c.repeated}, {"unique_to_class", c.unique_to_class}};
  };
  Json j;
  j["annotations"] = s.annotations;
  Json per = Json::object();
  for (const auto& [name, c] : s.per_class) per[name] = counts(c);
  j["per_class"] = per;
  j["overall"] = counts(s.overall);
  return j;
}

}  // namespace latlex
