#pragma once

// On-disk formats. Everything is JSON or JSON lines with keys in a fixed
// order, so identical inputs give byte-identical files.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latlex/corpus.hpp"
#include "latlex/distill.hpp"
#include "latlex/eval.hpp"

namespace latlex {

using Json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, const std::string& contents);
/// Appends one line under an exclusive lock; the line is flushed before returning.
void append_line(const std::filesystem::path& path, const std::string& line);
/// FNV-1a 64 of the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);
std::string content_hash(const std::string& bytes);

/// Parses each nonblank line; errors name the file and line number.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& records);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json world_config_to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const Json& j);
Json world_to_json(const SyntheticWorld& w);

Json direction_to_json(const Direction& d, const SyntheticWorld* world = nullptr);
Direction direction_from_json(const Json& j, const SyntheticWorld* world = nullptr);
std::vector<Direction> read_directions(const std::filesystem::path& path, const SyntheticWorld* world = nullptr);
std::map<std::string, Direction> direction_store(const std::vector<Direction>& directions);

Json raw_to_json(const RawAnnotation& a);
RawAnnotation raw_from_json(const Json& j);
std::vector<RawAnnotation> read_raw(const std::filesystem::path& path);

Json cleaned_to_json(const CleanedAnnotation& a);
CleanedAnnotation cleaned_from_json(const Json& j);
std::vector<CleanedAnnotation> read_cleaned(const std::filesystem::path& path);

Json vocab_to_json(const ConceptVocabulary& v);
ConceptVocabulary vocab_from_json(const Json& j);
ConceptVocabulary read_vocab(const std::filesystem::path& path);

Json accuracy_to_json(const Accuracy& a);
Json report_to_json(const ExperimentReport& r, const Json& config);
Json trial_to_json(const TrialResult& t);
Json recovery_to_json(const RecoveryReport& r);
Json statistics_to_json(const CorpusStatistics& s);

}  // namespace latlex
