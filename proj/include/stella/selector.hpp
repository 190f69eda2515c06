#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/chunker.hpp"
#include "stella/gateway/chat.hpp"
#include "stella/terminology.hpp"

namespace stella::selector {

enum class Intent { def, num, proc, comp, anom };

inline constexpr std::array<Intent, 5> kIntents = {Intent::def, Intent::num, Intent::proc, Intent::comp,
                                                   Intent::anom};

std::string_view display_name(Intent intent);  // "Definition / Principle", ...
std::string_view short_name(Intent intent);    // "Def", "Num", "Proc", "Comp", "Anom"
// Accepts display or short names, case-insensitively.
std::optional<Intent> parse_intent_name(std::string_view s);

// Model answer -> intent: exact case-insensitive display-name match after
// trimming whitespace, quotes and trailing punctuation; otherwise the one
// display name contained in the answer. Nothing or several -> nullopt.
std::optional<Intent> parse_intent_response(std::string_view response);

std::vector<chunker::Passage> density_filter(const std::vector<chunker::Passage>& passages,
                                             const terms::TerminologyDictionary& dict, std::size_t min_distinct = 5);

// Sends the classification prompt at temperature 0; one re-prompt with the
// parse error appended. Throws Error(unparseable_intent) after that.
Intent classify_intent(std::string_view passage_text, gateway::ChatGateway& gateway);

struct ClusterConfig {
  std::size_t k = 5;
  std::size_t per_medoid = 20;
  std::uint64_t seed = 0;  // sampling only; PAM itself is deterministic

  void validate() const;  // Error(config)
};

struct KMedoidsResult {
  std::vector<std::size_t> medoids;     // point indices, ascending; cluster id = position
  std::vector<std::size_t> assignment;  // cluster id per point
  double total_deviation = 0;
  double build_deviation = 0;  // objective after BUILD, before SWAP
  std::size_t swaps = 0;
};

// Cosine distance matrix, d = max(0, 1 - cos), zero diagonal, row-major.
std::vector<double> cosine_distance_matrix(const std::vector<std::vector<double>>& vectors);

// Sum over points of the distance to the nearest listed medoid.
double total_deviation(const std::vector<double>& distances, std::size_t n, const std::vector<std::size_t>& medoids);

// PAM: greedy BUILD then best-improvement SWAP until no swap lowers the
// objective. Ties go to the lowest index. Throws Error(too_few_points) when
// there are fewer than k points and Error(dimension_mismatch) on ragged input.
KMedoidsResult kmedoids(const std::vector<std::vector<double>>& vectors, std::size_t k);
KMedoidsResult kmedoids_on_matrix(const std::vector<double>& distances, std::size_t n, std::size_t k);

struct CandidatePassage {
  chunker::Passage passage;
  Intent intent = Intent::def;
  std::vector<std::string> distinct_terms;
  std::vector<double> embedding;
  std::size_t medoid_id = 0;
  std::size_t rank_to_medoid = 0;
  bool backfilled = false;
};

nlohmann::json to_json(const CandidatePassage& c);
CandidatePassage candidate_from_json(const nlohmann::json& j);  // Error(parse)
std::vector<CandidatePassage> load_candidates(const std::filesystem::path& path);

struct PoolMember {
  chunker::Passage passage;
  std::vector<std::string> distinct_terms;
  std::vector<double> embedding;
};

struct Selection {
  std::vector<CandidatePassage> candidates;  // cluster order, then rank
  std::size_t backfilled = 0;
  bool flagged = false;  // some cluster had fewer than per_medoid members
  KMedoidsResult clustering;
};

// Per medoid, the per_medoid nearest members of its cluster (medoid at rank
// 0). Short clusters are then topped up, in cluster order, with the nearest
// passages not yet selected from anywhere in the pool. Throws
// Error(pool_too_small) when the pool has fewer than k * per_medoid members.
Selection select_representatives(const std::vector<PoolMember>& pool, Intent intent, const ClusterConfig& cfg);

// Deterministic subset of `cap` indices (seeded shuffle, then sorted).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t cap, std::uint64_t seed);

}  // namespace stella::selector
