#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/chunker.hpp"
#include "stella/gateway/tagger.hpp"

namespace stella::terms {

enum class PatternClass { all_caps, hyphenated, symbolic };

std::string_view to_string(PatternClass c);
std::optional<PatternClass> parse_pattern_class(std::string_view s);

// Candidate classes, checked in this order (first match wins):
//   symbolic    a Greek letter character anywhere              (greek_char)
//               a hyphen component spelled as a Greek letter   (greek_name)   alpha-particle
//               ^\d+(\.\d+)?(-[A-Za-z]+)+$                      (digit_hyphen) 3-sigma
//               ^(?=.*\d)([A-Z][a-z]?\d*)+$                     (chemical)     H2O, CO2
//               ^\d+(\.\d+)?[A-Za-z]+$                          (unit)         10km
//   all_caps    ^(?=(\d*[A-Z]){2})[A-Z\d]{2,}$                                 CFD, MODIS
//   hyphenated  ^[A-Za-z]+(-[A-Za-z]+)+$ with a capitalized component          Navier-Stokes
struct Classification {
  PatternClass pattern_class;
  std::string symbolic_trigger;  // empty unless symbolic
};

std::optional<Classification> classify(std::string_view surface);

// True when `surface` matches the regex of `cls`, independently of the
// precedence above.
bool matches_class(std::string_view surface, PatternClass cls);

// Drops a trailing possessive ('s or ’s).
std::string_view strip_possessive(std::string_view token);

struct Candidate {
  std::string surface;
  PatternClass pattern_class = PatternClass::all_caps;
  std::string symbolic_trigger;
  std::size_t doc_frequency = 0;  // distinct passages
};

// Scans every passage token. all_caps surfaces are kept exactly; other
// classes merge case variants under the variant seen in most passages
// (lexicographically smallest on ties). Keyed by surface.
std::map<std::string, Candidate> extract_candidates(const std::vector<chunker::Passage>& passages,
                                                    std::size_t workers = 1);

// word<TAB>zipf, where zipf = log10(occurrences per 10^9 words).
class ZipfTable {
 public:
  ZipfTable() = default;
  static ZipfTable load(const std::filesystem::path& tsv);  // Error(frequency_table_missing)
  static ZipfTable parse(std::string_view tsv, std::string_view origin = "<memory>");

  void set(std::string_view word, double zipf);
  std::optional<double> lookup(std::string_view surface) const;  // case-folded
  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }

 private:
  std::unordered_map<std::string, double> table_;
};

struct TermFilterConfig {
  std::size_t min_doc_frequency = 10;
  double zipf_threshold = 3.5;
  std::set<gateway::PosTag> allowed_pos = {gateway::PosTag::noun, gateway::PosTag::propn};

  void validate() const;  // Error(config)
  nlohmann::json to_json() const;
  static TermFilterConfig from_json(const nlohmann::json& j);
};

struct TermEntry {
  std::string surface;
  PatternClass pattern_class = PatternClass::all_caps;
  std::string symbolic_trigger;
  std::size_t doc_frequency = 0;
  gateway::PosTag pos = gateway::PosTag::other;
  std::optional<double> zipf;
};

struct TermMatch {
  std::string surface;  // dictionary surface
  std::size_t begin = 0;  // byte span in the searched text
  std::size_t end = 0;
};

enum class MatchMode {
  dictionary,  // all_caps entries case-sensitive, others case-insensitive
  ban,         // every entry case-insensitive
};

// Longest-match-first, non-overlapping, left to right. Text is split into
// atoms on whitespace and hyphens; punctuation between atoms breaks a
// match, so "Navier Stokes" and "Navier-Stokes" both match Navier-Stokes.
// The last atom may carry a plural "s"/"es".
class TermMatcher {
 public:
  TermMatcher(const std::vector<TermEntry>& entries, MatchMode mode);
  std::vector<TermMatch> find(std::string_view text) const;

 private:
  struct Compiled {
    std::string surface;
    std::vector<std::string> atoms;        // as written
    std::vector<std::string> atoms_lower;
    bool case_sensitive = false;
  };
  std::vector<Compiled> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_first_atom_;  // lowercase key
};

// Entries only from surfaces, classified with classify(); unclassifiable
// surfaces default to hyphenated (case-insensitive matching).
std::vector<TermEntry> entries_from_surfaces(const std::vector<std::string>& surfaces);

class TerminologyDictionary {
 public:
  TerminologyDictionary() = default;
  TerminologyDictionary(std::vector<TermEntry> entries, TermFilterConfig cfg, std::string corpus_fingerprint = {});

  const std::vector<TermEntry>& entries() const { return entries_; }  // sorted by surface
  const TermFilterConfig& filter_config() const { return config_; }
  const std::string& corpus_fingerprint() const { return fingerprint_; }
  const TermEntry* find(std::string_view surface) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  std::vector<TermMatch> find_terms_in(std::string_view text) const;

  nlohmann::json to_json() const;
  static TerminologyDictionary from_json(const nlohmann::json& j);
  static TerminologyDictionary load(const std::filesystem::path& path);

 private:
  std::vector<TermEntry> entries_;
  TermFilterConfig config_;
  std::string fingerprint_;
  std::shared_ptr<const TermMatcher> matcher_;
};

// Distinct dictionary surfaces found in `text`, in first-occurrence order.
std::vector<std::string> distinct_terms(std::string_view text, const TerminologyDictionary& dict);

enum class FilterStage { doc_frequency, zipf, pos };
std::string_view to_string(FilterStage stage);

struct BuildReport {
  std::map<std::string, FilterStage> rejected;  // surface -> first failing filter
};

// Keeps candidates with doc_frequency >= min_doc_frequency, zipf absent or
// <= zipf_threshold, and the POS of the last component in allowed_pos.
// Throws Error(frequency_table_missing) for an empty table.
TerminologyDictionary build_dictionary(const std::map<std::string, Candidate>& candidates,
                                       const TermFilterConfig& cfg, const ZipfTable& freq, gateway::Tagger& tagger,
                                       BuildReport* report = nullptr, std::string corpus_fingerprint = {});

}  // namespace stella::terms
