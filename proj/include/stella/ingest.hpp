#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stella::ingest {

enum class CopyrightStatus { public_use, protected_use, unknown };

std::string_view to_string(CopyrightStatus status);
std::optional<CopyrightStatus> parse_copyright(std::string_view s);

// The ten top-level subject categories of the source repository.
inline constexpr std::array<std::string_view, 10> kCategories = {
    "Aeronautics",
    "Astronautics",
    "Chemistry and Materials",
    "Engineering",
    "Geosciences",
    "Life Sciences",
    "Mathematical and Computer Sciences",
    "Physics",
    "Social and Information Sciences",
    "Space Sciences",
};

bool is_category(std::string_view name);

inline constexpr std::array<std::string_view, 4> kExcludedDocTypes = {"Video", "Poster", "Presentation",
                                                                      "Abstract"};
inline constexpr int kMinPublicationYear = 2000;

struct DocumentRecord {
  std::string doc_id;
  std::string title;
  std::vector<std::string> authors;
  std::string category;
  int publication_year = 0;
  std::string doc_type;
  CopyrightStatus copyright_status = CopyrightStatus::unknown;
  std::optional<std::string> download_url;
  std::optional<std::string> text;
  // Categories of later manifest entries that shared this doc_id.
  std::vector<std::string> alternate_categories;
};

// Manifest line schema:
//   {"doc_id": str, "title": str, "authors": [str], "category": str,
//    "publication_year": int, "doc_type": str,
//    "copyright_status": "public"|"protected"|"unknown",
//    "download_url": str|null, "text": str (optional),
//    "text_path": str (optional, relative to the manifest directory),
//    "metadata": {"alternate_categories": [str]} (optional)}
// Throws Error(manifest_parse) describing the first schema problem.
DocumentRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DocumentRecord& doc);

enum class Reason { no_download_url, duplicate, invalid_type, invalid_copyright };
inline constexpr std::array<Reason, 4> kReasons = {Reason::no_download_url, Reason::duplicate,
                                                   Reason::invalid_type, Reason::invalid_copyright};
std::string_view to_string(Reason reason);

struct ParseFailure {
  std::size_t line = 0;
  std::string message;
};

struct ExclusionLedger {
  // category -> counts indexed like kReasons
  std::map<std::string, std::array<std::size_t, 4>> counts;
  std::map<std::string, std::size_t> accepted_per_category;
  std::size_t recency_filtered = 0;
  std::vector<ParseFailure> parse_errors;
  std::size_t manifest_total = 0;

  std::size_t count(const std::string& category, Reason reason) const;
  std::size_t excluded(const std::string& category) const;
  std::size_t excluded_total() const;
  std::size_t reason_total(Reason reason) const;
  std::size_t accepted_total() const;

  // accepted + excluded + recency-filtered + parse errors == manifest total.
  bool reconciles() const;

  nlohmann::json to_json() const;
};

struct IngestResult {
  std::vector<DocumentRecord> accepted;
  ExclusionLedger ledger;
};

// Applies the selection rules in manifest order. Reasons are checked in the
// order no_download_url, duplicate, invalid_type, invalid_copyright; a doc_id
// becomes "seen" at its first occurrence that carries a download URL.
// Records before kMinPublicationYear are counted as recency-filtered,
// outside the four reasons.
struct ManifestLine {
  std::size_t line = 0;  // 1-based
  nlohmann::json value;
  bool malformed = false;  // not valid JSON; value is ignored
};

IngestResult ingest(const std::vector<ManifestLine>& lines);

// Reads a manifest.jsonl; malformed lines become parse errors. Accepted
// records with a text_path get their text loaded (relative to the manifest).
IngestResult ingest_manifest(const std::filesystem::path& manifest);

std::vector<DocumentRecord> load_documents(const std::filesystem::path& accepted_jsonl);

}  // namespace stella::ingest
