#include "stella/ingest.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/text.hpp"

namespace stella::ingest {

using nlohmann::json;

std::string_view to_string(CopyrightStatus status) {
  switch (status) {
    case CopyrightStatus::public_use: return "public";
    case CopyrightStatus::protected_use: return "protected";
    case CopyrightStatus::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<CopyrightStatus> parse_copyright(std::string_view s) {
  if (s == "public") return CopyrightStatus::public_use;
  if (s == "protected") return CopyrightStatus::protected_use;
  if (s == "unknown") return CopyrightStatus::unknown;
  return std::nullopt;
}

bool is_category(std::string_view name) {
  return std::find(kCategories.begin(), kCategories.end(), name) != kCategories.end();
}

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::no_download_url: return "no_download_url";
    case Reason::duplicate: return "duplicate";
    case Reason::invalid_type: return "invalid_type";
    case Reason::invalid_copyright: return "invalid_copyright";
  }
  return "unknown";
}

namespace {

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorKind::manifest_parse, message); }

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) bad(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

DocumentRecord record_from_json(const json& j) {
  if (!j.is_object()) bad("record is not a JSON object");
  DocumentRecord doc;
  doc.doc_id = required_string(j, "doc_id");
  if (doc.doc_id.empty()) bad("doc_id is empty");
  doc.title = required_string(j, "title");
  auto authors = j.find("authors");
  if (authors == j.end() || !authors->is_array()) bad("field 'authors' must be an array");
  for (const auto& a : *authors) {
    if (!a.is_string()) bad("authors must be strings");
    doc.authors.push_back(a.get<std::string>());
  }
  doc.category = required_string(j, "category");
  if (!is_category(doc.category)) bad("unknown category '" + doc.category + "'");
  auto year = j.find("publication_year");
  if (year == j.end() || !year->is_number_integer()) bad("field 'publication_year' must be an integer");
  doc.publication_year = year->get<int>();
  doc.doc_type = required_string(j, "doc_type");
  auto status = parse_copyright(required_string(j, "copyright_status"));
  if (!status) bad("copyright_status must be public, protected or unknown");
  doc.copyright_status = *status;
  auto url = j.find("download_url");
  if (url == j.end()) bad("field 'download_url' is required (null when absent)");
  if (url->is_string()) {
    if (!url->get<std::string>().empty()) doc.download_url = url->get<std::string>();
  } else if (!url->is_null()) {
    bad("download_url must be a string or null");
  }
  if (auto t = j.find("text"); t != j.end() && !t->is_null()) {
    if (!t->is_string()) bad("text must be a string");
    doc.text = t->get<std::string>();
  }
  if (auto m = j.find("metadata"); m != j.end() && m->is_object()) {
    for (const auto& c : m->value("alternate_categories", json::array())) {
      if (c.is_string()) doc.alternate_categories.push_back(c.get<std::string>());
    }
  }
  return doc;
}

json to_json(const DocumentRecord& doc) {
  json j = {{"doc_id", doc.doc_id},
            {"title", doc.title},
            {"authors", doc.authors},
            {"category", doc.category},
            {"publication_year", doc.publication_year},
            {"doc_type", doc.doc_type},
            {"copyright_status", to_string(doc.copyright_status)},
            {"download_url", doc.download_url ? json(*doc.download_url) : json(nullptr)}};
  if (doc.text) j["text"] = *doc.text;
  if (!doc.alternate_categories.empty()) j["metadata"] = {{"alternate_categories", doc.alternate_categories}};
  return j;
}

std::size_t ExclusionLedger::count(const std::string& category, Reason reason) const {
  auto it = counts.find(category);
  return it == counts.end() ? 0 : it->second[static_cast<std::size_t>(reason)];
}

std::size_t ExclusionLedger::excluded(const std::string& category) const {
  auto it = counts.find(category);
  if (it == counts.end()) return 0;
  std::size_t total = 0;
  for (auto c : it->second) total += c;
  return total;
}

std::size_t ExclusionLedger::excluded_total() const {
  std::size_t total = 0;
  for (const auto& [category, _] : counts) total += excluded(category);
  return total;
}

std::size_t ExclusionLedger::reason_total(Reason reason) const {
  std::size_t total = 0;
  for (const auto& [category, _] : counts) total += count(category, reason);
  return total;
}

std::size_t ExclusionLedger::accepted_total() const {
  std::size_t total = 0;
  for (const auto& [_, n] : accepted_per_category) total += n;
  return total;
}

bool ExclusionLedger::reconciles() const {
  return accepted_total() + excluded_total() + recency_filtered + parse_errors.size() == manifest_total;
}

json ExclusionLedger::to_json() const {
  json categories = json::object();
  std::set<std::string> names;
  for (const auto& [c, _] : counts) names.insert(c);
  for (const auto& [c, _] : accepted_per_category) names.insert(c);
  for (const auto& c : names) {
    json row = json::object();
    for (auto r : kReasons) row[std::string(to_string(r))] = count(c, r);
    row["excluded_total"] = excluded(c);
    auto acc = accepted_per_category.find(c);
    row["accepted"] = acc == accepted_per_category.end() ? 0 : acc->second;
    categories[c] = row;
  }
  json totals = json::object();
  for (auto r : kReasons) totals[std::string(to_string(r))] = reason_total(r);
  json errors = json::array();
  for (const auto& e : parse_errors) errors.push_back({{"line", e.line}, {"message", e.message}});
  return {{"manifest_total", manifest_total},
          {"accepted_total", accepted_total()},
          {"excluded_total", excluded_total()},
          {"recency_filtered", recency_filtered},
          {"parse_error_count", parse_errors.size()},
          {"reason_totals", totals},
          {"categories", categories},
          {"parse_errors", errors},
          {"reconciles", reconciles()}};
}

IngestResult ingest(const std::vector<ManifestLine>& lines) {
  IngestResult result;
  auto& ledger = result.ledger;
  ledger.manifest_total = lines.size();

  std::unordered_set<std::string> seen;
  std::unordered_map<std::string, std::size_t> accepted_index;
  std::unordered_map<std::string, std::vector<std::string>> alternates;

  for (const auto& [line_no, value, malformed] : lines) {
    if (malformed) {
      ledger.parse_errors.push_back({line_no, "malformed JSON"});
      continue;
    }
    DocumentRecord doc;
    try {
      doc = record_from_json(value);
    } catch (const Error& e) {
      ledger.parse_errors.push_back({line_no, e.what()});
      continue;
    }
    if (doc.publication_year < kMinPublicationYear) {
      ++ledger.recency_filtered;
      continue;
    }
    auto& row = ledger.counts[doc.category];
    if (!doc.download_url) {
      ++row[static_cast<std::size_t>(Reason::no_download_url)];
      continue;
    }
    if (!seen.insert(doc.doc_id).second) {
      ++row[static_cast<std::size_t>(Reason::duplicate)];
      alternates[doc.doc_id].push_back(doc.category);
      continue;
    }
    if (std::find(kExcludedDocTypes.begin(), kExcludedDocTypes.end(), doc.doc_type) != kExcludedDocTypes.end()) {
      ++row[static_cast<std::size_t>(Reason::invalid_type)];
      continue;
    }
    if (doc.copyright_status != CopyrightStatus::public_use) {
      ++row[static_cast<std::size_t>(Reason::invalid_copyright)];
      continue;
    }
    ++ledger.accepted_per_category[doc.category];
    accepted_index.emplace(doc.doc_id, result.accepted.size());
    result.accepted.push_back(std::move(doc));
  }

  for (auto& [doc_id, cats] : alternates) {
    auto it = accepted_index.find(doc_id);
    if (it == accepted_index.end()) continue;
    auto& doc = result.accepted[it->second];
    for (auto& c : cats) {
      if (c != doc.category &&
          std::find(doc.alternate_categories.begin(), doc.alternate_categories.end(), c) ==
              doc.alternate_categories.end())
        doc.alternate_categories.push_back(c);
    }
  }
  return result;
}

IngestResult ingest_manifest(const std::filesystem::path& manifest) {
  const auto content = io::read_file(manifest);
  std::vector<ManifestLine> lines;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(raw).empty()) continue;
    try {
      lines.push_back({line_no, json::parse(raw), false});
    } catch (const json::parse_error&) {
      lines.push_back({line_no, json(), true});
    }
  }
  auto result = ingest(lines);

  // text_path adapter: inline extracted text for accepted records.
  std::unordered_map<std::string, std::string> text_paths;
  for (const auto& [_, value, malformed] : lines) {
    if (malformed || !value.is_object() || !value.contains("text_path") || !value["text_path"].is_string()) continue;
    const auto url = value.find("download_url");
    if (url == value.end() || !url->is_string()) continue;
    text_paths.emplace(value.value("doc_id", ""), value["text_path"].get<std::string>());
  }
  const auto base = manifest.parent_path();
  for (auto& doc : result.accepted) {
    if (doc.text) continue;
    auto it = text_paths.find(doc.doc_id);
    if (it != text_paths.end()) doc.text = io::read_file(base / it->second);
  }
  return result;
}

std::vector<DocumentRecord> load_documents(const std::filesystem::path& accepted_jsonl) {
  std::vector<DocumentRecord> docs;
  io::for_each_jsonl(accepted_jsonl, [&](std::size_t line, const json& j) {
    try {
      docs.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, accepted_jsonl.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return docs;
}

}  // namespace stella::ingest
