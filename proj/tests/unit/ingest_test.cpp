#include <array>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "stella/error.hpp"
#include "stella/ingest.hpp"

using namespace stella;
using namespace stella::ingest;
using nlohmann::json;

namespace {

json record(const std::string& id, const std::string& category, int year = 2010, const std::string& type = "Technical Report",
            const std::string& copyright = "public", bool url = true) {
  return {{"doc_id", id},
          {"title", "Title " + id},
          {"authors", {"A. Author"}},
          {"category", category},
          {"publication_year", year},
          {"doc_type", type},
          {"copyright_status", copyright},
          {"download_url", url ? json("https://example.org/" + id + ".pdf") : json(nullptr)}};
}

std::vector<ManifestLine> number(const std::vector<json>& rows) {
  std::vector<ManifestLine> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({i + 1, rows[i], false});
  return out;
}

// Per-category exclusion counts and usable totals from the source corpus
// statistics: no URL, duplicate, invalid type, invalid copyright, usable.
struct CategoryRow {
  const char* name;
  std::array<std::size_t, 4> excluded;
  std::size_t usable;
};
constexpr std::array<CategoryRow, 10> kCorpusRows = {{
    {"Aeronautics", {235, 211, 830, 236}, 2860},
    {"Astronautics", {552, 139, 746, 117}, 1068},
    {"Chemistry and Materials", {623, 162, 857, 129}, 2935},
    {"Engineering", {715, 259, 1190, 207}, 3564},
    {"Geosciences", {3253, 274, 1517, 1413}, 3468},
    {"Life Sciences", {3752, 160, 2726, 216}, 2331},
    {"Mathematical and Computer Sciences", {456, 127, 493, 128}, 1350},
    {"Physics", {1706, 189, 897, 181}, 2935},
    {"Social and Information Sciences", {20, 30, 104, 45}, 102},
    {"Space Sciences", {7150, 385, 3185, 1821}, 5864},
}};

}  // namespace

TEST(Ingest, CorpusScaleDistributionReconciles) {
  std::vector<json> rows;
  std::size_t serial = 0;
  std::vector<std::string> accepted_ids;
  for (const auto& row : kCorpusRows) {
    for (std::size_t i = 0; i < row.usable; ++i) {
      accepted_ids.push_back("D" + std::to_string(serial++));
      rows.push_back(record(accepted_ids.back(), row.name));
    }
  }
  std::size_t dup_cursor = 0;
  for (const auto& row : kCorpusRows) {
    for (std::size_t i = 0; i < row.excluded[0]; ++i)
      rows.push_back(record("N" + std::to_string(serial++), row.name, 2010, "Technical Report", "public", false));
    // Duplicates of already-seen ids, listed here under this category.
    for (std::size_t i = 0; i < row.excluded[1]; ++i) rows.push_back(record(accepted_ids[dup_cursor++], row.name));
    for (std::size_t i = 0; i < row.excluded[2]; ++i)
      rows.push_back(record("T" + std::to_string(serial++), row.name, 2010, i % 2 ? "Presentation" : "Video"));
    for (std::size_t i = 0; i < row.excluded[3]; ++i)
      rows.push_back(record("C" + std::to_string(serial++), row.name, 2010, "Technical Report",
                            i % 2 ? "protected" : "unknown"));
  }
  ASSERT_EQ(rows.size(), 63913u);

  const auto result = ingest::ingest(number(rows));
  const auto& ledger = result.ledger;
  EXPECT_EQ(result.accepted.size(), 26477u);
  EXPECT_EQ(ledger.excluded_total(), 37436u);
  EXPECT_EQ(ledger.reason_total(Reason::no_download_url), 18462u);
  EXPECT_EQ(ledger.reason_total(Reason::duplicate), 1936u);
  EXPECT_EQ(ledger.reason_total(Reason::invalid_type), 12545u);
  EXPECT_EQ(ledger.reason_total(Reason::invalid_copyright), 4493u);
  for (const auto& row : kCorpusRows) {
    std::size_t sum = 0;
    for (std::size_t r = 0; r < 4; ++r) {
      EXPECT_EQ(ledger.count(row.name, kReasons[r]), row.excluded[r]) << row.name << " " << r;
      sum += row.excluded[r];
    }
    EXPECT_EQ(ledger.excluded(row.name), sum);
    EXPECT_EQ(ledger.accepted_per_category.at(row.name), row.usable);
  }
  EXPECT_TRUE(ledger.reconciles());
}

TEST(Ingest, RecencyIsCountedOutsideReasons) {
  const auto result = ingest::ingest(number({record("old", "Physics", 1999), record("new", "Physics", 2000)}));
  ASSERT_EQ(result.accepted.size(), 1u);
  EXPECT_EQ(result.accepted[0].doc_id, "new");
  EXPECT_EQ(result.ledger.recency_filtered, 1u);
  EXPECT_EQ(result.ledger.excluded_total(), 0u);
  EXPECT_TRUE(result.ledger.reconciles());
}

TEST(Ingest, DuplicateAcrossCategoriesKeepsFirstAndRecordsAlternate) {
  const auto result = ingest::ingest(number({record("X1", "Physics"), record("X1", "Space Sciences")}));
  ASSERT_EQ(result.accepted.size(), 1u);
  EXPECT_EQ(result.accepted[0].category, "Physics");
  EXPECT_EQ(result.accepted[0].alternate_categories, std::vector<std::string>{"Space Sciences"});
  EXPECT_EQ(result.ledger.count("Space Sciences", Reason::duplicate), 1u);
}

TEST(Ingest, PrecedenceOrder) {
  // No URL wins over everything; a URL-less first copy does not claim the id.
  auto r = ingest::ingest(number({record("A", "Physics", 2010, "Video", "protected", false),
                          record("A", "Physics", 2010, "Video", "protected"),
                          record("A", "Physics", 2010, "Technical Report", "public")}));
  EXPECT_EQ(r.ledger.count("Physics", Reason::no_download_url), 1u);
  EXPECT_EQ(r.ledger.count("Physics", Reason::invalid_type), 1u);
  EXPECT_EQ(r.ledger.count("Physics", Reason::duplicate), 1u);
  EXPECT_TRUE(r.accepted.empty());
  // Invalid type is checked before copyright.
  r = ingest::ingest(number({record("B", "Physics", 2010, "Poster", "protected")}));
  EXPECT_EQ(r.ledger.count("Physics", Reason::invalid_type), 1u);
}

TEST(Ingest, ParseErrorsAreCountedWithLineNumbers) {
  auto lines = number({record("ok", "Physics"), json{{"doc_id", "bad"}}, record("cat", "Cooking")});
  lines.push_back({4, json(), true});
  const auto r = ingest::ingest(lines);
  ASSERT_EQ(r.ledger.parse_errors.size(), 3u);
  EXPECT_EQ(r.ledger.parse_errors[0].line, 2u);
  EXPECT_EQ(r.ledger.parse_errors[1].line, 3u);
  EXPECT_EQ(r.ledger.parse_errors[2].message, "malformed JSON");
  EXPECT_TRUE(r.ledger.reconciles());
}

TEST(Ingest, ReingestingAcceptedIsIdempotent) {
  const auto first = ingest::ingest(number({record("a", "Physics"), record("a", "Engineering"), record("b", "Physics", 2010, "Abstract"),
                                    record("c", "Engineering")}));
  std::vector<json> again;
  for (const auto& doc : first.accepted) again.push_back(to_json(doc));
  const auto second = ingest::ingest(number(again));
  ASSERT_EQ(second.accepted.size(), first.accepted.size());
  for (std::size_t i = 0; i < first.accepted.size(); ++i) {
    EXPECT_EQ(to_json(second.accepted[i]), to_json(first.accepted[i]));
  }
  EXPECT_EQ(second.ledger.excluded_total(), 0u);
}

TEST(Ingest, ManifestFileWithTextPathAdapter) {
  const auto dir = std::filesystem::temp_directory_path() / "stella_ingest_test";
  std::filesystem::create_directories(dir / "text");
  std::ofstream(dir / "text" / "d1.txt") << "Extracted body text.";
  auto r1 = record("d1", "Physics");
  r1["text_path"] = "text/d1.txt";
  {
    std::ofstream m(dir / "manifest.jsonl");
    m << r1.dump() << "\n\n{not json\n" << record("d2", "Physics").dump() << "\n";
  }
  const auto result = ingest_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(result.accepted.size(), 2u);
  EXPECT_EQ(result.accepted[0].text.value_or(""), "Extracted body text.");
  ASSERT_EQ(result.ledger.parse_errors.size(), 1u);
  EXPECT_EQ(result.ledger.parse_errors[0].line, 3u);
  EXPECT_EQ(result.ledger.manifest_total, 3u);
  EXPECT_TRUE(result.ledger.reconciles());
  std::filesystem::remove_all(dir);
}
