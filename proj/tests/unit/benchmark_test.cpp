#include <gtest/gtest.h>

#include <fstream>

#include "stella/benchmark.hpp"
#include "stella/error.hpp"
#include "stella/io.hpp"

using namespace stella;
using namespace stella::benchmark;
namespace fs = std::filesystem;
using querygen::QueryType;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("stella_bench_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<CorpusEntry> corpus(std::size_t n) {
  std::vector<CorpusEntry> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({chunker::passage_id("doc" + std::to_string(i / 10), i % 10), "Doc", "passage text " + std::to_string(i)});
  }
  return out;
}

querygen::QueryRecord query(const std::string& passage_id, QueryType t, bool valid = true) {
  querygen::QueryRecord r;
  r.query_id = querygen::query_id(passage_id, t);
  r.passage_id = passage_id;
  r.qtype = t;
  r.intent = selector::Intent::proc;
  r.final_query = "How do the RSRM joints " + passage_id + " behave?";
  r.valid = valid;
  return r;
}

xlingual::TranslationRecord translation(const querygen::QueryRecord& q, const std::string& lang) {
  xlingual::TranslationRecord t;
  t.query_id = q.query_id;
  t.passage_id = q.passage_id;
  t.qtype = q.qtype;
  t.language = lang;
  t.source_query = q.final_query;
  t.translated_query = "[" + lang + "] RSRM " + q.passage_id;
  if (q.qtype == QueryType::tcq) t.kept_terms = {"RSRM"};
  return t;
}

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

}  // namespace

TEST(Beir, FiveHundredCandidatesGiveThousandPairs) {
  auto c = corpus(600);
  std::vector<querygen::QueryRecord> qs;
  for (std::size_t i = 0; i < 500; ++i) {
    qs.push_back(query(c[i].id, QueryType::tcq));
    qs.push_back(query(c[i].id, QueryType::taq));
  }
  ExportReport report;
  auto splits = build_splits(c, qs, {}, &report);
  ASSERT_EQ(splits.size(), 1u);
  EXPECT_EQ(splits["en"].queries.size(), 1000u);
  EXPECT_EQ(splits["en"].qrels.size(), 1000u);
  EXPECT_EQ(splits["en"].corpus.size(), 600u);
  EXPECT_EQ(report.languages["en"].queries, 1000u);

  auto dir = temp_dir("thousand");
  export_beir(c, qs, {}, dir);
  std::ifstream in(dir / "en" / "qrels" / "test.tsv");
  std::size_t lines = 0;
  std::string first;
  for (std::string l; std::getline(in, l); ++lines) {
    if (lines == 0) first = l;
  }
  EXPECT_EQ(first, "query-id\tcorpus-id\tscore");
  EXPECT_EQ(lines, 1001u);
  fs::remove_all(dir);
}

TEST(Beir, EmptyQuerySetIsValidSplit) {
  auto dir = temp_dir("empty");
  export_beir(corpus(3), {}, {}, dir);
  EXPECT_EQ(io::read_file(dir / "en" / "qrels" / "test.tsv"), "query-id\tcorpus-id\tscore\n");
  auto s = load_beir(dir / "en");
  EXPECT_TRUE(s.queries.empty());
  EXPECT_EQ(s.corpus.size(), 3u);
  fs::remove_all(dir);
}

TEST(Beir, RoundTripAllLanguages) {
  auto c = corpus(30);
  std::vector<querygen::QueryRecord> qs;
  std::vector<xlingual::TranslationRecord> ts;
  for (std::size_t i = 0; i < 12; ++i) {
    for (auto t : {QueryType::tcq, QueryType::taq}) {
      qs.push_back(query(c[i * 2].id, t));
      for (auto lang : xlingual::kTargetLanguages) ts.push_back(translation(qs.back(), std::string(lang)));
    }
  }
  auto dir = temp_dir("roundtrip");
  export_beir(c, qs, ts, dir);
  const auto built = build_splits(c, qs, ts);
  const auto loaded = load_benchmark(dir);
  ASSERT_EQ(loaded.size(), 7u);
  EXPECT_EQ(loaded, built);
  EXPECT_EQ(loaded.at("ko").queries.size(), 24u);
  EXPECT_EQ(loaded.at("ko").queries[0].metadata["language"], "ko");
  EXPECT_EQ(loaded.at("en").queries[0].metadata["source_doc_id"], "doc0");
  // Corpus bytes shared across splits.
  EXPECT_EQ(io::read_file(dir / "en" / "corpus.jsonl"), io::read_file(dir / "th" / "corpus.jsonl"));
  // Deterministic ordering: re-export gives identical bytes.
  auto again = temp_dir("roundtrip2");
  std::reverse(qs.begin(), qs.end());
  export_beir(c, qs, ts, again);
  EXPECT_EQ(io::read_file(dir / "fr" / "queries.jsonl"), io::read_file(again / "fr" / "queries.jsonl"));
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(Beir, ExclusionsAreCounted) {
  auto c = corpus(10);
  std::vector<querygen::QueryRecord> qs = {query(c[0].id, QueryType::tcq), query(c[1].id, QueryType::tcq, false),
                                           query(c[2].id, QueryType::taq)};
  std::vector<xlingual::TranslationRecord> ts = {translation(qs[0], "ko"), translation(qs[1], "ko"),
                                                 translation(qs[2], "ko")};
  ts[0].translated_query = "rsrm lowercased";
  ExportReport report;
  auto splits = build_splits(c, qs, ts, &report);
  EXPECT_EQ(splits["en"].queries.size(), 2u);
  EXPECT_EQ(splits["ko"].queries.size(), 1u);
  EXPECT_EQ(report.languages["en"].excluded_invalid, 1u);
  EXPECT_EQ(report.languages["ko"].excluded_invalid, 1u);
  EXPECT_EQ(report.languages["ko"].excluded_preservation, 1u);
}

TEST(Beir, IntegrityErrors) {
  auto c = corpus(5);
  try {
    build_splits(c, {query("nowhere#0", QueryType::tcq)}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dangling_qrel);
    EXPECT_NE(std::string(e.what()).find("nowhere#0"), std::string::npos);
  }
  auto dup = c;
  dup.push_back(c[0]);
  try {
    build_splits(dup, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::duplicate_id);
  }
  try {
    build_splits(c, {query(c[0].id, QueryType::tcq), query(c[0].id, QueryType::tcq)}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::duplicate_id);
  }
}

TEST(Beir, LoadErrors) {
  auto dir = temp_dir("load");
  export_beir(corpus(8), {query("doc0#1", QueryType::tcq)}, {}, dir);
  const auto split = dir / "en";

  write(split / "qrels" / "test.tsv", "query-id\tcorpus-id\tscore\ndoc0#1:tcq\tmissing#9\t1\n");
  try {
    load_beir(split);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dangling_qrel);
    EXPECT_NE(std::string(e.what()).find("missing#9"), std::string::npos);
  }

  write(split / "qrels" / "test.tsv", "query-id\tcorpus-id\tscore\ndoc0#1:tcq\tdoc0#1\tone\n");
  EXPECT_THROW(load_beir(split), Error);

  auto lines = io::read_file(split / "corpus.jsonl");
  std::string broken;
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < lines.size(); ++n) {
    auto end = lines.find('\n', pos);
    broken += n == 6 ? std::string("{\"_id\": oops\n") : lines.substr(pos, end + 1 - pos);
    pos = end + 1;
  }
  write(split / "corpus.jsonl", broken);
  try {
    load_beir(split);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find(":7"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}
