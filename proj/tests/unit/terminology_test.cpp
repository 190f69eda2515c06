#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "stella/error.hpp"
#include "stella/terminology.hpp"
#include "support/acceptance_fixtures.hpp"

using namespace stella;
using namespace stella::terms;
using gateway::PosTag;

namespace {

std::vector<chunker::Passage> passages(const std::vector<std::string>& texts) {
  std::vector<chunker::Passage> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back({chunker::passage_id("doc", i), "doc", i, texts[i], chunker::count_tokens(texts[i])});
  }
  return out;
}

TerminologyDictionary dict_of(const std::vector<std::string>& surfaces) {
  return TerminologyDictionary(entries_from_surfaces(surfaces), TermFilterConfig{});
}

std::vector<std::string> surfaces(const std::vector<TermMatch>& matches) {
  std::vector<std::string> out;
  for (const auto& m : matches) out.push_back(m.surface);
  return out;
}

// Tagger that returns a fixed tag per lowercase word, OTHER otherwise.
class TableTagger : public gateway::Tagger {
 public:
  explicit TableTagger(std::map<std::string, PosTag> table) : table_(std::move(table)) {}

 protected:
  std::vector<PosTag> tag_tokens(const std::vector<std::string>& tokens) override {
    std::vector<PosTag> out;
    for (const auto& t : tokens) {
      auto it = table_.find(t);
      out.push_back(it == table_.end() ? PosTag::other : it->second);
    }
    return out;
  }

 private:
  std::map<std::string, PosTag> table_;
};

}  // namespace

TEST(Patterns, Classes) {
  EXPECT_EQ(classify("CFD")->pattern_class, PatternClass::all_caps);
  EXPECT_EQ(classify("MODIS")->pattern_class, PatternClass::all_caps);
  EXPECT_EQ(classify("Navier-Stokes")->pattern_class, PatternClass::hyphenated);
  EXPECT_EQ(classify("XMM-Newton")->pattern_class, PatternClass::hyphenated);
  EXPECT_EQ(classify("3-sigma")->symbolic_trigger, "digit_hyphen");
  EXPECT_EQ(classify("H2O")->symbolic_trigger, "chemical");
  EXPECT_EQ(classify("CO2")->symbolic_trigger, "chemical");
  EXPECT_EQ(classify("10km")->symbolic_trigger, "unit");
  EXPECT_EQ(classify("δ-phase")->symbolic_trigger, "greek_char");
  EXPECT_EQ(classify("alpha-Particle")->symbolic_trigger, "greek_name");
  EXPECT_FALSE(classify("boundary-layer"));
  EXPECT_FALSE(classify("A"));
  EXPECT_FALSE(classify("Rocket"));
  EXPECT_FALSE(classify("quick"));
  EXPECT_FALSE(classify("1999"));
  EXPECT_EQ(strip_possessive("RSRM's"), "RSRM");
}

TEST(Extract, MixedPassage) {
  const auto c = extract_candidates(passages({"CFD and MODIS use Navier-Stokes solvers at 3-sigma"}));
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c.at("CFD").pattern_class, PatternClass::all_caps);
  EXPECT_EQ(c.at("MODIS").pattern_class, PatternClass::all_caps);
  EXPECT_EQ(c.at("Navier-Stokes").pattern_class, PatternClass::hyphenated);
  EXPECT_EQ(c.at("3-sigma").pattern_class, PatternClass::symbolic);
  EXPECT_TRUE(extract_candidates(passages({"the quick brown fox"})).empty());
}

TEST(Extract, DocFrequencyCountsDistinctPassages) {
  std::vector<std::string> texts;
  for (int i = 0; i < 15; ++i) {
    if (i < 12) texts.push_back(i == 3 ? "RSRM joints, RSRM's seals" : "the RSRM segment " + std::to_string(i));
    else texts.push_back("a segment without the motor");
  }
  // Oracle: brute-force count of passages whose text contains the token.
  std::size_t expected = 0;
  for (const auto& t : texts) expected += t.find("RSRM") != std::string::npos;
  const auto c = extract_candidates(passages(texts), 3);
  EXPECT_EQ(expected, 12u);
  EXPECT_EQ(c.at("RSRM").doc_frequency, expected);
}

TEST(Extract, CaseVariantsMergeExceptAcronyms) {
  const auto c = extract_candidates(passages({"X-ray flux", "X-Ray flux", "X-ray lines", "Rsrm RSRM"}));
  ASSERT_TRUE(c.contains("X-ray"));
  EXPECT_FALSE(c.contains("X-Ray"));
  EXPECT_EQ(c.at("X-ray").doc_frequency, 3u);
  EXPECT_TRUE(c.contains("RSRM"));
  EXPECT_FALSE(c.contains("Rsrm"));
}

TEST(BuildDictionary, FiltersAndExamples) {
  ZipfTable freq;
  freq.set("system", 5.1);
  freq.set("propellant", 3.2);
  TableTagger tagger({{"system", PosTag::noun}, {"propellant", PosTag::noun}, {"RSRM", PosTag::propn}});
  std::map<std::string, Candidate> cands;
  // Class only drives matching case rules for hand-made lexical entries.
  cands["system"] = {"system", PatternClass::hyphenated, "", 40};
  cands["propellant"] = {"propellant", PatternClass::hyphenated, "", 40};
  cands["RSRM"] = {"RSRM", PatternClass::all_caps, "", 9};
  BuildReport report;
  const auto dict = build_dictionary(cands, TermFilterConfig{}, freq, tagger, &report);
  ASSERT_EQ(dict.size(), 1u);
  EXPECT_EQ(dict.entries()[0].surface, "propellant");
  EXPECT_EQ(dict.entries()[0].pos, PosTag::noun);
  EXPECT_EQ(report.rejected.at("system"), FilterStage::zipf);
  EXPECT_EQ(report.rejected.at("RSRM"), FilterStage::doc_frequency);
}

TEST(BuildDictionary, AbsentFromTableIsRareAndHeadTagged) {
  ZipfTable freq;
  freq.set("unrelated", 6.0);
  gateway::HeuristicTagger tagger;
  std::map<std::string, Candidate> cands;
  cands["Navier-Stokes"] = {"Navier-Stokes", PatternClass::hyphenated, "", 12};
  cands["10km"] = {"10km", PatternClass::symbolic, "unit", 12};
  const auto dict = build_dictionary(cands, TermFilterConfig{}, freq, tagger);
  ASSERT_EQ(dict.size(), 1u);
  EXPECT_FALSE(dict.entries()[0].zipf.has_value());
  EXPECT_EQ(dict.entries()[0].pos, PosTag::propn);
}

TEST(BuildDictionary, EmptyTableIsMissing) {
  gateway::HeuristicTagger tagger;
  try {
    build_dictionary({}, TermFilterConfig{}, ZipfTable{}, tagger);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::frequency_table_missing);
  }
  try {
    ZipfTable::load("/nonexistent/wordfreq.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::frequency_table_missing);
  }
}

TEST(BuildDictionary, Monotonicity) {
  ZipfTable freq;
  TableTagger tagger({});
  std::map<std::string, Candidate> cands;
  for (int i = 0; i < 20; ++i) {
    const std::string s = "T" + std::string(1, static_cast<char>('A' + i)) + "X";
    cands[s] = {s, PatternClass::all_caps, "", static_cast<std::size_t>(i + 1)};
    freq.set(s, 1.0 + 0.25 * i);
  }
  TableTagger nouns([&] {
    std::map<std::string, PosTag> m;
    for (auto& [s, _] : cands) m[s] = PosTag::propn;
    return m;
  }());
  std::size_t prev = 0;
  for (double tau : {1.0, 2.0, 3.0, 3.5, 4.0, 6.0}) {
    TermFilterConfig cfg;
    cfg.min_doc_frequency = 5;
    cfg.zipf_threshold = tau;
    const auto n = build_dictionary(cands, cfg, freq, nouns).size();
    EXPECT_GE(n, prev);
    prev = n;
  }
  prev = 1000;
  for (std::size_t df : {1u, 3u, 10u, 15u, 30u}) {
    TermFilterConfig cfg;
    cfg.min_doc_frequency = df;
    cfg.zipf_threshold = 10;
    const auto n = build_dictionary(cands, cfg, freq, nouns).size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(FindTerms, Examples) {
  const auto dict = dict_of({"RSRM", "propellant", "Navier-Stokes"});
  const std::string text = "the RSRM propellant grains";
  const auto m = dict.find_terms_in(text);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(text.substr(m[0].begin, m[0].end - m[0].begin), "RSRM");
  EXPECT_EQ(text.substr(m[1].begin, m[1].end - m[1].begin), "propellant");
  EXPECT_TRUE(dict.find_terms_in("rsrm").empty());
  EXPECT_EQ(surfaces(dict.find_terms_in("Navier Stokes")), std::vector<std::string>{"Navier-Stokes"});
  EXPECT_EQ(surfaces(dict.find_terms_in("navier-stokes equations")), std::vector<std::string>{"Navier-Stokes"});
}

TEST(FindTerms, LongestMatchPluralsAndBreaks) {
  const auto dict = dict_of({"X-ray", "X-ray-Burst", "CFD", "Navier-Stokes"});
  EXPECT_EQ(surfaces(dict.find_terms_in("X-ray bursts and X-rays")), (std::vector<std::string>{"X-ray-Burst", "X-ray"}));
  EXPECT_EQ(surfaces(dict.find_terms_in("CFDs, CFD's output")), (std::vector<std::string>{"CFD", "CFD"}));
  EXPECT_TRUE(dict.find_terms_in("Navier, Stokes").empty());
  EXPECT_EQ(surfaces(dict.find_terms_in("CFD/Navier-Stokes")), (std::vector<std::string>{"CFD", "Navier-Stokes"}));
  const std::string text = "(RSRM-based) rockets";
  const auto rsrm = dict_of({"RSRM"}).find_terms_in(text);
  ASSERT_EQ(rsrm.size(), 1u);
  EXPECT_EQ(text.substr(rsrm[0].begin, rsrm[0].end - rsrm[0].begin), "RSRM");
}

TEST(FindTerms, BanModeIsCaseInsensitive) {
  TermMatcher ban(entries_from_surfaces({"RSRM", "propellant"}), MatchMode::ban);
  EXPECT_EQ(surfaces(ban.find("Propellants and rsrm")), (std::vector<std::string>{"propellant", "RSRM"}));
}

TEST(Dictionary, JsonRoundTripAndSoundness) {
  ZipfTable freq;
  freq.set("filler", 7);
  gateway::HeuristicTagger tagger;
  std::vector<std::string> texts;
  for (int i = 0; i < 12; ++i) texts.push_back("CFD runs for the XMM-Newton 3-sigma H2O case " + std::to_string(i));
  const auto cands = extract_candidates(passages(texts));
  TermFilterConfig cfg;
  const auto dict = build_dictionary(cands, cfg, freq, tagger, nullptr, "abc");
  ASSERT_FALSE(dict.empty());
  for (const auto& e : dict.entries()) EXPECT_TRUE(matches_class(e.surface, e.pattern_class)) << e.surface;
  const auto again = TerminologyDictionary::from_json(dict.to_json());
  EXPECT_EQ(again.to_json(), dict.to_json());
  EXPECT_EQ(again.corpus_fingerprint(), "abc");
  for (const auto& e : dict.entries()) {
    std::size_t hits = 0;
    for (const auto& t : texts) {
      for (const auto& m : dict.find_terms_in(t)) hits += m.surface == e.surface;
    }
    EXPECT_GE(hits, cfg.min_doc_frequency) << e.surface;
  }
}

TEST(BuildDictionary, PlantedCorpusKeepsExactlyThePassingTerms) {
  const auto corpus = fixtures::planted_corpus();
  fixtures::PlantedTagger tagger;
  const auto cands = extract_candidates(corpus.passages, 3);
  BuildReport report;
  const auto dict = build_dictionary(cands, TermFilterConfig{}, corpus.freq, tagger, &report);
  std::set<std::string> want, got;
  for (const auto& t : fixtures::planted_terms()) {
    if (!t.fails) want.insert(t.surface);
    else EXPECT_EQ(report.rejected.at(t.surface), *t.fails) << t.surface;
  }
  for (const auto& e : dict.entries()) got.insert(e.surface);
  EXPECT_EQ(got, want);

  // every entry is found again in at least min_doc_frequency passages
  for (const auto& e : dict.entries()) {
    std::size_t hits = 0;
    for (const auto& p : corpus.passages) {
      const auto found = surfaces(dict.find_terms_in(p.text));
      hits += std::find(found.begin(), found.end(), e.surface) != found.end();
    }
    EXPECT_GE(hits, 10u) << e.surface;
  }
}

TEST(BuildDictionary, ThresholdsAreMonotone) {
  const auto corpus = fixtures::planted_corpus();
  fixtures::PlantedTagger tagger;
  const auto cands = extract_candidates(corpus.passages);
  std::size_t prev = 0;
  for (double z : {3.0, 3.5, 4.0, 5.0, 6.0}) {
    TermFilterConfig cfg;
    cfg.zipf_threshold = z;
    const auto n = build_dictionary(cands, cfg, corpus.freq, tagger).size();
    EXPECT_GE(n, prev) << z;
    prev = n;
  }
  prev = 1000;
  for (std::size_t df : {1u, 5u, 10u, 20u, 40u}) {
    TermFilterConfig cfg;
    cfg.min_doc_frequency = df;
    const auto n = build_dictionary(cands, cfg, corpus.freq, tagger).size();
    EXPECT_LE(n, prev) << df;
    prev = n;
  }
}
