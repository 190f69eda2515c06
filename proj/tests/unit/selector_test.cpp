#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "stella/error.hpp"
#include "stella/selector.hpp"
#include "support/kmedoids_fixtures.hpp"

using namespace stella;
using namespace stella::selector;

namespace {

gateway::GatewayConfig fast() {
  gateway::GatewayConfig c;
  c.backoff_base_ms = 1;
  c.max_concurrent = 1;
  return c;
}

Intent classify_scripted(const std::vector<std::string>& replies, std::size_t* calls = nullptr) {
  auto transport = std::make_shared<gateway::ScriptedChatTransport>(replies);
  gateway::ChatGateway gw(transport, fast());
  auto out = classify_intent("Some passage about RSRM nozzles.", gw);
  if (calls) *calls = transport->calls();
  return out;
}

chunker::Passage passage(std::size_t i, std::string text) {
  auto n = chunker::count_tokens(text);
  return {chunker::passage_id("doc", i), "doc", i, std::move(text), n};
}

std::vector<double> at_angle(double deg) {
  const double r = deg * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

}  // namespace

TEST(Intent, ParseExactAndSubstring) {
  EXPECT_EQ(parse_intent_response("Definition / Principle"), Intent::def);
  EXPECT_EQ(parse_intent_response("  \"anomaly / risk\"\n"), Intent::anom);
  EXPECT_EQ(parse_intent_response("The best intent is Procedure / Operation."), Intent::proc);
  EXPECT_FALSE(parse_intent_response("Definition"));
  EXPECT_FALSE(parse_intent_response("Definition / Principle or Anomaly / Risk"));
  EXPECT_EQ(parse_intent_name("Comp"), Intent::comp);
  EXPECT_EQ(parse_intent_name("numerical / specification"), Intent::num);
}

TEST(Intent, ClassifyScripted) {
  std::size_t calls = 0;
  EXPECT_EQ(classify_scripted({"Definition / Principle"}, &calls), Intent::def);
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(classify_scripted({"The best intent is Procedure / Operation."}), Intent::proc);
  EXPECT_EQ(classify_scripted({"not sure", "Comparison / Trade-off"}, &calls), Intent::comp);
  EXPECT_EQ(calls, 2u);
  try {
    classify_scripted({"Definition"});
    FAIL() << "expected UnparseableIntent";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unparseable_intent);
  }
}

TEST(Intent, RequestShape) {
  auto transport = std::make_shared<gateway::ScriptedChatTransport>(std::vector<std::string>{"huh", "huh"});
  gateway::ChatGateway gw(transport, fast());
  EXPECT_THROW(classify_intent("PASSAGE-MARKER text", gw), Error);
  auto reqs = transport->requests();
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_EQ(reqs[0].temperature, 0.0);
  EXPECT_NE(reqs[0].user_prompt.find("PASSAGE-MARKER text"), std::string::npos);
  EXPECT_EQ(reqs[0].user_prompt.find("<passage_text>"), std::string::npos);
  EXPECT_NE(reqs[1].user_prompt.find("\"huh\""), std::string::npos);
  EXPECT_EQ(reqs[0].user_prompt, reqs[1].user_prompt.substr(0, reqs[0].user_prompt.size()));
}

TEST(Density, Boundary) {
  auto dict = terms::TerminologyDictionary(
      terms::entries_from_surfaces({"RSRM", "propellant-grain", "CFD", "3-sigma", "MODIS"}), terms::TermFilterConfig{});
  std::vector<chunker::Passage> ps = {
      passage(0, "RSRM grain uses propellant-grain data with CFD at 3-sigma from MODIS."),
      passage(1, "RSRM and RSRM and RSRM with propellant-grain."),
  };
  auto kept = density_filter(ps, dict);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].ordinal, 0u);
}

TEST(Density, PlantedFixture) {
  const std::vector<std::string> vocab = {"RSRM", "CFD", "MODIS", "SOFC", "XMM-Newton", "3-sigma", "H2O", "Navier-Stokes"};
  auto dict = terms::TerminologyDictionary(terms::entries_from_surfaces(vocab), terms::TermFilterConfig{});
  std::mt19937 rng(7);
  std::vector<chunker::Passage> ps;
  std::set<std::size_t> dense;
  for (std::size_t i = 0; i < 50; ++i) {
    // Every 50/18 step gets 5..8 distinct terms, the rest 0..4 with repeats.
    const bool is_dense = (i * 18) / 50 != ((i + 1) * 18) / 50;
    const std::size_t distinct = is_dense ? 5 + rng() % 4 : rng() % 5;
    std::string text = "The test campaign notes";
    for (std::size_t t = 0; t < distinct; ++t) {
      const std::size_t mentions = 1 + rng() % 3;
      for (std::size_t m = 0; m < mentions; ++m) text += " then " + vocab[(i + t) % vocab.size()];
    }
    ps.push_back(passage(i, text + "."));
    if (distinct >= 5) dense.insert(i);
  }
  ASSERT_EQ(dense.size(), 18u);
  auto kept = density_filter(ps, dict);
  std::set<std::size_t> got;
  for (const auto& p : kept) got.insert(p.ordinal);
  EXPECT_EQ(got, dense);
}

TEST(KMedoids, OrthogonalEachOwnMedoid) {
  std::vector<std::vector<double>> v(5, std::vector<double>(5, 0.0));
  for (int i = 0; i < 5; ++i) v[i][i] = 1.0;
  auto r = kmedoids(v, 5);
  EXPECT_EQ(r.medoids, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(r.total_deviation, 0.0);
}

TEST(KMedoids, DuplicateTieLowestIndex) {
  std::vector<std::vector<double>> v = {{1, 0}, {1, 0}, {0, 1}};
  auto r = kmedoids(v, 2);
  EXPECT_EQ(r.medoids, (std::vector<std::size_t>{0, 2}));
}

TEST(KMedoids, TwelvePlanarPointsMatchBruteForce) {
  std::vector<std::vector<double>> v;
  for (double base : {5.0, 50.0, 85.0}) {
    for (double off : {-3.0, -1.0, 1.5, 4.0}) v.push_back(at_angle(base + off));
  }
  auto r = kmedoids(v, 3);
  const auto d = cosine_distance_matrix(v);
  EXPECT_EQ(fixtures::deviation(d, v.size(), r.medoids), fixtures::exhaustive_optimum(d, v.size(), 3));
  EXPECT_LE(r.total_deviation, r.build_deviation);
  std::set<std::size_t> clusters(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(clusters.size(), 3u);
}

TEST(KMedoids, DistanceMatrixMatchesNaive) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto f = fixtures::gaussian_fixture(seed);
    const auto got = cosine_distance_matrix(f.points);
    const auto want = fixtures::naive_cosine_distances(f.points);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(KMedoids, GroupedFixturesMatchBruteForce) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto f = fixtures::grouped_fixture(seed);
    const auto n = f.points.size();
    auto r = kmedoids(f.points, f.k);
    const auto d = cosine_distance_matrix(f.points);
    EXPECT_EQ(fixtures::deviation(d, n, r.medoids), fixtures::exhaustive_optimum(d, n, f.k)) << "seed " << seed;
  }
}

// Without cluster structure PAM only promises a swap-local optimum.
TEST(KMedoids, UnstructuredFixturesAreSwapLocalOptima) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto f = fixtures::gaussian_fixture(seed);
    const auto n = f.points.size();
    auto r = kmedoids(f.points, f.k);
    EXPECT_LE(r.total_deviation, r.build_deviation);
    const auto d = cosine_distance_matrix(f.points);
    const double here = total_deviation(d, n, r.medoids);
    for (std::size_t p = 0; p < f.k; ++p) {
      for (std::size_t h = 0; h < n; ++h) {
        if (std::find(r.medoids.begin(), r.medoids.end(), h) != r.medoids.end()) continue;
        auto swapped = r.medoids;
        swapped[p] = h;
        EXPECT_GE(total_deviation(d, n, swapped), here - 1e-12) << "seed " << seed;
      }
    }
  }
}

TEST(KMedoids, Errors) {
  std::vector<std::vector<double>> v = {{1, 0}, {0, 1}};
  try {
    kmedoids(v, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::too_few_points);
  }
  std::vector<std::vector<double>> ragged = {{1, 0}, {0, 1, 0}};
  try {
    kmedoids(ragged, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(KMedoids, Deterministic) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> v(40, std::vector<double>(8));
  for (auto& row : v) {
    for (auto& x : row) x = g(rng);
  }
  auto a = kmedoids(v, 5);
  auto b = kmedoids(v, 5);
  EXPECT_EQ(a.medoids, b.medoids);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(Select, BalancedHundred) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  std::vector<PoolMember> pool;
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t i = 0; i < 20; ++i) {
      std::vector<double> e(5, 0.0);
      for (auto& x : e) x = std::abs(noise(rng));
      e[c] = 1.0;
      pool.push_back({passage(pool.size(), "p"), {}, e});
    }
  }
  auto sel = select_representatives(pool, Intent::num, ClusterConfig{});
  ASSERT_EQ(sel.candidates.size(), 100u);
  EXPECT_FALSE(sel.flagged);
  EXPECT_EQ(sel.backfilled, 0u);
  std::set<std::string> ids;
  for (const auto& c : sel.candidates) {
    ids.insert(c.passage.passage_id);
    EXPECT_LT(c.rank_to_medoid, 20u);
    EXPECT_LT(c.medoid_id, 5u);
    EXPECT_EQ(c.intent, Intent::num);
    if (c.rank_to_medoid == 0) {
      EXPECT_EQ(c.passage.ordinal, sel.clustering.medoids[c.medoid_id]);
    }
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST(Select, SkewedClusterBackfills) {
  std::vector<PoolMember> pool;
  for (int i = 0; i < 28; ++i) pool.push_back({passage(pool.size(), "a"), {}, at_angle(i * 0.5)});
  for (int i = 0; i < 12; ++i) pool.push_back({passage(pool.size(), "b"), {}, at_angle(80 + i * 0.5)});
  ClusterConfig cfg;
  cfg.k = 2;
  cfg.per_medoid = 20;
  auto sel = select_representatives(pool, Intent::anom, cfg);
  EXPECT_EQ(sel.candidates.size(), 40u);
  EXPECT_EQ(sel.backfilled, 8u);
  EXPECT_TRUE(sel.flagged);
  std::size_t flagged = 0;
  std::set<std::string> ids;
  for (const auto& c : sel.candidates) {
    ids.insert(c.passage.passage_id);
    if (c.backfilled) {
      ++flagged;
      EXPECT_GE(c.rank_to_medoid, 12u);
    }
  }
  EXPECT_EQ(flagged, 8u);
  EXPECT_EQ(ids.size(), 40u);
}

TEST(Select, PoolTooSmall) {
  std::vector<PoolMember> pool;
  for (int i = 0; i < 99; ++i) pool.push_back({passage(i, "x"), {}, at_angle(i)});
  try {
    select_representatives(pool, Intent::def, ClusterConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::pool_too_small);
  }
}

TEST(Select, CandidateJsonRoundTrip) {
  CandidatePassage c{passage(3, "RSRM text"), Intent::comp, {"RSRM"}, {0.25, -1.5}, 2, 7, true};
  auto back = candidate_from_json(to_json(c));
  EXPECT_EQ(back.passage.passage_id, c.passage.passage_id);
  EXPECT_EQ(back.intent, Intent::comp);
  EXPECT_EQ(back.embedding, c.embedding);
  EXPECT_EQ(back.medoid_id, 2u);
  EXPECT_EQ(back.rank_to_medoid, 7u);
  EXPECT_TRUE(back.backfilled);
}

TEST(Select, SampleIndices) {
  auto a = sample_indices(100, 10, 5);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(a, sample_indices(100, 10, 5));
  EXPECT_NE(a, sample_indices(100, 10, 6));
  EXPECT_EQ(sample_indices(4, 10, 1).size(), 4u);
}
