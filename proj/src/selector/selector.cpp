#include "stella/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/kernels/vector_ops.hpp"
#include "stella/resources.hpp"
#include "stella/text.hpp"

namespace stella::selector {

using nlohmann::json;

std::string_view display_name(Intent intent) {
  switch (intent) {
    case Intent::def: return "Definition / Principle";
    case Intent::num: return "Numerical / Specification";
    case Intent::proc: return "Procedure / Operation";
    case Intent::comp: return "Comparison / Trade-off";
    case Intent::anom: return "Anomaly / Risk";
  }
  return "";
}

std::string_view short_name(Intent intent) {
  switch (intent) {
    case Intent::def: return "Def";
    case Intent::num: return "Num";
    case Intent::proc: return "Proc";
    case Intent::comp: return "Comp";
    case Intent::anom: return "Anom";
  }
  return "";
}

std::optional<Intent> parse_intent_name(std::string_view s) {
  s = text::trim(s);
  for (auto intent : kIntents) {
    if (text::iequals(s, display_name(intent)) || text::iequals(s, short_name(intent))) return intent;
  }
  return std::nullopt;
}

std::optional<Intent> parse_intent_response(std::string_view response) {
  auto s = text::trim(response);
  auto strip = [](char c) { return c == '"' || c == '\'' || c == '`' || c == '*' || c == '.' || c == ','; };
  while (!s.empty() && strip(s.front())) s.remove_prefix(1);
  while (!s.empty() && strip(s.back())) s.remove_suffix(1);
  s = text::trim(s);
  for (auto intent : kIntents) {
    if (text::iequals(s, display_name(intent))) return intent;
  }
  const auto lower = text::to_lower(response);
  std::optional<Intent> found;
  for (auto intent : kIntents) {
    if (lower.find(text::to_lower(display_name(intent))) == std::string::npos) continue;
    if (found) return std::nullopt;
    found = intent;
  }
  return found;
}

std::vector<chunker::Passage> density_filter(const std::vector<chunker::Passage>& passages,
                                             const terms::TerminologyDictionary& dict, std::size_t min_distinct) {
  std::vector<chunker::Passage> out;
  for (const auto& p : passages) {
    if (terms::distinct_terms(p.text, dict).size() >= min_distinct) out.push_back(p);
  }
  return out;
}

Intent classify_intent(std::string_view passage_text, gateway::ChatGateway& gw) {
  const auto tmpl = resources::prompt("intent_classification");
  gateway::ChatRequest req;
  req.system_prompt = tmpl.system;
  req.user_prompt = text::fill_template(tmpl.user, {{"passage_text", std::string(passage_text)}});
  req.temperature = gateway::kClassificationTemperature;
  req.max_output_tokens = 32;
  auto answer = gw.chat(req);
  if (auto intent = parse_intent_response(answer)) return *intent;

  const std::string error = "\"" + std::string(text::trim(answer)) + "\" is not exactly one of the 5 intent names.";
  req.user_prompt += text::fill_template(resources::get("prompts/intent_retry.txt"), {{"parse_error", error}});
  answer = gw.chat(req);
  if (auto intent = parse_intent_response(answer)) return *intent;
  throw Error(ErrorKind::unparseable_intent, "unparseable intent after retry: \"" + std::string(text::trim(answer)) + "\"");
}

void ClusterConfig::validate() const {
  if (k == 0) throw Error(ErrorKind::config, "k must be positive");
  if (per_medoid == 0) throw Error(ErrorKind::config, "per_medoid must be positive");
}

std::vector<double> cosine_distance_matrix(const std::vector<std::vector<double>>& vectors) {
  const auto n = vectors.size();
  if (n == 0) return {};
  const auto dim = vectors[0].size();
  std::vector<double> unit(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].size() != dim) {
      throw Error(ErrorKind::dimension_mismatch, "vector " + std::to_string(i) + " has dimension " +
                                                     std::to_string(vectors[i].size()) + ", expected " +
                                                     std::to_string(dim));
    }
    std::copy(vectors[i].begin(), vectors[i].end(), unit.begin() + static_cast<long>(i * dim));
    kernels::normalize(std::span<double>(unit.data() + i * dim, dim));
  }
  std::vector<double> d(n * n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    kernels::dot_rows(std::span<const double>(unit.data() + i * dim, dim), unit, row);
    for (std::size_t j = 0; j < n; ++j) {
      d[i * n + j] = i == j ? 0.0 : std::max(0.0, 1.0 - std::clamp(row[j], -1.0, 1.0));
    }
  }
  // Exact symmetry regardless of summation order.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[j * n + i] = d[i * n + j];
  }
  return d;
}

double total_deviation(const std::vector<double>& d, std::size_t n, const std::vector<std::size_t>& medoids) {
  double total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (auto m : medoids) best = std::min(best, d[m * n + j]);
    total += best;
  }
  return total;
}

KMedoidsResult kmedoids_on_matrix(const std::vector<double>& d, std::size_t n, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::precondition, "k must be positive");
  if (n < k) {
    throw Error(ErrorKind::too_few_points,
                "k-medoids needs at least k=" + std::to_string(k) + " points, got " + std::to_string(n));
  }
  constexpr double kEps = 1e-12;
  std::vector<std::size_t> medoids;
  std::vector<bool> is_medoid(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

  // BUILD
  {
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < n; ++j) sum += d[i * n + j];
      if (sum < best_sum - kEps) {
        best_sum = sum;
        best = i;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = d[best * n + j];
  }
  while (medoids.size() < k) {
    std::size_t best = n;
    double best_gain = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_medoid[i]) continue;
      double gain = 0;
      for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - d[i * n + j]);
      if (gain > best_gain + kEps) {
        best_gain = gain;
        best = i;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d[best * n + j]);
  }

  KMedoidsResult result;
  result.build_deviation = total_deviation(d, n, medoids);

  // SWAP, best improvement per pass.
  std::vector<std::size_t> first(n);
  std::vector<double> d1(n), d2(n);
  for (;;) {
    for (std::size_t j = 0; j < n; ++j) {
      d1[j] = d2[j] = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < medoids.size(); ++p) {
        const double v = d[medoids[p] * n + j];
        if (v < d1[j] || (v == d1[j] && medoids[p] < medoids[first[j]])) {
          d2[j] = d1[j];
          d1[j] = v;
          first[j] = p;
        } else if (v < d2[j]) {
          d2[j] = v;
        }
      }
    }
    double best_delta = -kEps;
    std::size_t best_p = 0, best_h = n;
    std::vector<std::size_t> order(medoids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return medoids[a] < medoids[b]; });
    for (auto p : order) {
      for (std::size_t h = 0; h < n; ++h) {
        if (is_medoid[h]) continue;
        double delta = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = d[h * n + j];
          delta += (first[j] == p ? std::min(d2[j], dh) : std::min(d1[j], dh)) - d1[j];
        }
        if (delta < best_delta) {
          best_delta = delta;
          best_p = p;
          best_h = h;
        }
      }
    }
    if (best_h == n) break;
    is_medoid[medoids[best_p]] = false;
    medoids[best_p] = best_h;
    is_medoid[best_h] = true;
    ++result.swaps;
  }

  std::sort(medoids.begin(), medoids.end());
  result.medoids = medoids;
  result.assignment.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < medoids.size(); ++c) {
      if (d[medoids[c] * n + j] < d[medoids[best] * n + j]) best = c;
    }
    result.assignment[j] = best;
  }
  result.total_deviation = total_deviation(d, n, medoids);
  return result;
}

KMedoidsResult kmedoids(const std::vector<std::vector<double>>& vectors, std::size_t k) {
  if (vectors.size() < k) {
    throw Error(ErrorKind::too_few_points,
                "k-medoids needs at least k=" + std::to_string(k) + " points, got " + std::to_string(vectors.size()));
  }
  return kmedoids_on_matrix(cosine_distance_matrix(vectors), vectors.size(), k);
}

json to_json(const CandidatePassage& c) {
  return {{"passage", chunker::to_json(c.passage)},
          {"intent", display_name(c.intent)},
          {"distinct_terms", c.distinct_terms},
          {"embedding", c.embedding},
          {"medoid_id", c.medoid_id},
          {"rank_to_medoid", c.rank_to_medoid},
          {"backfilled", c.backfilled}};
}

CandidatePassage candidate_from_json(const json& j) {
  try {
    CandidatePassage c;
    c.passage = chunker::passage_from_json(j.at("passage"));
    auto intent = parse_intent_name(j.at("intent").get<std::string>());
    if (!intent) throw Error(ErrorKind::parse, "unknown intent " + j.at("intent").dump());
    c.intent = *intent;
    c.distinct_terms = j.at("distinct_terms").get<std::vector<std::string>>();
    c.embedding = j.at("embedding").get<std::vector<double>>();
    c.medoid_id = j.at("medoid_id").get<std::size_t>();
    c.rank_to_medoid = j.at("rank_to_medoid").get<std::size_t>();
    c.backfilled = j.value("backfilled", false);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("candidate record: ") + e.what());
  }
}

std::vector<CandidatePassage> load_candidates(const std::filesystem::path& path) {
  std::vector<CandidatePassage> out;
  io::for_each_jsonl(path, [&](std::size_t line, const json& j) {
    try {
      out.push_back(candidate_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

Selection select_representatives(const std::vector<PoolMember>& pool, Intent intent, const ClusterConfig& cfg) {
  cfg.validate();
  const auto n = pool.size();
  if (n < cfg.k * cfg.per_medoid) {
    throw Error(ErrorKind::pool_too_small, std::string(display_name(intent)) + " pool has " + std::to_string(n) +
                                               " passages, needs " + std::to_string(cfg.k * cfg.per_medoid));
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(n);
  for (const auto& m : pool) vectors.push_back(m.embedding);
  const auto d = cosine_distance_matrix(vectors);

  Selection sel;
  sel.clustering = kmedoids_on_matrix(d, n, cfg.k);
  const auto& medoids = sel.clustering.medoids;

  auto nearest_first = [&](std::size_t m, std::vector<std::size_t>& idx) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (a == m || b == m) return a == m && b != m;
      const double da = d[m * n + a], db = d[m * n + b];
      return da != db ? da < db : a < b;
    });
  };

  std::vector<bool> taken(n, false);
  std::vector<std::vector<std::size_t>> chosen(medoids.size());
  for (std::size_t c = 0; c < medoids.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < n; ++j) {
      if (sel.clustering.assignment[j] == c) members.push_back(j);
    }
    nearest_first(medoids[c], members);
    if (members.size() > cfg.per_medoid) members.resize(cfg.per_medoid);
    for (auto j : members) taken[j] = true;
    chosen[c] = std::move(members);
  }
  std::vector<std::size_t> first_backfill(medoids.size());
  for (std::size_t c = 0; c < medoids.size(); ++c) {
    first_backfill[c] = chosen[c].size();
    if (chosen[c].size() >= cfg.per_medoid) continue;
    sel.flagged = true;
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < n; ++j) {
      if (!taken[j]) rest.push_back(j);
    }
    nearest_first(medoids[c], rest);
    for (auto j : rest) {
      if (chosen[c].size() == cfg.per_medoid) break;
      chosen[c].push_back(j);
      taken[j] = true;
      ++sel.backfilled;
    }
  }

  for (std::size_t c = 0; c < medoids.size(); ++c) {
    for (std::size_t r = 0; r < chosen[c].size(); ++r) {
      const auto& m = pool[chosen[c][r]];
      sel.candidates.push_back({m.passage, intent, m.distinct_terms, m.embedding, c, r, r >= first_backfill[c]});
    }
  }
  return sel;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (cap >= n) return idx;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the result does not depend on the
  // standard library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace stella::selector
