#include "stella/terminology.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/parallel.hpp"
#include "stella/text.hpp"

namespace stella::terms {

using nlohmann::json;

namespace {

// Pieces of a token that can hold a term: possessive dropped, split on '/'.
std::vector<std::pair<std::size_t, std::string_view>> token_pieces(std::string_view token) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  token = strip_possessive(token);
  std::size_t start = 0;
  while (start <= token.size()) {
    auto slash = token.find('/', start);
    if (slash == std::string_view::npos) slash = token.size();
    if (slash > start) out.emplace_back(start, token.substr(start, slash - start));
    start = slash + 1;
  }
  return out;
}

bool all_punct(std::string_view s) {
  for (std::size_t pos = 0; pos < s.size();) {
    if (!chunker::is_punctuation(text::next_code_point(s, pos))) return false;
  }
  return true;
}

std::string candidate_key(const std::string& surface, PatternClass cls) {
  return cls == PatternClass::all_caps ? "A:" + surface : "L:" + text::to_lower(surface);
}

struct Shard {
  struct Stats {
    std::size_t df = 0;
    std::map<std::string, std::size_t> variants;  // surface -> passages
  };
  std::map<std::string, Stats> keys;
};

}  // namespace

std::map<std::string, Candidate> extract_candidates(const std::vector<chunker::Passage>& passages,
                                                    std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, passages.size()));
  std::vector<Shard> shards(workers);
  const auto& tokenizer = chunker::default_tokenizer();
  auto errors = parallel_for(workers, workers, [&](std::size_t w) {
    auto& shard = shards[w];
    for (std::size_t i = w; i < passages.size(); i += workers) {
      const auto& text = passages[i].text;
      std::map<std::string, std::set<std::string>> seen;
      for (const auto& tok : tokenizer.tokenize(text)) {
        for (const auto& [_, piece] : token_pieces(std::string_view(text).substr(tok.begin, tok.end - tok.begin))) {
          auto cls = classify(piece);
          if (!cls) continue;
          std::string surface(piece);
          seen[candidate_key(surface, cls->pattern_class)].insert(std::move(surface));
        }
      }
      for (auto& [key, variants] : seen) {
        auto& stats = shard.keys[key];
        ++stats.df;
        for (const auto& v : variants) ++stats.variants[v];
      }
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::map<std::string, Shard::Stats> merged;
  for (auto& shard : shards) {
    for (auto& [key, stats] : shard.keys) {
      auto& m = merged[key];
      m.df += stats.df;
      for (auto& [v, n] : stats.variants) m.variants[v] += n;
    }
  }
  std::map<std::string, Candidate> out;
  for (auto& [key, stats] : merged) {
    const std::string* best = nullptr;
    std::size_t best_n = 0;
    for (const auto& [v, n] : stats.variants) {
      if (n > best_n) {  // map order gives the smallest surface on ties
        best = &v;
        best_n = n;
      }
    }
    const auto cls = classify(*best);
    Candidate c{*best, cls->pattern_class, cls->symbolic_trigger, stats.df};
    out.emplace(c.surface, std::move(c));
  }
  return out;
}

ZipfTable ZipfTable::load(const std::filesystem::path& tsv) {
  if (!std::filesystem::exists(tsv)) {
    throw Error(ErrorKind::frequency_table_missing, "frequency table not found: " + tsv.string());
  }
  return parse(io::read_file(tsv), tsv.string());
}

ZipfTable ZipfTable::parse(std::string_view tsv, std::string_view origin) {
  ZipfTable table;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(tsv, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    double zipf = 0;
    bool ok = tab != std::string_view::npos;
    if (ok) {
      std::istringstream in{std::string(line.substr(tab + 1))};
      ok = static_cast<bool>(in >> zipf) && std::isfinite(zipf);
    }
    if (!ok) {
      throw Error(ErrorKind::parse, std::string(origin) + ":" + std::to_string(line_no) + ": expected word<TAB>zipf");
    }
    table.table_.emplace(text::to_lower(text::trim(line.substr(0, tab))), zipf);
  }
  return table;
}

void ZipfTable::set(std::string_view word, double zipf) { table_[text::to_lower(word)] = zipf; }

std::optional<double> ZipfTable::lookup(std::string_view surface) const {
  auto it = table_.find(text::to_lower(surface));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

void TermFilterConfig::validate() const {
  if (min_doc_frequency < 1) throw Error(ErrorKind::config, "min_doc_frequency must be >= 1");
  if (!(zipf_threshold > 0)) throw Error(ErrorKind::config, "zipf_threshold must be > 0");
  if (allowed_pos.empty()) throw Error(ErrorKind::config, "allowed_pos is empty");
}

json TermFilterConfig::to_json() const {
  json pos = json::array();
  for (auto p : allowed_pos) pos.push_back(gateway::to_string(p));
  return {{"min_doc_frequency", min_doc_frequency}, {"zipf_threshold", zipf_threshold}, {"allowed_pos", pos}};
}

TermFilterConfig TermFilterConfig::from_json(const json& j) {
  TermFilterConfig cfg;
  cfg.min_doc_frequency = j.value("min_doc_frequency", cfg.min_doc_frequency);
  cfg.zipf_threshold = j.value("zipf_threshold", cfg.zipf_threshold);
  if (j.contains("allowed_pos")) {
    cfg.allowed_pos.clear();
    for (const auto& p : j["allowed_pos"]) {
      auto tag = gateway::parse_pos_tag(p.get<std::string>());
      if (!tag) throw Error(ErrorKind::config, "unknown POS tag " + p.dump());
      cfg.allowed_pos.insert(*tag);
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

std::vector<std::string> split_atoms(std::string_view surface) {
  std::vector<std::string> atoms;
  std::string cur;
  for (char c : surface) {
    if (c == '-' || c == ' ') {
      if (!cur.empty()) atoms.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) atoms.push_back(std::move(cur));
  return atoms;
}

struct Atom {
  std::string_view text;
  std::string lower;
  std::size_t begin;
  std::size_t end;
  bool break_before;
};

std::vector<Atom> text_atoms(std::string_view text) {
  std::vector<Atom> atoms;
  bool pending_break = true;
  for (const auto& tok : chunker::default_tokenizer().tokenize(text)) {
    const auto token = text.substr(tok.begin, tok.end - tok.begin);
    if (all_punct(token)) {
      pending_break = true;
      continue;
    }
    const auto stripped = strip_possessive(token);
    bool first_piece = true;
    for (const auto& [offset, piece] : token_pieces(token)) {
      if (!first_piece) pending_break = true;
      first_piece = false;
      std::size_t start = 0;
      while (start <= piece.size()) {
        auto dash = piece.find('-', start);
        if (dash == std::string_view::npos) dash = piece.size();
        if (dash > start) {
          const auto atom = piece.substr(start, dash - start);
          atoms.push_back({atom, text::to_lower(atom), tok.begin + offset + start, tok.begin + offset + dash,
                           pending_break});
          pending_break = false;
        } else if (dash < piece.size()) {
          pending_break = true;  // empty component, e.g. "a--b"
        }
        start = dash + 1;
      }
    }
    if (stripped.size() != token.size()) pending_break = true;
  }
  return atoms;
}

// 0 = no match, 1 = plural-folded match, 2 = exact match.
int atom_match(const Atom& a, const std::string& atom, const std::string& lower, bool case_sensitive, bool last) {
  const std::string_view have = case_sensitive ? a.text : std::string_view(a.lower);
  const std::string& want = case_sensitive ? atom : lower;
  if (have == want) return 2;
  if (!last) return 0;
  if (have.size() == want.size() + 1 && have.starts_with(want) && (have.back() == 's' || have.back() == 'S'))
    return 1;
  if (have.size() == want.size() + 2 && have.starts_with(want) &&
      text::iequals(have.substr(want.size()), "es"))
    return 1;
  return 0;
}

}  // namespace

TermMatcher::TermMatcher(const std::vector<TermEntry>& entries, MatchMode mode) {
  for (const auto& e : entries) {
    Compiled c;
    c.surface = e.surface;
    c.atoms = split_atoms(e.surface);
    if (c.atoms.empty()) continue;
    for (const auto& a : c.atoms) c.atoms_lower.push_back(text::to_lower(a));
    c.case_sensitive = mode == MatchMode::dictionary && e.pattern_class == PatternClass::all_caps;
    by_first_atom_[c.atoms_lower.front()].push_back(entries_.size());
    entries_.push_back(std::move(c));
  }
}

std::vector<TermMatch> TermMatcher::find(std::string_view text) const {
  std::vector<TermMatch> out;
  const auto atoms = text_atoms(text);
  std::size_t i = 0;
  while (i < atoms.size()) {
    const auto& first = atoms[i].lower;
    std::vector<std::size_t> candidates;
    auto add_key = [&](const std::string& key) {
      auto it = by_first_atom_.find(key);
      if (it != by_first_atom_.end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
    };
    add_key(first);
    if (first.size() > 1 && first.back() == 's') add_key(first.substr(0, first.size() - 1));
    if (first.size() > 2 && first.ends_with("es")) add_key(first.substr(0, first.size() - 2));

    const Compiled* best = nullptr;
    std::size_t best_len = 0;
    int best_quality = 0;
    for (auto idx : candidates) {
      const auto& e = entries_[idx];
      const auto m = e.atoms.size();
      if (i + m > atoms.size()) continue;
      int quality = 2;
      for (std::size_t k = 0; k < m && quality > 0; ++k) {
        if (k > 0 && atoms[i + k].break_before) quality = 0;
        else quality = std::min(quality, atom_match(atoms[i + k], e.atoms[k], e.atoms_lower[k], e.case_sensitive, k + 1 == m));
      }
      if (quality == 0) continue;
      const bool better = m > best_len || (m == best_len && quality > best_quality) ||
                          (m == best_len && quality == best_quality && e.surface < best->surface);
      if (better) {
        best = &e;
        best_len = m;
        best_quality = quality;
      }
    }
    if (!best) {
      ++i;
      continue;
    }
    out.push_back({best->surface, atoms[i].begin, atoms[i + best_len - 1].end});
    i += best_len;
  }
  return out;
}

std::vector<TermEntry> entries_from_surfaces(const std::vector<std::string>& surfaces) {
  std::vector<TermEntry> out;
  for (const auto& s : surfaces) {
    TermEntry e;
    e.surface = s;
    auto cls = classify(s);
    e.pattern_class = cls ? cls->pattern_class : PatternClass::hyphenated;
    if (cls) e.symbolic_trigger = cls->symbolic_trigger;
    out.push_back(std::move(e));
  }
  return out;
}

TerminologyDictionary::TerminologyDictionary(std::vector<TermEntry> entries, TermFilterConfig cfg,
                                             std::string fingerprint)
    : entries_(std::move(entries)), config_(std::move(cfg)), fingerprint_(std::move(fingerprint)) {
  std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.surface < b.surface; });
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].surface == entries_[i - 1].surface) {
      throw Error(ErrorKind::precondition, "duplicate dictionary surface " + entries_[i].surface);
    }
  }
  matcher_ = std::make_shared<TermMatcher>(entries_, MatchMode::dictionary);
}

const TermEntry* TerminologyDictionary::find(std::string_view surface) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), surface,
                             [](const TermEntry& e, std::string_view s) { return e.surface < s; });
  return it != entries_.end() && it->surface == surface ? &*it : nullptr;
}

std::vector<TermMatch> TerminologyDictionary::find_terms_in(std::string_view text) const {
  if (!matcher_) return {};
  return matcher_->find(text);
}

json TerminologyDictionary::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_) {
    json j = {{"surface", e.surface},
              {"pattern_class", to_string(e.pattern_class)},
              {"doc_frequency", e.doc_frequency},
              {"pos", gateway::to_string(e.pos)},
              {"zipf", e.zipf ? json(*e.zipf) : json(nullptr)}};
    if (!e.symbolic_trigger.empty()) j["symbolic_trigger"] = e.symbolic_trigger;
    entries.push_back(std::move(j));
  }
  return {{"filter_config", config_.to_json()}, {"corpus_fingerprint", fingerprint_}, {"entries", entries}};
}

TerminologyDictionary TerminologyDictionary::from_json(const json& j) {
  try {
    std::vector<TermEntry> entries;
    for (const auto& row : j.at("entries")) {
      TermEntry e;
      e.surface = row.at("surface").get<std::string>();
      auto cls = parse_pattern_class(row.at("pattern_class").get<std::string>());
      if (!cls) throw Error(ErrorKind::parse, "unknown pattern_class for " + e.surface);
      e.pattern_class = *cls;
      e.symbolic_trigger = row.value("symbolic_trigger", "");
      e.doc_frequency = row.at("doc_frequency").get<std::size_t>();
      auto pos = gateway::parse_pos_tag(row.at("pos").get<std::string>());
      if (!pos) throw Error(ErrorKind::parse, "unknown pos for " + e.surface);
      e.pos = *pos;
      if (row.contains("zipf") && !row["zipf"].is_null()) e.zipf = row["zipf"].get<double>();
      entries.push_back(std::move(e));
    }
    return TerminologyDictionary(std::move(entries), TermFilterConfig::from_json(j.at("filter_config")),
                                 j.value("corpus_fingerprint", ""));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("dictionary: ") + e.what());
  }
}

TerminologyDictionary TerminologyDictionary::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(io::read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

std::vector<std::string> distinct_terms(std::string_view text, const TerminologyDictionary& dict) {
  std::vector<std::string> out;
  for (auto& m : dict.find_terms_in(text)) {
    if (std::find(out.begin(), out.end(), m.surface) == out.end()) out.push_back(std::move(m.surface));
  }
  return out;
}

std::string_view to_string(FilterStage stage) {
  switch (stage) {
    case FilterStage::doc_frequency: return "doc_frequency";
    case FilterStage::zipf: return "zipf";
    case FilterStage::pos: return "pos";
  }
  return "unknown";
}

namespace {

gateway::PosTag head_pos(const std::string& surface, gateway::Tagger& tagger) {
  auto parts = split_atoms(surface);
  std::size_t head = parts.size() - 1;
  for (std::size_t k = parts.size(); k-- > 0;) {
    if (std::any_of(parts[k].begin(), parts[k].end(), [](char c) { return text::is_ascii_alpha(c) || (c & 0x80); })) {
      head = k;
      break;
    }
  }
  return tagger.tag(parts)[head];
}

}  // namespace

TerminologyDictionary build_dictionary(const std::map<std::string, Candidate>& candidates,
                                       const TermFilterConfig& cfg, const ZipfTable& freq, gateway::Tagger& tagger,
                                       BuildReport* report, std::string corpus_fingerprint) {
  cfg.validate();
  if (freq.empty()) throw Error(ErrorKind::frequency_table_missing, "frequency table is empty");
  std::vector<TermEntry> kept;
  for (const auto& [surface, c] : candidates) {
    auto reject = [&](FilterStage stage) {
      if (report) report->rejected.emplace(surface, stage);
    };
    if (c.doc_frequency < cfg.min_doc_frequency) {
      reject(FilterStage::doc_frequency);
      continue;
    }
    const auto zipf = freq.lookup(surface);
    if (zipf && *zipf > cfg.zipf_threshold) {
      reject(FilterStage::zipf);
      continue;
    }
    const auto pos = head_pos(surface, tagger);
    if (!cfg.allowed_pos.contains(pos)) {
      reject(FilterStage::pos);
      continue;
    }
    kept.push_back({surface, c.pattern_class, c.symbolic_trigger, c.doc_frequency, pos, zipf});
  }
  return TerminologyDictionary(std::move(kept), cfg, std::move(corpus_fingerprint));
}

}  // namespace stella::terms
