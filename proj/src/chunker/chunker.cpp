#include "stella/chunker.hpp"

#include <algorithm>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/text.hpp"

namespace stella::chunker {

bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    const auto c = static_cast<char>(cp);
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) || (cp >= 0x3001 && cp <= 0x3003) ||
         (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         cp == 0x00A1 || cp == 0x00AB || cp == 0x00BB || cp == 0x00BF;
}

namespace {

struct CodePoint {
  std::size_t begin;
  std::size_t end;
  char32_t value;
};

void split_piece(const std::vector<CodePoint>& cps, std::size_t lo, std::size_t hi, std::vector<Token>& out) {
  std::size_t a = lo;
  while (a < hi && is_punctuation(cps[a].value)) ++a;
  if (a == hi) {
    out.push_back({cps[lo].begin, cps[hi - 1].end});
    return;
  }
  std::size_t b = hi;
  while (is_punctuation(cps[b - 1].value)) --b;
  if (a > lo) out.push_back({cps[lo].begin, cps[a - 1].end});
  out.push_back({cps[a].begin, cps[b - 1].end});
  if (b < hi) out.push_back({cps[b].begin, cps[hi - 1].end});
}

}  // namespace

std::vector<Token> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<CodePoint> cps;
  cps.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const auto begin = pos;
    const auto cp = text::next_code_point(text, pos);
    cps.push_back({begin, pos, cp});
  }
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (text::is_unicode_space(cps[i].value) || text::is_control(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && !text::is_unicode_space(cps[j].value) && !text::is_control(cps[j].value)) ++j;
    split_piece(cps, i, j, out);
    i = j;
  }
  return out;
}

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer tokenizer;
  return tokenizer;
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.tokenize(text).size();
}

std::vector<std::string> token_strings(std::string_view text, const Tokenizer& tokenizer) {
  std::vector<std::string> out;
  for (const auto& t : tokenizer.tokenize(text)) out.emplace_back(text.substr(t.begin, t.end - t.begin));
  return out;
}

std::string normalize(std::string_view input) {
  std::vector<std::string> lines{""};
  for (std::size_t pos = 0; pos < input.size();) {
    const auto begin = pos;
    const auto cp = text::next_code_point(input, pos);
    if (cp == '\r') {
      if (pos < input.size() && input[pos] == '\n') ++pos;
      lines.emplace_back();
    } else if (cp == '\n' || cp == 0x2028 || cp == 0x2029) {
      lines.emplace_back();
    } else if (text::is_unicode_space(cp) || cp == '\t') {
      if (!lines.back().empty() && lines.back().back() != ' ') lines.back().push_back(' ');
    } else if (text::is_control(cp)) {
      continue;
    } else {
      lines.back().append(input.substr(begin, pos - begin));
    }
  }
  std::string out;
  std::size_t blank_run = 0;
  for (auto& line : lines) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    if (line.empty()) {
      ++blank_run;
      continue;
    }
    if (!out.empty()) out += blank_run > 0 ? "\n\n" : "\n";
    blank_run = 0;
    out += line;
  }
  return out;
}

void ChunkConfig::validate() const {
  if (chunk_size == 0) throw Error(ErrorKind::config, "chunk_size must be positive");
  if (overlap >= chunk_size) throw Error(ErrorKind::config, "overlap must be smaller than chunk_size");
  if (separator_hierarchy.empty()) throw Error(ErrorKind::config, "separator_hierarchy is empty");
}

std::string passage_id(std::string_view doc_id, std::size_t ordinal) {
  return std::string(doc_id) + "#" + std::to_string(ordinal);
}

nlohmann::json to_json(const Passage& p) {
  return {{"passage_id", p.passage_id},
          {"doc_id", p.doc_id},
          {"ordinal", p.ordinal},
          {"text", p.text},
          {"token_count", p.token_count}};
}

Passage passage_from_json(const nlohmann::json& j) {
  try {
    Passage p;
    p.passage_id = j.at("passage_id").get<std::string>();
    p.doc_id = j.at("doc_id").get<std::string>();
    p.ordinal = j.at("ordinal").get<std::size_t>();
    p.text = j.at("text").get<std::string>();
    p.token_count = j.at("token_count").get<std::size_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("passage record: ") + e.what());
  }
}

std::vector<std::pair<std::size_t, std::size_t>> plan_windows(const std::vector<int>& level, std::size_t n,
                                                              const ChunkConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  if (n == 0) return windows;
  const std::size_t min_len = std::max(cfg.overlap + 1, cfg.chunk_size / 2);
  std::size_t start = 0;
  while (n - start > cfg.chunk_size) {
    std::size_t best_end = start + cfg.chunk_size;
    int best_level = level[best_end];
    for (std::size_t e = start + cfg.chunk_size; e >= start + min_len; --e) {
      if (level[e] > best_level) {
        best_level = level[e];
        best_end = e;
      }
    }
    windows.emplace_back(start, best_end);
    start = best_end - cfg.overlap;
  }
  windows.emplace_back(start, n);
  return windows;
}

std::vector<Passage> chunk_document(const ingest::DocumentRecord& doc, const ChunkConfig& cfg,
                                    const Tokenizer& tokenizer) {
  cfg.validate();
  const auto text = normalize(doc.text.value_or(""));
  const auto tokens = tokenizer.tokenize(text);
  if (tokens.empty()) throw Error(ErrorKind::empty_document, "document " + doc.doc_id + " has no text");

  // level[e] scores the boundary between token e-1 and token e.
  const int top = static_cast<int>(cfg.separator_hierarchy.size());
  std::vector<int> level(tokens.size() + 1, top);
  for (std::size_t e = 1; e < tokens.size(); ++e) {
    const auto from = tokens[e - 1].end - 1;
    const std::string_view joint(text.data() + from, tokens[e].begin - from);
    int lv = 0;
    for (int s = 0; s < top; ++s) {
      if (joint.find(cfg.separator_hierarchy[s]) != std::string_view::npos) {
        lv = top - s;
        break;
      }
    }
    level[e] = lv;
  }

  std::vector<Passage> out;
  for (const auto& [b, e] : plan_windows(level, tokens.size(), cfg)) {
    Passage p;
    p.doc_id = doc.doc_id;
    p.ordinal = out.size();
    p.passage_id = passage_id(doc.doc_id, p.ordinal);
    p.text = text.substr(tokens[b].begin, tokens[e - 1].end - tokens[b].begin);
    p.token_count = e - b;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Passage> load_passages(const std::filesystem::path& path) {
  std::vector<Passage> out;
  io::for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
    try {
      out.push_back(passage_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace stella::chunker
