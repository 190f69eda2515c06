#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/ingest.hpp"

namespace stella::chunker {

struct Token {
  std::size_t begin = 0;  // byte offsets into the tokenized text
  std::size_t end = 0;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;
};

// Splits on Unicode whitespace, then detaches leading and trailing
// punctuation runs of each piece as their own tokens. Inner punctuation
// stays: "Navier-Stokes" and "3.5" are single tokens, "flow." is two.
class WhitespaceTokenizer : public Tokenizer {
 public:
  std::vector<Token> tokenize(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer = default_tokenizer());
std::vector<std::string> token_strings(std::string_view text, const Tokenizer& tokenizer = default_tokenizer());

bool is_punctuation(char32_t cp);

// Strips control characters, turns CRLF/CR into LF, collapses other
// whitespace runs inside a line to one space, trims line ends and keeps at
// most one blank line between paragraphs.
std::string normalize(std::string_view text);

struct ChunkConfig {
  std::size_t chunk_size = 100;
  std::size_t overlap = 20;
  // Strongest first. A token boundary's level is the first separator found
  // in (last character of the left token + the gap after it); "" always
  // matches.
  std::vector<std::string> separator_hierarchy = {"\n\n", "\n", ". ", " ", ""};

  void validate() const;  // Error(config) unless 0 <= overlap < chunk_size
};

struct Passage {
  std::string passage_id;  // doc_id + "#" + ordinal
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t token_count = 0;
};

std::string passage_id(std::string_view doc_id, std::size_t ordinal);

nlohmann::json to_json(const Passage& p);
Passage passage_from_json(const nlohmann::json& j);  // Error(parse) on schema problems

// Token windows [begin, end) over a token sequence. While more than
// chunk_size tokens remain from start s, the window ends at the strongest
// boundary in [s + max(overlap + 1, chunk_size / 2), s + chunk_size]
// (the latest such position on ties) and the next window starts `overlap`
// tokens before that end. The remainder forms the final window.
std::vector<std::pair<std::size_t, std::size_t>> plan_windows(const std::vector<int>& boundary_level,
                                                              std::size_t n_tokens, const ChunkConfig& cfg);

// Throws Error(empty_document) when the text is missing or normalizes to
// nothing.
std::vector<Passage> chunk_document(const ingest::DocumentRecord& doc, const ChunkConfig& cfg,
                                    const Tokenizer& tokenizer = default_tokenizer());

std::vector<Passage> load_passages(const std::filesystem::path& passages_jsonl);

}  // namespace stella::chunker
