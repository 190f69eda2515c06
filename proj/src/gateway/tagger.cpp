#include "stella/gateway/tagger.hpp"

#include <algorithm>

#include "stella/error.hpp"
#include "stella/resources.hpp"
#include "stella/text.hpp"

namespace stella::gateway {

std::vector<PosTag> Tagger::tag(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) require(!t.empty(), "pos_tag: empty token");
  auto tags = tag_tokens(tokens);
  if (tags.size() != tokens.size()) {
    throw Error(ErrorKind::malformed_response, "pos_tag: tagger returned " +
                                                   std::to_string(tags.size()) + " tags for " +
                                                   std::to_string(tokens.size()) + " tokens");
  }
  return tags;
}

HeuristicTagger::HeuristicTagger() {
  std::string section;
  for (const auto& line : resources::lines("data/pos_heuristics.txt")) {
    if (line.front() == '[') {
      section = line;
      continue;
    }
    if (section == "[noun_suffixes]") {
      suffixes_.push_back(text::to_lower(line));
    } else if (section == "[nouns]") {
      nouns_.insert(text::to_lower(line));
    }
  }
  // longest suffix first so reporting is stable
  std::sort(suffixes_.begin(), suffixes_.end(),
            [](const auto& a, const auto& b) { return a.size() != b.size() ? a.size() > b.size() : a < b; });
}

namespace {

bool ends_sentence(std::string_view token) {
  return !token.empty() && (token.back() == '.' || token.back() == '?' || token.back() == '!');
}

}  // namespace

std::vector<PosTag> HeuristicTagger::tag_tokens(const std::vector<std::string>& tokens) {
  std::vector<PosTag> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    int letters = 0;
    int upper = 0;
    for (char c : tok) {
      if (text::is_ascii_alpha(c)) {
        ++letters;
        if (text::is_ascii_upper(c)) ++upper;
      }
    }
    const bool sentence_initial = i == 0 || ends_sentence(tokens[i - 1]);
    const auto lower = text::to_lower(tok);
    auto has_suffix = [&] {
      return std::any_of(suffixes_.begin(), suffixes_.end(), [&](const auto& s) {
        return lower.size() > s.size() + 1 && lower.ends_with(s);
      });
    };

    if (letters == 0) {
      out.push_back(PosTag::other);
    } else if (letters >= 2 && upper == letters) {
      out.push_back(PosTag::propn);
    } else if (text::is_ascii_upper(tok.front()) && !sentence_initial) {
      out.push_back(PosTag::propn);
    } else if (nouns_.contains(lower) || has_suffix()) {
      out.push_back(PosTag::noun);
    } else {
      out.push_back(PosTag::other);
    }
  }
  return out;
}

std::unique_ptr<Tagger> make_tagger(const std::optional<ProviderProfile>& sidecar) {
  if (sidecar && sidecar->kind != "mock") return std::make_unique<HttpTagger>(*sidecar);
  return std::make_unique<HeuristicTagger>();
}

}  // namespace stella::gateway
