#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "stella/gateway/types.hpp"

namespace stella::gateway {

class Tagger {
 public:
  virtual ~Tagger() = default;

  // One coarse tag per token. Throws Error(precondition) on empty tokens.
  std::vector<PosTag> tag(const std::vector<std::string>& tokens);

 protected:
  virtual std::vector<PosTag> tag_tokens(const std::vector<std::string>& tokens) = 0;
};

// Rule-based fallback; rules live in resources/data/pos_heuristics.txt:
//   1. no letters                              -> OTHER
//   2. two or more letters, all uppercase      -> PROPN
//   3. capitalized and not sentence-initial    -> PROPN
//   4. lowercase form in the noun lexicon      -> NOUN
//   5. lowercase form ends with a noun suffix  -> NOUN
//   6. otherwise                               -> OTHER
class HeuristicTagger : public Tagger {
 public:
  HeuristicTagger();

 protected:
  std::vector<PosTag> tag_tokens(const std::vector<std::string>& tokens) override;

 private:
  std::vector<std::string> suffixes_;
  std::unordered_set<std::string> nouns_;
};

// POST /tag on the NLP sidecar.
class HttpTagger : public Tagger {
 public:
  explicit HttpTagger(ProviderProfile profile);

 protected:
  std::vector<PosTag> tag_tokens(const std::vector<std::string>& tokens) override;

 private:
  ProviderProfile profile_;
};

// Sidecar tagger when a profile is given, heuristic tagger otherwise.
std::unique_ptr<Tagger> make_tagger(const std::optional<ProviderProfile>& sidecar);

}  // namespace stella::gateway
