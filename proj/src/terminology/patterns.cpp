#include <array>
#include <regex>

#include "stella/terminology.hpp"
#include "stella/text.hpp"

namespace stella::terms {

std::string_view to_string(PatternClass c) {
  switch (c) {
    case PatternClass::all_caps: return "all_caps";
    case PatternClass::hyphenated: return "hyphenated";
    case PatternClass::symbolic: return "symbolic";
  }
  return "unknown";
}

std::optional<PatternClass> parse_pattern_class(std::string_view s) {
  if (s == "all_caps") return PatternClass::all_caps;
  if (s == "hyphenated") return PatternClass::hyphenated;
  if (s == "symbolic") return PatternClass::symbolic;
  return std::nullopt;
}

namespace {

const std::regex& re(int which) {
  static const std::array<std::regex, 5> patterns = {
      std::regex(R"(^[0-9]+(\.[0-9]+)?(-[A-Za-z]+)+$)"),
      std::regex(R"(^(?=.*[0-9])([A-Z][a-z]?[0-9]*)+$)"),
      std::regex(R"(^[0-9]+(\.[0-9]+)?[A-Za-z]+$)"),
      std::regex(R"(^(?=([0-9]*[A-Z]){2})[A-Z0-9]{2,}$)"),
      std::regex(R"(^[A-Za-z]+(-[A-Za-z]+)+$)"),
  };
  return patterns[which];
}
enum { kDigitHyphen, kChemical, kUnit, kAllCaps, kHyphenated };

constexpr std::array<std::string_view, 24> kGreekNames = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa", "lambda", "mu",
    "nu", "xi", "omicron", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega"};

bool has_greek_char(std::string_view s) {
  for (std::size_t pos = 0; pos < s.size();) {
    if (text::is_greek_letter(text::next_code_point(s, pos))) return true;
  }
  return false;
}

bool has_letter(std::string_view s) {
  for (std::size_t pos = 0; pos < s.size();) {
    const auto cp = text::next_code_point(s, pos);
    if (cp < 0x80 ? text::is_ascii_alpha(static_cast<char>(cp)) : text::is_greek_letter(cp)) return true;
  }
  return false;
}

bool has_greek_name_component(std::string_view s) {
  if (s.find('-') == std::string_view::npos) return false;
  for (const auto& part : text::split(s, '-')) {
    const auto lower = text::to_lower(part);
    for (auto name : kGreekNames) {
      if (lower == name) return true;
    }
  }
  return false;
}

bool full(std::string_view s, int which) { return std::regex_match(s.begin(), s.end(), re(which)); }

// Cheap gate: lowercase-only ASCII words never belong to any class.
bool worth_checking(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80 || text::is_ascii_upper(static_cast<char>(c)) || text::is_ascii_digit(static_cast<char>(c)) ||
        c == '-')
      return true;
  }
  return false;
}

std::optional<std::string> symbolic_trigger(std::string_view s) {
  if (has_greek_char(s)) return "greek_char";
  if (has_greek_name_component(s) && full(s, kHyphenated)) return "greek_name";
  if (full(s, kDigitHyphen)) return "digit_hyphen";
  if (full(s, kChemical)) return "chemical";
  if (full(s, kUnit)) return "unit";
  return std::nullopt;
}

bool capitalized_component(std::string_view s) {
  for (const auto& part : text::split(s, '-')) {
    if (!part.empty() && text::is_ascii_upper(part[0])) return true;
  }
  return false;
}

}  // namespace

bool matches_class(std::string_view s, PatternClass cls) {
  switch (cls) {
    case PatternClass::symbolic:
      if (has_greek_char(s)) {
        // Greek letters with optional ASCII letters, digits and hyphens.
        for (std::size_t pos = 0; pos < s.size();) {
          const auto cp = text::next_code_point(s, pos);
          const bool ok = cp < 0x80 ? (text::is_ascii_alpha(static_cast<char>(cp)) ||
                                       text::is_ascii_digit(static_cast<char>(cp)) || cp == '-')
                                    : text::is_greek_letter(cp);
          if (!ok) return false;
        }
        return has_letter(s);
      }
      return symbolic_trigger(s).has_value();
    case PatternClass::all_caps: return full(s, kAllCaps);
    case PatternClass::hyphenated: return full(s, kHyphenated) && capitalized_component(s);
  }
  return false;
}

std::optional<Classification> classify(std::string_view s) {
  if (s.empty() || !worth_checking(s)) return std::nullopt;
  if (matches_class(s, PatternClass::symbolic)) {
    return Classification{PatternClass::symbolic, *symbolic_trigger(s)};
  }
  if (matches_class(s, PatternClass::all_caps)) return Classification{PatternClass::all_caps, {}};
  if (matches_class(s, PatternClass::hyphenated)) return Classification{PatternClass::hyphenated, {}};
  return std::nullopt;
}

std::string_view strip_possessive(std::string_view token) {
  if (token.size() > 2 && token.ends_with("'s")) return token.substr(0, token.size() - 2);
  if (token.size() > 4 && token.ends_with("\xE2\x80\x99s")) return token.substr(0, token.size() - 4);
  return token;
}

}  // namespace stella::terms
