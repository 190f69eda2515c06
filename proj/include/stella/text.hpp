#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stella::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);  // ASCII folding; other bytes untouched
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Decodes one UTF-8 code point at `pos`, advancing it. Invalid bytes decode
// as U+FFFD and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& pos);

bool is_unicode_space(char32_t cp);
bool is_control(char32_t cp);
bool is_greek_letter(char32_t cp);

inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_ascii_alpha(char c) { return is_ascii_upper(c) || is_ascii_lower(c); }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

// Replaces every <name> placeholder found in `values` in a single pass;
// substituted text is never rescanned.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace stella::text
