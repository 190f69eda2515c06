#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stella::io {

namespace fs = std::filesystem;
using nlohmann::json;

// Throws Error(missing_artifact) when the file does not exist.
std::string read_file(const fs::path& path);

// Writes to a sibling temp file then renames over the target.
void write_atomic(const fs::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const fs::path& path);

// Calls fn(line_number, value) for each non-blank line (1-based numbering).
// Malformed JSON raises Error(parse) naming the file and line.
void for_each_jsonl(const fs::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

// Same, over an in-memory buffer; `origin` names the source in messages.
void for_each_jsonl_text(std::string_view text, std::string_view origin,
                         const std::function<void(std::size_t, const json&)>& fn);

std::string to_jsonl(const std::vector<json>& rows);

// Canonical compact JSON used for everything fingerprinted.
std::string dump(const json& value);

}  // namespace stella::io
