#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

// Text files under resources/ (prompt templates, frozen heuristic tables,
// few-shot examples) compiled into the binary.
namespace stella::resources {

struct Entry {
  std::string_view name;  // path relative to resources/, e.g. "prompts/intent.txt"
  std::string_view content;
};

std::span<const Entry> all();

// Throws Error(io) for unknown names.
std::string_view get(std::string_view name);

// Non-empty, non-comment ('#'-prefixed) trimmed lines of a resource.
std::vector<std::string> lines(std::string_view name);

// A prompt file holds the system part, a line "---", then the user part.
struct PromptTemplate {
  std::string system;
  std::string user;
};

// Loads "prompts/<name>.txt". Throws Error(io) if the separator is missing.
PromptTemplate prompt(std::string_view name);

}  // namespace stella::resources
