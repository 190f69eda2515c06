#include "stella/resources.hpp"

#include "stella/error.hpp"
#include "stella/text.hpp"

namespace stella::resources {

std::string_view get(std::string_view name) {
  for (const auto& entry : all()) {
    if (entry.name == name) return entry.content;
  }
  throw Error(ErrorKind::io, "unknown resource: " + std::string(name));
}

std::vector<std::string> lines(std::string_view name) {
  std::vector<std::string> out;
  for (const auto& raw : text::split(get(name), '\n')) {
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    out.emplace_back(line);
  }
  return out;
}

PromptTemplate prompt(std::string_view name) {
  const auto content = get("prompts/" + std::string(name) + ".txt");
  const auto sep = content.find("\n---\n");
  if (sep == std::string_view::npos) {
    throw Error(ErrorKind::io, "prompt " + std::string(name) + " has no system/user separator");
  }
  return {std::string(content.substr(0, sep)), std::string(content.substr(sep + 5))};
}

}  // namespace stella::resources
