#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stella {

// One kind per error class named by the module contracts. The CLI maps
// kinds to exit codes (see exit_code()).
enum class ErrorKind {
  precondition,
  config,
  io,
  missing_artifact,
  parse,
  // model-gateway
  transport,
  malformed_response,
  rate_limited,
  dimension_mismatch,
  // corpus-ingest
  manifest_parse,
  // chunker
  empty_document,
  // terminology
  frequency_table_missing,
  // selector
  unparseable_intent,
  too_few_points,
  pool_too_small,
  // querygen
  constraint_unsatisfiable,
  invalid_score,
  // xlingual
  term_preservation_failure,
  // benchmark-io
  duplicate_id,
  dangling_qrel,
  // eval-harness
  unknown_passage,
  missing_qrels,
  key_mismatch,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit status for an error kind. 0 is never returned.
int exit_code(ErrorKind kind);

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::precondition, message);
}

}  // namespace stella
