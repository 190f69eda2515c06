#include "stella/error.hpp"

namespace stella {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::precondition: return "Precondition";
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::io: return "IoError";
    case ErrorKind::missing_artifact: return "MissingArtifact";
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::transport: return "TransportError";
    case ErrorKind::malformed_response: return "MalformedResponse";
    case ErrorKind::rate_limited: return "RateLimited";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::manifest_parse: return "ManifestParseError";
    case ErrorKind::empty_document: return "EmptyDocument";
    case ErrorKind::frequency_table_missing: return "FrequencyTableMissing";
    case ErrorKind::unparseable_intent: return "UnparseableIntent";
    case ErrorKind::too_few_points: return "TooFewPoints";
    case ErrorKind::pool_too_small: return "PoolTooSmall";
    case ErrorKind::constraint_unsatisfiable: return "ConstraintUnsatisfiable";
    case ErrorKind::invalid_score: return "InvalidScore";
    case ErrorKind::term_preservation_failure: return "TermPreservationFailure";
    case ErrorKind::duplicate_id: return "DuplicateId";
    case ErrorKind::dangling_qrel: return "DanglingQrel";
    case ErrorKind::unknown_passage: return "UnknownPassage";
    case ErrorKind::missing_qrels: return "MissingQrels";
    case ErrorKind::key_mismatch: return "KeyMismatch";
  }
  return "Error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::precondition:
    case ErrorKind::config:
      return 3;
    case ErrorKind::io:
    case ErrorKind::missing_artifact:
      return 4;
    case ErrorKind::parse:
    case ErrorKind::manifest_parse:
      return 5;
    case ErrorKind::transport:
    case ErrorKind::malformed_response:
    case ErrorKind::rate_limited:
    case ErrorKind::dimension_mismatch:
      return 6;
    case ErrorKind::duplicate_id:
    case ErrorKind::dangling_qrel:
    case ErrorKind::unknown_passage:
    case ErrorKind::missing_qrels:
    case ErrorKind::key_mismatch:
      return 7;
    case ErrorKind::empty_document:
    case ErrorKind::frequency_table_missing:
    case ErrorKind::unparseable_intent:
    case ErrorKind::too_few_points:
    case ErrorKind::pool_too_small:
    case ErrorKind::constraint_unsatisfiable:
    case ErrorKind::invalid_score:
    case ErrorKind::term_preservation_failure:
      return 8;
  }
  return 1;
}

}  // namespace stella
