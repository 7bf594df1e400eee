#include "core/errors.hpp"

namespace odf {

const char* errc_name(errc c) {
  switch (c) {
    case errc::unsupported_value: return "UnsupportedValue";
    case errc::decode_error: return "DecodeError";
    case errc::object_not_found: return "ObjectNotFound";
    case errc::object_corrupt: return "ObjectCorrupt";
    case errc::io_failure: return "IoFailure";
    case errc::empty_chain: return "EmptyChain";
    case errc::block_not_found: return "BlockNotFound";
    case errc::system_time_regression: return "SystemTimeRegression";
    case errc::illegal_event_for_kind: return "IllegalEventForKind";
    case errc::watermark_regression: return "WatermarkRegression";
    case errc::invalid_block: return "InvalidBlock";
    case errc::schema_violation: return "SchemaViolation";
    case errc::offset_gap: return "OffsetGap";
    case errc::empty_slice: return "EmptySlice";
    case errc::parse_failure: return "ParseFailure";
    case errc::missing_event_time: return "MissingEventTime";
    case errc::type_mismatch: return "TypeMismatch";
    case errc::duplicate_key_in_batch: return "DuplicateKeyWithinBatchConflict";
    case errc::duplicate_key_in_snapshot: return "DuplicateKeyInSnapshot";
    case errc::invalid_event_sequence: return "InvalidEventSequence";
    case errc::source_missing: return "SourceMissing";
    case errc::syntax_error: return "SyntaxError";
    case errc::unknown_column: return "UnknownColumn";
    case errc::ambiguous_column: return "AmbiguousColumn";
    case errc::type_error: return "TypeError";
    case errc::unknown_input_alias: return "UnknownInputAlias";
    case errc::unsupported_query: return "UnsupportedQuery";
    case errc::malformed_checkpoint: return "MalformedCheckpoint";
    case errc::schema_mismatch: return "SchemaMismatch";
    case errc::eval_error: return "EvalError";
    case errc::arithmetic_overflow: return "ArithmeticOverflow";
    case errc::unknown_dataset: return "UnknownDataset";
    case errc::cycle_detected: return "CycleDetected";
    case errc::offset_not_found: return "OffsetNotFound";
    case errc::engine_version_unavailable: return "EngineVersionUnavailable";
    case errc::manifest_invalid: return "ManifestInvalid";
    case errc::name_conflict: return "NameConflict";
    case errc::workspace_exists: return "WorkspaceExists";
    case errc::workspace_not_found: return "WorkspaceNotFound";
    case errc::illegal_operation_for_kind: return "IllegalOperationForKind";
    case errc::verification_failed: return "VerificationFailed";
    case errc::non_fast_forward: return "NonFastForward";
    case errc::repo_unavailable: return "RepoUnavailable";
    case errc::invalid_chain: return "InvalidChain";
    case errc::object_missing_in_repo: return "ObjectMissingInRepo";
  }
  return "UnknownError";
}

errclass errc_class(errc c) {
  switch (c) {
    case errc::io_failure:
    case errc::source_missing:
    case errc::repo_unavailable:
      return errclass::io;
    case errc::object_corrupt:
    case errc::invalid_chain:
    case errc::verification_failed:
      return errclass::verification;
    default:
      return errclass::user;
  }
}

}  // namespace odf
