#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace odf {

// Failure buckets. Values double as CLI exit codes and C API status codes.
enum class errclass : int { user = 1, verification = 2, io = 3 };

enum class errc {
  // values / store
  unsupported_value,
  decode_error,
  object_not_found,
  object_corrupt,
  io_failure,
  // chain
  empty_chain,
  block_not_found,
  system_time_regression,
  illegal_event_for_kind,
  watermark_regression,
  invalid_block,
  // slices
  schema_violation,
  offset_gap,
  empty_slice,
  // ingest
  parse_failure,
  missing_event_time,
  type_mismatch,
  duplicate_key_in_batch,
  duplicate_key_in_snapshot,
  invalid_event_sequence,
  source_missing,
  // query dsl
  syntax_error,
  unknown_column,
  ambiguous_column,
  type_error,
  unknown_input_alias,
  unsupported_query,
  // engine
  malformed_checkpoint,
  schema_mismatch,
  eval_error,
  arithmetic_overflow,
  // coordinator / workspace
  unknown_dataset,
  cycle_detected,
  offset_not_found,
  engine_version_unavailable,
  manifest_invalid,
  name_conflict,
  workspace_exists,
  workspace_not_found,
  illegal_operation_for_kind,
  verification_failed,
  // sync
  non_fast_forward,
  repo_unavailable,
  invalid_chain,
  object_missing_in_repo,
};

const char* errc_name(errc c);
errclass errc_class(errc c);

class error : public std::runtime_error {
 public:
  error(errc code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  errc code() const { return code_; }
  errclass cls() const { return errc_class(code_); }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& msg) {
  throw error(code, std::string(errc_name(code)) + ": " + msg);
}

// Parse errors carry a position and the token set that would have been legal.
class parse_error : public error {
 public:
  parse_error(errc code, std::string msg, int line, int column,
              std::vector<std::string> expected = {})
      : error(code, std::move(msg)), line_(line), column_(column),
        expected_(std::move(expected)) {}
  int line() const { return line_; }
  int column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  int line_;
  int column_;
  std::vector<std::string> expected_;
};

}  // namespace odf
