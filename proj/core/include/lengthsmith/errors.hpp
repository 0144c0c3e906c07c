#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lengthsmith {

enum class ErrorCode {
  SchemaViolation,
  NoSplitPoint,
  Timeout,
  HttpStatus,
  MalformedResponse,
  RetriesExhausted,
  Transport,
  PoolTooSmall,
  MissingInstruction,
  ConstraintNotEmbedded,
  EmptyRun,
  EmptyInput,
  JudgeParseFailure,
  StageFailure,
  TrainerHookFailure,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Carries the JSON path of the offending field, e.g. "$.constraint.kind".
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string path, const std::string& message)
      : Error(ErrorCode::SchemaViolation, path + ": " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class NoSplitPoint : public Error {
 public:
  explicit NoSplitPoint(const std::string& message)
      : Error(ErrorCode::NoSplitPoint, message) {}
};

class BackendError : public Error {
 public:
  using Error::Error;

  // Transient failures are retried by the HTTP client.
  bool transient() const noexcept {
    return code() == ErrorCode::Timeout || code() == ErrorCode::Transport ||
           (code() == ErrorCode::HttpStatus &&
            (status_ == 429 || status_ >= 500));
  }
  int status() const noexcept { return status_; }

  static BackendError http_status(int status, const std::string& body) {
    BackendError e(ErrorCode::HttpStatus,
                   "HTTP " + std::to_string(status) + ": " + body);
    e.status_ = status;
    return e;
  }

 private:
  int status_ = 0;
};

class PoolTooSmall : public Error {
 public:
  explicit PoolTooSmall(const std::string& message)
      : Error(ErrorCode::PoolTooSmall, message) {}
};

class MissingInstruction : public Error {
 public:
  explicit MissingInstruction(const std::string& instruction_id)
      : Error(ErrorCode::MissingInstruction,
              "no instruction with id '" + instruction_id + "'") {}
};

class ConstraintNotEmbedded : public Error {
 public:
  explicit ConstraintNotEmbedded(const std::string& message)
      : Error(ErrorCode::ConstraintNotEmbedded, message) {}
};

class JudgeParseFailure : public Error {
 public:
  explicit JudgeParseFailure(const std::string& message)
      : Error(ErrorCode::JudgeParseFailure, message) {}
};

class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& message)
      : Error(ErrorCode::StageFailure, "stage '" + stage + "' failed: " + message),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class TrainerHookFailure : public Error {
 public:
  TrainerHookFailure(const std::string& message, std::string captured_stderr)
      : Error(ErrorCode::TrainerHookFailure, message),
        stderr_(std::move(captured_stderr)) {}

  const std::string& captured_stderr() const noexcept { return stderr_; }

 private:
  std::string stderr_;
};

}  // namespace lengthsmith
