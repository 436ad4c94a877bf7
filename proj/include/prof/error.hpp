#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prof {

// Exit codes used by the CLI map one-to-one onto these classes.
enum class ErrorClass { config = 2, data = 3, backend = 4, internal = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorClass::data, what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(ErrorClass::backend, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorClass::internal, what) {}
};

// --- data ---------------------------------------------------------------

class PreconditionError : public DataError {
 public:
  using DataError::DataError;
};

class MissingFile : public DataError {
 public:
  explicit MissingFile(const std::string& path) : DataError("missing file: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class MalformedLine : public DataError {
 public:
  MalformedLine(std::size_t line_no, const std::string& reason)
      : DataError("malformed line " + std::to_string(line_no) + ": " + reason), line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class InvariantViolation : public DataError {
 public:
  InvariantViolation(const std::string& essay_id, const std::string& reason)
      : DataError("invariant violation in '" + essay_id + "': " + reason), essay_id_(essay_id), reason_(reason) {}
  const std::string& essay_id() const noexcept { return essay_id_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string essay_id_;
  std::string reason_;
};

class CountOutOfRange : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class SerializationError : public DataError {
 public:
  using DataError::DataError;
};

class UnknownTemplate : public DataError {
 public:
  using DataError::DataError;
};

class EmptyPairs : public DataError {
 public:
  EmptyPairs() : DataError("no preference pairs to train on") {}
};

class NonFiniteInput : public DataError {
 public:
  using DataError::DataError;
};

class EmptyScores : public DataError {
 public:
  EmptyScores() : DataError("score list is empty") {}
};

class OutOfRange : public DataError {
 public:
  using DataError::DataError;
};

class LengthMismatch : public DataError {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class ZeroVariance : public DataError {
 public:
  ZeroVariance() : DataError("zero variance") {}
};

// Reported instead of +/-infinity when either faithfulness count is zero.
class DegenerateCounts : public DataError {
 public:
  DegenerateCounts(double f, double u)
      : DataError("gamma undefined for F=" + std::to_string(f) + ", U=" + std::to_string(u)) {}
};

// --- backend ------------------------------------------------------------

class NoRouteMatched : public BackendError {
 public:
  explicit NoRouteMatched(const std::string& detail) : BackendError("no scripted route matched: " + detail) {}
};

class HttpError : public BackendError {
 public:
  HttpError(int status, const std::string& body)
      : BackendError("http status " + std::to_string(status) + ": " + body.substr(0, 200)), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class RateLimited : public BackendError {
 public:
  explicit RateLimited(int attempts)
      : BackendError("rate limited after " + std::to_string(attempts) + " attempts") {}
};

class Timeout : public BackendError {
 public:
  explicit Timeout(const std::string& what) : BackendError("timeout: " + what) {}
};

class MalformedResponse : public BackendError {
 public:
  explicit MalformedResponse(const std::string& what) : BackendError("malformed response: " + what) {}
};

class EmptyRevision : public BackendError {
 public:
  EmptyRevision() : BackendError("simulator returned an empty revision") {}
};

class JudgeParseError : public BackendError {
 public:
  JudgeParseError(const std::string& what, std::string raw_text)
      : BackendError("judge output could not be parsed: " + what), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const noexcept { return raw_text_; }

 private:
  std::string raw_text_;
};

}  // namespace prof
