#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridrag {

// Root of every error the library throws. Subclasses are distinguishable so
// callers can route failures (fallback, skip, abort) without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MalformedHeaderPath : public Error {
 public:
  using Error::Error;
};

class ImageError : public Error {
 public:
  using Error::Error;
};

class LayoutUnavailable : public Error {
 public:
  using Error::Error;
};

// Failure of a chat or embedding call against a model endpoint.
class GatewayError : public Error {
 public:
  enum class Kind { Timeout, BadStatus, MalformedResponse, Transport };

  GatewayError(Kind kind, std::string request_id, int status,
               const std::string& what)
      : Error(what),
        kind_(kind),
        request_id_(std::move(request_id)),
        status_(status) {}

  Kind kind() const { return kind_; }
  const std::string& request_id() const { return request_id_; }
  int status() const { return status_; }

  // Timeouts, connection failures and 5xx responses may succeed on retry.
  bool retriable() const {
    return kind_ == Kind::Timeout || kind_ == Kind::Transport ||
           (kind_ == Kind::BadStatus && status_ >= 500);
  }

 private:
  Kind kind_;
  std::string request_id_;
  int status_;
};

// Errors from repairing and validating VLM table output.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

class NoArrayFound : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};

class ParseFailure : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};

class EmptyExtraction : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};

// Wraps a failure of one component with the component it belongs to.
class RegionError : public Error {
 public:
  RegionError(std::string component_id, const std::string& what)
      : Error(component_id + ": " + what),
        component_id_(std::move(component_id)) {}

  const std::string& component_id() const { return component_id_; }

 private:
  std::string component_id_;
};

class PageExtractionFailed : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

class StoreMismatch : public StoreError {
 public:
  using StoreError::StoreError;
};

class LoadError : public StoreError {
 public:
  LoadError(std::size_t line, const std::string& what)
      : StoreError("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  // 1-based line number in the store file; 0 when the file could not be
  // opened at all.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class JudgeUnsupported : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridrag
