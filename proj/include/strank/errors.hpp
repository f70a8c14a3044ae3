#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace strank {

// Base type for all recoverable errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class MalformedRecord : public Error {
public:
  MalformedRecord(const std::string& path, std::size_t line_no,
                  const std::string& detail)
      : Error(path + ":" + std::to_string(line_no) +
              ": malformed record: " + detail),
        line_no_(line_no) {}
  std::size_t line_no() const { return line_no_; }

private:
  std::size_t line_no_;
};

class DuplicateDocId : public Error {
public:
  explicit DuplicateDocId(const std::string& doc_id)
      : Error("duplicate doc id: " + doc_id) {}
};

class NegativeGrade : public Error {
public:
  using Error::Error;
};

class IoFailure : public Error {
public:
  using Error::Error;
};

class EmptyCorpus : public Error {
public:
  using Error::Error;
};

class InvariantViolation : public Error {
public:
  using Error::Error;
};

class EmptyIntersection : public Error {
public:
  using Error::Error;
};

class BackendUnavailable : public Error {
public:
  using Error::Error;
};

class MissingPlaceholder : public Error {
public:
  using Error::Error;
};

class InsufficientJudgments : public Error {
public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace strank
