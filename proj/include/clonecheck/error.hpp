#pragma once

#include <stdexcept>
#include <string>

#include "clonecheck/syntax.hpp"

namespace clonecheck {

/// Raised by the parser. `what()` is formatted as `path:line:col: message`.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& path, SourcePos pos, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(pos.line) + ":" +
                           std::to_string(pos.column) + ": " + msg),
        pos_(pos),
        message_(msg) {}

  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  SourcePos pos_;
  std::string message_;
};

enum class ResolveErrorKind {
  UnknownClass,
  UnknownField,
  UnknownPolicy,
  UnknownMethod,
  DuplicateClass,
  DuplicateField,
  DuplicatePolicy,
  DuplicateMethod,
  InvalidPolicy,
  CallPolicyMismatch,
  CyclicExtends,
};

inline const char* to_string(ResolveErrorKind k) {
  switch (k) {
    case ResolveErrorKind::UnknownClass: return "UnknownClass";
    case ResolveErrorKind::UnknownField: return "UnknownField";
    case ResolveErrorKind::UnknownPolicy: return "UnknownPolicy";
    case ResolveErrorKind::UnknownMethod: return "UnknownMethod";
    case ResolveErrorKind::DuplicateClass: return "DuplicateClass";
    case ResolveErrorKind::DuplicateField: return "DuplicateField";
    case ResolveErrorKind::DuplicatePolicy: return "DuplicatePolicy";
    case ResolveErrorKind::DuplicateMethod: return "DuplicateMethod";
    case ResolveErrorKind::InvalidPolicy: return "InvalidPolicy";
    case ResolveErrorKind::CallPolicyMismatch: return "CallPolicyMismatch";
    case ResolveErrorKind::CyclicExtends: return "CyclicExtends";
  }
  return "?";
}

class ResolveError : public std::runtime_error {
 public:
  ResolveError(ResolveErrorKind kind, const std::string& path, SourcePos pos,
               const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(pos.line) + ":" +
                           std::to_string(pos.column) + ": " +
                           to_string(kind) + ": " + msg),
        kind_(kind) {}

  ResolveErrorKind kind() const { return kind_; }

 private:
  ResolveErrorKind kind_;
};

class MethodNotFound : public std::runtime_error {
 public:
  MethodNotFound(const std::string& cls, const std::string& method)
      : std::runtime_error("method " + method + " not found from class " +
                           cls) {}
};

}  // namespace clonecheck
