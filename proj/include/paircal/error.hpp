#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace paircal {

enum class ErrorCode {
  MissingArm,
  TooFewPatients,
  SchemaMismatch,
  RankDeficient,
  NoConvergence,
  TooFewPairs,
  DegenerateVariances,
  ZeroPooledSD,
  ZeroVariance,
  TooManyPairs,
  ParseError,
  NegativeVariance,
  UnknownFormat,
  InvalidConfig,
  DomainError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingArm: return "MissingArm";
    case ErrorCode::TooFewPatients: return "TooFewPatients";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::DegenerateVariances: return "DegenerateVariances";
    case ErrorCode::ZeroPooledSD: return "ZeroPooledSD";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooManyPairs: return "TooManyPairs";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DomainError: return "DomainError";
  }
  return "Unknown";
}

/// True when the code describes bad input rather than a numerical failure.
inline bool is_input_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::RankDeficient:
    case ErrorCode::NoConvergence:
    case ErrorCode::DegenerateVariances:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ValidationIssue {
  ErrorCode code;
  std::string context;  // e.g. "pair 3 control arm"
  std::string message;
};

/// Aggregates per-pair/arm validation issues so all problems surface at once.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(issues.empty() ? ErrorCode::SchemaMismatch : issues.front().code,
              join(issues)),
        issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const { return issues_; }

  bool has(ErrorCode c) const {
    for (const auto& i : issues_)
      if (i.code == c) return true;
    return false;
  }

 private:
  static std::string join(const std::vector<ValidationIssue>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out += "; ";
      out += "[" + v[i].context + "] " + v[i].message;
    }
    return out;
  }
  std::vector<ValidationIssue> issues_;
};

}  // namespace paircal
