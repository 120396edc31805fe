#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alol {

enum class ErrorKind {
  PartitionInfeasible,
  PoolExhausted,
  StaleCandidate,
  SpecMismatch,
  EmptyFineTune,
  EmptyEval,
  Alignment,
  Distribution,
  MissingScores,
  UndefinedPoint,
  Generation,
  Schema,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::PartitionInfeasible: return "partition-infeasible";
    case ErrorKind::PoolExhausted: return "pool-exhausted";
    case ErrorKind::StaleCandidate: return "stale-candidate";
    case ErrorKind::SpecMismatch: return "spec-mismatch";
    case ErrorKind::EmptyFineTune: return "empty-finetune";
    case ErrorKind::EmptyEval: return "empty-eval";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Distribution: return "distribution";
    case ErrorKind::MissingScores: return "missing-scores";
    case ErrorKind::UndefinedPoint: return "undefined-point";
    case ErrorKind::Generation: return "generation";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace alol
