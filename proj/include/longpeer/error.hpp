#pragma once

#include <stdexcept>
#include <string>

namespace longpeer {

// Error taxonomy shared by all modules.  The CLI maps categories to exit
// codes: input errors -> 2, numerical failures -> 1, GSVD shape-assumption
// violations -> 3.
enum class ErrorKind {
  // input / data errors
  MissingCurve,
  GridMismatch,
  NonFiniteValue,
  DuplicateObservation,
  QBasisNotFound,
  InvalidConfig,
  FileNotFound,
  ParseError,
  // construction errors
  RankDeficientTimeBasis,
  ZeroBasis,
  NonPositivePhi,
  GridTooSmall,
  SingularBlockForMixedModel,
  // numerical errors
  StackedRankDeficient,
  NotPositiveDefinite,
  SingularSystem,
  AllCandidatesFailed,
  // GSVD shape assumptions
  ShapeAssumptionViolated,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  // 1 = numerical, 2 = input, 3 = shape assumption
  int exit_code() const;

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace longpeer
