#include "longpeer/error.hpp"

namespace longpeer {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingCurve: return "MissingCurve";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DuplicateObservation: return "DuplicateObservation";
    case ErrorKind::QBasisNotFound: return "QBasisNotFound";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::RankDeficientTimeBasis: return "RankDeficientTimeBasis";
    case ErrorKind::ZeroBasis: return "ZeroBasis";
    case ErrorKind::NonPositivePhi: return "NonPositivePhi";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::SingularBlockForMixedModel: return "SingularBlockForMixedModel";
    case ErrorKind::StackedRankDeficient: return "StackedRankDeficient";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorKind::ShapeAssumptionViolated: return "ShapeAssumptionViolated";
  }
  return "UnknownError";
}

int Error::exit_code() const {
  switch (kind_) {
    case ErrorKind::MissingCurve:
    case ErrorKind::GridMismatch:
    case ErrorKind::NonFiniteValue:
    case ErrorKind::DuplicateObservation:
    case ErrorKind::QBasisNotFound:
    case ErrorKind::InvalidConfig:
    case ErrorKind::FileNotFound:
    case ErrorKind::ParseError:
    case ErrorKind::RankDeficientTimeBasis:
    case ErrorKind::ZeroBasis:
    case ErrorKind::NonPositivePhi:
    case ErrorKind::GridTooSmall:
      return 2;
    case ErrorKind::ShapeAssumptionViolated:
      return 3;
    default:
      return 1;
  }
}

}  // namespace longpeer
