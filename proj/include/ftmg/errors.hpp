#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ftmg {

/// Exact rational used for logical time, superman factors and the cycle advantage.
using Rational = boost::rational<std::int64_t>;

enum class ErrorCode {
  InvalidArgument,
  OutOfRange,
  LevelMismatch,
  UnrecoverableInterface,
  NoHealthyRegion,
  EmptyRegion,
  MissingFlux,
  Breakdown,
  UnsupportedSolver,
  ScheduleConflict,
  NotConverged,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline double to_double(const Rational& r) {
  return boost::rational_cast<double>(r);
}

}  // namespace ftmg
