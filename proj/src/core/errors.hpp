#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lcsg {

enum class Err {
  Syntax,
  UnknownVariable,
  Domain,
  SamplingExhausted,
  KindMismatch,
  ChartMismatch,
  DegreeOverflow,
  DegreeUnderflow,
  SingularForm,
  NotContact,
  NotComposable,
  RankDeficiency,
  NotInFiber,
  NotProjectable,
  BasicnessViolation,
  NotLcs,
  Definition,
  UnknownSuite,
};

const char* err_name(Err k);

class GeoError : public std::runtime_error {
 public:
  GeoError(Err kind, std::string msg)
      : std::runtime_error(std::string(err_name(kind)) + ": " + msg), kind_(kind) {}
  Err kind() const { return kind_; }

 private:
  Err kind_;
};

[[noreturn]] inline void fail(Err k, const std::string& msg) { throw GeoError(k, msg); }

}  // namespace lcsg
