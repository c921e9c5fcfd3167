#pragma once

#include <stdexcept>
#include <string>

namespace kamtori {

// Maps onto the CLI exit codes (io=1 ... divergence=4).
enum class ErrorKind { io = 1, certification = 2, degeneracy = 3, divergence = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string name, const std::string& what)
      : std::runtime_error(name), kind_(kind), name_(std::move(name)), msg_(name_ + ": " + what) {}
  ErrorKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  const char* what() const noexcept override { return msg_.c_str(); }
  // Adds context after the error name, e.g. "layer 2: ".
  void prepend(const std::string& context) { msg_ = name_ + ": " + context + msg_.substr(name_.size() + 2); }

 private:
  ErrorKind kind_;
  std::string name_;
  std::string msg_;
};

#define KAMTORI_ERROR(Name, Kind)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(Kind, #Name, what) {} \
  };

KAMTORI_ERROR(IoError, ErrorKind::io)
KAMTORI_ERROR(ConfigError, ErrorKind::io)
KAMTORI_ERROR(NonzeroMean, ErrorKind::certification)
KAMTORI_ERROR(DivisorUnderflow, ErrorKind::certification)
KAMTORI_ERROR(DegenerateWeight, ErrorKind::degeneracy)
KAMTORI_ERROR(NotDiffeomorphism, ErrorKind::divergence)
KAMTORI_ERROR(GeometryError, ErrorKind::degeneracy)
KAMTORI_ERROR(SelfIntersection, ErrorKind::degeneracy)
KAMTORI_ERROR(LeftNeighborhood, ErrorKind::divergence)
KAMTORI_ERROR(DegenerateAlpha, ErrorKind::degeneracy)
KAMTORI_ERROR(TwistTooSmall, ErrorKind::degeneracy)
KAMTORI_ERROR(DivergenceDetected, ErrorKind::divergence)
KAMTORI_ERROR(MaxIterExceeded, ErrorKind::divergence)
KAMTORI_ERROR(NoConvergence, ErrorKind::divergence)
KAMTORI_ERROR(MFloorViolated, ErrorKind::degeneracy)
KAMTORI_ERROR(ConstraintViolated, ErrorKind::degeneracy)
KAMTORI_ERROR(FocalPoint, ErrorKind::degeneracy)
KAMTORI_ERROR(OutOfValidity, ErrorKind::divergence)
KAMTORI_ERROR(ForbiddenEigenvalue, ErrorKind::degeneracy)
KAMTORI_ERROR(TypeIIDegenerate, ErrorKind::degeneracy)

#undef KAMTORI_ERROR

// Carries the offending wavevector.
class NotDiophantineUpToCutoff : public Error {
 public:
  NotDiophantineUpToCutoff(int k1, int k2, const std::string& what)
      : Error(ErrorKind::certification, "NotDiophantineUpToCutoff", what), k1(k1), k2(k2) {}
  int k1, k2;
};

inline int exit_code(const Error& e) { return static_cast<int>(e.kind()); }

}  // namespace kamtori
