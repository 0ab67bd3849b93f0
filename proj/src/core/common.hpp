#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tdmsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorKind {
  domain,      // argument outside an operation's mathematical domain
  validation,  // malformed input, missing configuration, violated precondition
  fit,         // a fit or measurement could not be formed from the data
  no_trap,     // minimum search left the domain or did not converge
  saddle,      // Hessian at a stationary point is not positive definite
  escape,      // ion left the bounding box during integration
  io,
  parse,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class EscapeError : public Error {
 public:
  EscapeError(const std::string& message, double escape_time)
      : Error(ErrorKind::escape, message), escape_time_(escape_time) {}

  double escape_time() const noexcept { return escape_time_; }

 private:
  double escape_time_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double electron_mass = 9.1093837015e-31;      // kg
// Neutral-atom mass of 40Ca.
inline constexpr double calcium40_amu = 39.962590863;
inline constexpr double calcium40_ion_mass =
    calcium40_amu * atomic_mass_unit - electron_mass;
}  // namespace constants

}  // namespace tdmsim
