#pragma once

#include <stdexcept>
#include <string>

namespace phononet {

enum class ErrorKind {
  InvalidArgument,
  Material,
  Geometry,
  Mesh,
  Pairing,
  Assembly,
  Solver,
  NoCrossing,
  Coupling,
  Layout,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the core carries one of the kinds above so the C
// boundary can translate it into a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace phononet
