#pragma once

#include <stdexcept>
#include <string>

namespace sclab {

// Base of every error the library throws. `kind()` is a stable name used by
// the CLI for reporting and exit-code mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SCLAB_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {}  \
  }

SCLAB_DEFINE_ERROR(InvalidResolution);
SCLAB_DEFINE_ERROR(EmptyRegion);
SCLAB_DEFINE_ERROR(DegenerateTriangle);
SCLAB_DEFINE_ERROR(ConvergenceFailure);
SCLAB_DEFINE_ERROR(TooManyModes);
SCLAB_DEFINE_ERROR(AliasedGrid);
SCLAB_DEFINE_ERROR(SpilloverGuard);
SCLAB_DEFINE_ERROR(UnresolvedScale);
SCLAB_DEFINE_ERROR(ShapeMismatch);
SCLAB_DEFINE_ERROR(ConfigError);
SCLAB_DEFINE_ERROR(IoError);

#undef SCLAB_DEFINE_ERROR

}  // namespace sclab
