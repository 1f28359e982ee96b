#pragma once

#include <stdexcept>
#include <string>

namespace qsdsim {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define QSDSIM_DEFINE_ERROR(name)                                   \
  class name : public error {                                       \
   public:                                                          \
    explicit name(const std::string& what) : error(#name ": " + what) {} \
  };

// configuration
QSDSIM_DEFINE_ERROR(TraitAbsent)
QSDSIM_DEFINE_ERROR(ParseError)
// rates
QSDSIM_DEFINE_ERROR(NoMutationMass)
// coupling
QSDSIM_DEFINE_ERROR(InvariantBreach)
QSDSIM_DEFINE_ERROR(InvalidRegime)
// qsd
QSDSIM_DEFINE_ERROR(AllExtinct)
QSDSIM_DEFINE_ERROR(Degenerate)
QSDSIM_DEFINE_ERROR(WindowTooSmall)
QSDSIM_DEFINE_ERROR(NoSingletonMass)
QSDSIM_DEFINE_ERROR(NotNormalized)
// oracle
QSDSIM_DEFINE_ERROR(UnsupportedModel)
QSDSIM_DEFINE_ERROR(NoConvergence)
QSDSIM_DEFINE_ERROR(SingularSystem)
// cli
QSDSIM_DEFINE_ERROR(ConfigError)

#undef QSDSIM_DEFINE_ERROR

}  // namespace qsdsim
