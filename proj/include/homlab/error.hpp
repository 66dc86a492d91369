/**
 * @file error.hpp
 * @brief Exception types thrown by homlab.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace homlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define HOMLAB_DEFINE_ERROR(Name)                    \
    class Name : public Error {                      \
    public:                                          \
        explicit Name(const std::string& what)       \
            : Error(std::string(#Name ": ") + what)  \
        {}                                           \
    }

HOMLAB_DEFINE_ERROR(ShapeError);
HOMLAB_DEFINE_ERROR(MissingTranspose);
HOMLAB_DEFINE_ERROR(NotInM);
HOMLAB_DEFINE_ERROR(CoercivityError);
HOMLAB_DEFINE_ERROR(CompatibilityError);
HOMLAB_DEFINE_ERROR(SolverDiverged);
HOMLAB_DEFINE_ERROR(NonMeanFree);
HOMLAB_DEFINE_ERROR(VanishingHarmonicMean);
HOMLAB_DEFINE_ERROR(NotSkew);
HOMLAB_DEFINE_ERROR(SingularResolvent);
HOMLAB_DEFINE_ERROR(MeshRuleViolation);
HOMLAB_DEFINE_ERROR(BudgetExceeded);
HOMLAB_DEFINE_ERROR(InvalidArgument);
HOMLAB_DEFINE_ERROR(FormatError);
HOMLAB_DEFINE_ERROR(ConfigError);

#undef HOMLAB_DEFINE_ERROR

#define HOMLAB_THROW_IF(cond, Kind, msg) \
    do {                                 \
        if (cond) throw Kind(msg);       \
    } while (false)

} // namespace homlab
