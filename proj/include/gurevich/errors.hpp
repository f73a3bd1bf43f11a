#pragma once

#include <stdexcept>
#include <string>

namespace gurevich {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define GUREVICH_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(what) {}      \
    }

// Shift construction and validation.
GUREVICH_DEFINE_ERROR(NonSquare);
GUREVICH_DEFINE_ERROR(EmptyRowOrColumn);
GUREVICH_DEFINE_ERROR(NotIrreducible);
GUREVICH_DEFINE_ERROR(NotAperiodic);
GUREVICH_DEFINE_ERROR(Overflow);

// Group arithmetic.
GUREVICH_DEFINE_ERROR(KindMismatch);
GUREVICH_DEFINE_ERROR(IndexOutOfRange);
GUREVICH_DEFINE_ERROR(BallTooLarge);

// Skew systems and counting.
GUREVICH_DEFINE_ERROR(MissingLabel);
GUREVICH_DEFINE_ERROR(ExtraLabel);
GUREVICH_DEFINE_ERROR(AllZeroCounts);
GUREVICH_DEFINE_ERROR(UnsupportedShape);

// Numerics.
GUREVICH_DEFINE_ERROR(BracketFailure);
GUREVICH_DEFINE_ERROR(NoConvergence);
GUREVICH_DEFINE_ERROR(NotFull);
GUREVICH_DEFINE_ERROR(TooFewPoints);

// Orbit counting.
GUREVICH_DEFINE_ERROR(DepthTooLarge);
GUREVICH_DEFINE_ERROR(NoOrbits);

// Configuration and I/O.
GUREVICH_DEFINE_ERROR(ParseError);
GUREVICH_DEFINE_ERROR(ValidationError);
GUREVICH_DEFINE_ERROR(IoError);

#undef GUREVICH_DEFINE_ERROR

}  // namespace gurevich
