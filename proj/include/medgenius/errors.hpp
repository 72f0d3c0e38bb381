#pragma once

#include <stdexcept>
#include <string>

namespace medgenius {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// core_stats
struct DimensionMismatch : Error { using Error::Error; };
struct InvalidParameter : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };
struct Separation : Error { using Error::Error; };
struct SingleClass : Error { using Error::Error; };

// genius (WeakIdentification lives in genius.hpp, it carries the fit)
struct SingularMomentSystem : Error { using Error::Error; };
struct TooManyFailures : Error { using Error::Error; };

// mediation_formula
struct MissingLatentColumns : Error { using Error::Error; };
struct EmptyCell : Error { using Error::Error; };

// simulation
struct EmptyInput : Error { using Error::Error; };

// cli_io
struct MissingColumn : Error { using Error::Error; };
struct AllRowsDropped : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

} // namespace medgenius
