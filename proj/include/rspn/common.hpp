#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rspn {

/// Every cell is stored as a double. Categorical cells hold a dictionary code,
/// continuous cells hold the value itself. NULL is a quiet NaN, which never
/// compares equal to anything and therefore cannot collide with a domain value.
inline constexpr double kNull = std::numeric_limits<double>::quiet_NaN();

inline bool is_null(double v) noexcept { return std::isnan(v); }

enum class ColumnKind : std::uint8_t { Categorical, Continuous };

std::string_view to_string(ColumnKind kind) noexcept;
ColumnKind column_kind_from_string(std::string_view text);

/*======================================================================================================================
 * Errors
 *
 * The CLI maps these onto exit codes: InputError -> 2, UnsupportedQuery -> 3, InvariantViolation -> 4.
 *====================================================================================================================*/

struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Bad configuration, malformed data files, unknown names.
struct InputError : Error
{
    using Error::Error;
};

/// Syntactically valid SQL that is outside the supported subset, or a query the ensemble cannot answer.
struct UnsupportedQuery : Error
{
    using Error::Error;
};

/// A conditional expectation was requested under a condition of probability zero.
struct EmptyCondition : Error
{
    using Error::Error;
};

/// A structural invariant of a model was found broken.
struct InvariantViolation : Error
{
    using Error::Error;
};

/// Model file is damaged or written by an incompatible version.
struct FormatError : Error
{
    using Error::Error;
};

/// Configures the process-wide logger from the RSPN_LOG environment variable
/// (trace, debug, info, warn, error, off). Defaults to warn. Logs go to stderr.
void init_logging();

/// 64-bit FNV-1a, used for schema digests and deterministic seed derivation.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

/// Mixes two seeds into one (splitmix64 finalizer over the combination).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}
