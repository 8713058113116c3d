#pragma once
// Shared vocabulary for the chemputer toolchain: error type, species
// multisets, and number formatting that round-trips exactly.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chemputer {

/// Base class for every recoverable error raised by the toolchain.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition (caller bug, not a data problem).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// species-id -> amount in mol. Zero entries are never stored.
using Multiset = std::map<std::string, double>;

inline constexpr double kAmbientTemp = 25.0;
inline constexpr double kTiny = 1e-300;
inline constexpr double kLedgerTolerance = 1e-9;

void add_amount(Multiset& m, const std::string& species, double amount);
/// Removes `amount` of `species`; entries falling to (numerically) zero are erased.
void remove_amount(Multiset& m, const std::string& species, double amount);
double amount_of(const Multiset& m, const std::string& species);
double total_amount(const Multiset& m);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
/// Strict decimal parse; throws Error on trailing garbage.
double parse_double(std::string_view text);

std::string to_hex(std::uint64_t v);
/// FNV-1a, used for stable identifiers (not for integrity).
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace chemputer
