#include "chemputer/common.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace chemputer {

namespace {
// Amounts below this fraction of the original are treated as exhausted so
// that repeated partial moves cannot leave 1e-17 mol ghosts behind.
constexpr double kZeroFloor = 1e-15;
}  // namespace

void add_amount(Multiset& m, const std::string& species, double amount) {
    if (amount <= 0.0) return;
    m[species] += amount;
}

void remove_amount(Multiset& m, const std::string& species, double amount) {
    auto it = m.find(species);
    if (it == m.end()) return;
    double before = it->second;
    it->second -= amount;
    if (it->second <= kZeroFloor * before || it->second <= 0.0) m.erase(it);
}

double amount_of(const Multiset& m, const std::string& species) {
    auto it = m.find(species);
    return it == m.end() ? 0.0 : it->second;
}

double total_amount(const Multiset& m) {
    double t = 0.0;
    for (const auto& [_, a] : m) t += a;
    return t;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw Error("invalid number '" + std::string(text) + "'");
    }
    return v;
}

std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace chemputer
