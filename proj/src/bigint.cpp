#include "meandim/bigint.hpp"

#include <cmath>
#include <limits>

namespace meandim {

long double log_big(const BigInt& x) {
    if (x <= 0) return -std::numeric_limits<long double>::infinity();
    const std::size_t bits = boost::multiprecision::msb(x);
    if (bits < 63) return std::log(static_cast<long double>(x.convert_to<std::uint64_t>()));
    const std::size_t shift = bits - 62;
    const std::uint64_t top = static_cast<BigInt>(x >> shift).convert_to<std::uint64_t>();
    return std::log(static_cast<long double>(top)) +
           static_cast<long double>(shift) * std::log(2.0L);
}

BigInt pow_big(const BigInt& base, std::uint64_t exponent) {
    BigInt result = 1;
    BigInt b = base;
    while (exponent != 0) {
        if (exponent & 1U) result *= b;
        exponent >>= 1U;
        if (exponent != 0) b *= b;
    }
    return result;
}

std::string to_string(const BigInt& x) { return x.str(); }

}  // namespace meandim
