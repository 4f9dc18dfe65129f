#pragma once

#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace meandim {

using BigInt = boost::multiprecision::cpp_int;

// natural log; -inf for zero
long double log_big(const BigInt& x);
BigInt pow_big(const BigInt& base, std::uint64_t exponent);
std::string to_string(const BigInt& x);

}  // namespace meandim
