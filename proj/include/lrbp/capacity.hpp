#pragma once

#include <cstdint>

namespace lrbp {

inline constexpr std::int64_t kDefaultCapacity = 10'000'000;

// Element cap for dense expansion and brute-force enumeration. Reads the
// LRBP_CAPACITY environment variable on every call, falling back to 10^7.
std::int64_t capacity_limit();

// Returns base^exponent, or -1 once the product exceeds `cap`.
std::int64_t checked_power(std::int64_t base, std::int64_t exponent, std::int64_t cap);

}  // namespace lrbp
