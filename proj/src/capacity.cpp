#include "lrbp/capacity.hpp"

#include <cstdlib>
#include <string>

namespace lrbp {

std::int64_t capacity_limit() {
    const char* env = std::getenv("LRBP_CAPACITY");
    if (env == nullptr || *env == '\0') {
        return kDefaultCapacity;
    }
    try {
        std::size_t used = 0;
        const long long value = std::stoll(env, &used);
        if (used == std::string(env).size() && value > 0) {
            return value;
        }
    } catch (const std::exception&) {
    }
    return kDefaultCapacity;
}

std::int64_t checked_power(std::int64_t base, std::int64_t exponent, std::int64_t cap) {
    std::int64_t result = 1;
    for (std::int64_t k = 0; k < exponent; ++k) {
        if (base != 0 && result > cap / base) {
            return -1;
        }
        result *= base;
        if (result > cap) {
            return -1;
        }
    }
    return result;
}

}  // namespace lrbp
