#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace meandim {

struct Caps {
    std::size_t cells = 1'000'000;
    std::size_t patterns = 2'000'000;
    std::size_t cloud = 4'000'000;
    std::size_t exact_cover = 24;
};

class CapExceeded : public std::runtime_error {
public:
    CapExceeded(const std::string& what, std::size_t requested, std::size_t cap)
        : std::runtime_error(what + ": requested " + std::to_string(requested) +
                             " exceeds cap " + std::to_string(cap)),
          requested_(requested),
          cap_(cap) {}
    std::size_t requested() const { return requested_; }
    std::size_t cap() const { return cap_; }

private:
    std::size_t requested_;
    std::size_t cap_;
};

// saturating size arithmetic for cap checks
inline std::size_t sat_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > static_cast<std::size_t>(-1) / a) return static_cast<std::size_t>(-1);
    return a * b;
}

}  // namespace meandim
