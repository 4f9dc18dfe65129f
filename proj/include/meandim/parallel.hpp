#pragma once

#include <cstdint>
#include <random>

namespace meandim {

// MEANDIM_THREADS, or 0 when unset
int configured_threads();
void apply_thread_limit();
int max_threads();

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

// platform-independent uniform in [0,1)
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace meandim
