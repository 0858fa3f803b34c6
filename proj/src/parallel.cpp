#include "pnl/parallel.hpp"

#include <omp.h>

namespace pnl {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Engine make_engine(std::uint64_t seed, std::uint64_t stream,
                   std::uint64_t index) {
    const std::uint64_t h =
        splitmix64(splitmix64(splitmix64(seed) ^ stream) + index);
    std::seed_seq seq{static_cast<std::uint32_t>(h),
                      static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(stream)};
    return Engine(seq);
}

void set_thread_count(int n) {
    if (n > 0)
        omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace pnl
