#pragma once

#include <cstdint>
#include <random>

namespace pnl {

// Every Monte Carlo kernel has a serial reference path and an OpenMP path.
// Both produce bit-identical results: randomness is keyed by
// (seed, stream, item index), never by thread.
enum class Execution { serial, parallel };

using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Engine for one independent work item (shot, grid cell, ...).
Engine make_engine(std::uint64_t seed, std::uint64_t stream,
                   std::uint64_t index);

// Stream identifiers; kept distinct so kernels never share random numbers.
namespace streams {
inline constexpr std::uint64_t readout = 1;
inline constexpr std::uint64_t apd = 2;
inline constexpr std::uint64_t tomography = 3;
inline constexpr std::uint64_t relaxometry = 4;
inline constexpr std::uint64_t telegraph = 5;
}  // namespace streams

void set_thread_count(int n);
int thread_count();

}  // namespace pnl
