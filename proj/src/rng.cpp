#include "tlbench/rng.hpp"

#include <atomic>

namespace tlbench {

namespace {
std::atomic<std::uint64_t> g_seed{42};
}

std::uint64_t global_seed() { return g_seed.load(); }

void set_global_seed(std::uint64_t seed) { g_seed.store(seed); }

} // namespace tlbench
