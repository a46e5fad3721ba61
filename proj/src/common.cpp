#include "pil/common.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pil {

void apply_thread_cap_from_env() {
#ifdef _OPENMP
    const char* v = std::getenv("PIL_THREADS");
    if (!v || !*v) return;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || n < 1) return;
    int cap = static_cast<int>(n);
    if (cap > omp_get_max_threads()) cap = omp_get_max_threads();
    omp_set_num_threads(cap);
#endif
}

std::uint64_t fnv1a(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace pil
