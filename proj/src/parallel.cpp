#include "fp/parallel.hpp"

#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fp {

int default_workers() {
    if (const char* env = std::getenv("FPID_WORKERS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t n, int workers, const void* ctx,
                  void (*fn)(const void* ctx, std::int64_t i)) {
    if (workers == 0) workers = default_workers();
#ifdef _OPENMP
    if (workers > 1 && n > 1 && !omp_in_parallel()) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (std::int64_t i = 0; i < n; ++i) fn(ctx, i);
        return;
    }
#endif
    for (std::int64_t i = 0; i < n; ++i) fn(ctx, i);
}

}  // namespace fp
