#pragma once

#include <cstdint>

namespace fp {

// Worker count used when the caller passes 0. Resolves to the
// FPID_WORKERS env var if set, else the hardware thread count.
int default_workers();

// Runs f(i) for i in [0, n). With workers <= 1, or when already inside an
// OpenMP parallel region, runs serially on the calling thread. Bodies must
// write only to their own output slots; reductions happen after the loop in
// index order, so results are identical for every worker count.
void parallel_for(std::int64_t n, int workers, const void* ctx,
                  void (*fn)(const void* ctx, std::int64_t i));

template <typename F>
void parallel_for(std::int64_t n, int workers, F&& f) {
    auto thunk = [](const void* ctx, std::int64_t i) {
        (*static_cast<const F*>(ctx))(i);
    };
    parallel_for(n, workers, static_cast<const void*>(&f), thunk);
}

}  // namespace fp
