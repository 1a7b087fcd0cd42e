#pragma once

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stratarank {

// --threads flag wins, then STRATARANK_THREADS, then the OpenMP default.
inline int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("STRATARANK_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace stratarank
