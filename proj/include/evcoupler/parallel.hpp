#pragma once
#include <functional>

namespace evc {

// Execution policy for the data-parallel kernels (sweep points, EME slices,
// rasterization supersampling). `par` uses OpenMP; `serial` is the reference
// path the equivalence tests and the benchmark compare against.
enum class Exec { serial, par };

int max_threads();
void set_threads(int n);  // n <= 0 restores the OpenMP default

// Calls body(0..n-1). Iterations must be independent; any exception thrown by
// the body is rethrown on the calling thread after the loop drains.
void parallel_for(Exec policy, int n, const std::function<void(int)>& body);

}  // namespace evc
