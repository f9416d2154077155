#include "evcoupler/parallel.hpp"

#include <omp.h>

#include <exception>

namespace evc {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

void parallel_for(Exec policy, int n, const std::function<void(int)>& body) {
  if (policy == Exec::serial) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace evc
