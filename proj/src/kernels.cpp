#include "campseg/kernels.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace campseg::kernels {

int configure_threads_from_env() {
  if (const char* env = std::getenv("CAMPSEG_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Ignore malformed values and keep the OpenMP default.
    }
  }
  return omp_get_max_threads();
}

}  // namespace campseg::kernels
