#include "paircal/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace paircal {

int max_threads() {
  int hw = 1;
#ifdef _OPENMP
  hw = omp_get_max_threads();
#endif
  if (const char* env = std::getenv("PAIRCAL_THREADS")) {
    try {
      const int k = std::stoi(env);
      if (k >= 1) return k;
    } catch (...) {
      // fall through to the hardware default on unparsable values
    }
  }
  return hw > 0 ? hw : 1;
}

}  // namespace paircal
