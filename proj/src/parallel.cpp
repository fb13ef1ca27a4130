#include "sope/parallel.hpp"

#include <omp.h>

namespace sope {

int max_threads() noexcept { return omp_get_max_threads(); }

} // namespace sope
