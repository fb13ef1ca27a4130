#ifndef SOPE_PARALLEL_HPP
#define SOPE_PARALLEL_HPP

namespace sope {

/// Selects the OpenMP kernel or its serial reference. Both paths compute the
/// same values in the same per-element order, so results are bitwise equal.
enum class Exec { Serial, Parallel };

int max_threads() noexcept;

} // namespace sope

#endif
