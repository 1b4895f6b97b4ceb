#ifndef JADE_PARALLEL_HPP
#define JADE_PARALLEL_HPP

#include <cstddef>
#include <vector>

#include <omp.h>

namespace jade::par {

// Process-wide switch. Kernels fall back to the serial path when disabled;
// results are identical either way because reductions always merge fixed
// stripes in index order.
void set_parallel(bool enabled);
bool parallel_enabled();

inline std::size_t stripe_count(std::size_t n, std::size_t stripes) {
  if (stripes == 0) stripes = 16;
  return n < stripes ? (n == 0 ? 0 : n) : stripes;
}

// Deterministic parallel-for: the index range is cut into `stripes`
// contiguous stripes independent of the thread count. `body(i)` must only
// write state owned by index i.
template <class Body>
void for_each(std::size_t n, Body&& body) {
  if (par::parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

// Deterministic reduction. Each stripe accumulates into its own Partial in
// sample order; partials merge serially in stripe order, so the floating
// point result does not depend on the thread count.
//
// Body:  void(std::size_t begin, std::size_t end, Partial& acc)
// Merge: void(Partial& into, const Partial& from)
template <class Partial, class Body, class Merge>
Partial striped_reduce(std::size_t n, std::size_t stripes, Partial zero, Body&& body,
                       Merge&& merge) {
  const std::size_t s = stripe_count(n, stripes);
  if (s <= 1) {
    Partial acc = zero;
    body(0, n, acc);
    return acc;
  }
  std::vector<Partial> partials(s, zero);
  const std::size_t chunk = (n + s - 1) / s;
  if (par::parallel_enabled()) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long k = 0; k < static_cast<long long>(s); ++k) {
      const std::size_t begin = static_cast<std::size_t>(k) * chunk;
      const std::size_t end = begin + chunk < n ? begin + chunk : n;
      if (begin < end) body(begin, end, partials[static_cast<std::size_t>(k)]);
    }
  } else {
    for (std::size_t k = 0; k < s; ++k) {
      const std::size_t begin = k * chunk;
      const std::size_t end = begin + chunk < n ? begin + chunk : n;
      if (begin < end) body(begin, end, partials[k]);
    }
  }
  Partial acc = std::move(partials[0]);
  for (std::size_t k = 1; k < s; ++k) merge(acc, partials[k]);
  return acc;
}

}  // namespace jade::par

#endif
