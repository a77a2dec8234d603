#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/grid.hpp"
#include "paikit/mesh.hpp"

namespace paikit {

/// Counter-based generator: draw k of stream s is splitmix64(seed, s, k).
/// Streams are independent of the order in which they are consumed, so
/// ensemble member i always sees the same numbers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Child generator for a sub-stream.
  CounterRng split(std::uint64_t child) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Smooth nonnegative factor vanishing on the outer boundary and equal to 1
/// at the domain centre.
double boundary_bubble(const Domain& domain, const Point& x);

/// Random trigonometric field with `modes` terms of wavenumber at most
/// `max_wavenumber` (in units of 2 pi / diam), sampled at `points`. With
/// `vanish` the field is multiplied by the boundary bubble.
Field smooth_random_field(const Domain& domain, std::span<const Point> points, CounterRng& rng,
                          int modes = 6, double max_wavenumber = 2.0, bool vanish = true);

/// Same on the Dirichlet unknowns of the domain.
Field smooth_random_unknowns(const Domain& domain, CounterRng& rng, int modes = 6,
                             double max_wavenumber = 2.0);

/// Random 2-D star inclusion r = r0 + sum_k (a_k cos + b_k sin) with
/// |a_k|, |b_k| <= amplitude / k.
StarInclusion random_star_inclusion(const Point& x0, int max_mode, double r0, double amplitude,
                                    CounterRng& rng);

}  // namespace paikit
