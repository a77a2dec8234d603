#include "paikit/random.hpp"

#include <cmath>
#include <numbers>

namespace paikit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::next() {
  std::uint64_t key = splitmix64(seed_ ^ splitmix64(stream_ + 0x632be59bd9b4e019ULL));
  return splitmix64(key + 0x9e3779b97f4a7c15ULL * (++counter_));
}

double CounterRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double CounterRng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

CounterRng CounterRng::split(std::uint64_t child) const {
  return CounterRng(splitmix64(seed_ ^ (stream_ * 0xd1342543de82ef95ULL)), child);
}

double boundary_bubble(const Domain& domain, const Point& x) {
  if (domain.shape() == ShapeKind::disk) {
    Point d = sub(x, domain.center());
    double r = domain.radius();
    return std::max(0.0, 1.0 - dot(d, d) / (r * r));
  }
  double b = 1.0;
  for (int k = 0; k < domain.dim(); ++k) {
    double lo = domain.lo()[k], hi = domain.hi()[k];
    double s = (x[k] - lo) * (hi - x[k]) * 4.0 / ((hi - lo) * (hi - lo));
    b *= std::max(0.0, s);
  }
  return b;
}

Field smooth_random_field(const Domain& domain, std::span<const Point> points, CounterRng& rng,
                          int modes, double max_wavenumber, bool vanish) {
  const int d = domain.dim();
  const double base = 2.0 * std::numbers::pi / domain.diameter();
  struct Mode {
    Point k;
    double phase, amp;
  };
  std::vector<Mode> ms;
  for (int j = 0; j < modes; ++j) {
    Mode m{};
    double kmag = base * max_wavenumber * rng.uniform();
    Point dir{};
    double nn = 0.0;
    for (int a = 0; a < d; ++a) {
      dir[a] = rng.normal();
      nn += dir[a] * dir[a];
    }
    nn = std::sqrt(std::max(nn, 1e-300));
    for (int a = 0; a < d; ++a) m.k[a] = kmag * dir[a] / nn;
    m.phase = 2.0 * std::numbers::pi * rng.uniform();
    m.amp = rng.normal() / (1.0 + kmag / base);
    ms.push_back(m);
  }
  Field out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double v = 0.0;
    for (const auto& m : ms) v += m.amp * std::cos(dot(m.k, points[i]) + m.phase);
    if (vanish) v *= boundary_bubble(domain, points[i]);
    out[i] = v;
  }
  return out;
}

Field smooth_random_unknowns(const Domain& domain, CounterRng& rng, int modes,
                             double max_wavenumber) {
  const auto& dm = domain.dirichlet();
  auto pos = domain.neumann().positions();
  std::vector<Point> pts(dm.size());
  for (std::size_t i = 0; i < dm.size(); ++i) pts[i] = pos[dm.closed_node(i)];
  return smooth_random_field(domain, pts, rng, modes, max_wavenumber, true);
}

StarInclusion random_star_inclusion(const Point& x0, int max_mode, double r0, double amplitude,
                                    CounterRng& rng) {
  std::vector<double> c{r0};
  for (int k = 1; k <= max_mode; ++k) {
    c.push_back(amplitude / k * rng.uniform(-1.0, 1.0));
    c.push_back(amplitude / k * rng.uniform(-1.0, 1.0));
  }
  return StarInclusion(2, x0, std::move(c));
}

}  // namespace paikit
