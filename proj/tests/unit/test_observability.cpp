#include <cmath>

#include "doctest.h"
#include "paikit/error.hpp"
#include "paikit/observability.hpp"
#include "paikit/random.hpp"
#include "support.hpp"

using namespace paikit;

namespace {

const Point kCentre{0.5, 0.5, 0.0};

std::function<void(long, std::span<double>)> source(const Field& shape, double dt, double scale = 1.0) {
  return [&shape, dt, scale](long k, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * std::sin(5.0 * k * dt) * shape[i];
  };
}

}  // namespace

TEST_SUITE("observability") {

TEST_CASE("zero data give a zero ratio") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  const std::size_t n = d.dirichlet().size();
  ObservabilityReport r = observability_ratio(s, d, Field(n, 0.0), Field(n, 0.0), {}, 4.0, kCentre);
  CHECK(r.lhs == 0.0);
  CHECK(r.flux == 0.0);
  CHECK(r.ratio == 0.0);
  CHECK(r.certified);
}

TEST_CASE("constant and ratio bookkeeping") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(1);
  Field u0 = smooth_random_unknowns(d, rng), u1 = smooth_random_unknowns(d, rng);
  const double T = 4.0 * d.diameter();
  ObservabilityReport r = observability_ratio(s, d, u0, u1, {}, T, kCentre);
  CHECK(r.C_x0 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.constant == doctest::Approx(2.0 * 0.5 / (T * 0.81 - 2.0 * 0.5)).epsilon(1e-14));
  CHECK(r.lhs > 0.0);
  CHECK(r.flux > 0.0);
  CHECK(r.source == 0.0);
  CHECK(r.ratio == doctest::Approx(r.lhs / (r.constant * r.flux)).epsilon(1e-14));
  CHECK(std::isfinite(r.proof_ratio));
  CHECK(r.certified);
  CHECK(r.warning.empty());

  ObservabilityReport r2 = observability_ratio(s, d, u0, u1, {}, 2.0 * T, kCentre);
  CHECK(r2.constant < 0.5 * r.constant);
}

TEST_CASE("ratio is invariant under data scaling") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(2);
  Field u0 = smooth_random_unknowns(d, rng), u1 = smooth_random_unknowns(d, rng);
  Field shape = smooth_random_unknowns(d, rng);
  const double T = 4.0 * d.diameter();
  const double dt = time_grid(d, s, T, 0.5).dt;
  ObservabilityReport a = observability_ratio(s, d, u0, u1, source(shape, dt), T, kCentre);
  Field v0 = u0, v1 = u1;
  for (double& v : v0) v *= 7.5;
  for (double& v : v1) v *= 7.5;
  ObservabilityReport b = observability_ratio(s, d, v0, v1, source(shape, dt, 7.5), T, kCentre);
  CHECK(a.source > 0.0);
  CHECK(b.ratio == doctest::Approx(a.ratio).epsilon(1e-12));
  CHECK(b.lhs == doctest::Approx(56.25 * a.lhs).epsilon(1e-12));
}

TEST_CASE("source-only run has zero left side") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(3);
  Field shape = smooth_random_unknowns(d, rng);
  const std::size_t n = shape.size();
  const double T = 4.0 * d.diameter();
  ObservabilityReport r =
      observability_ratio(s, d, Field(n, 0.0), Field(n, 0.0), source(shape, time_grid(d, s, T, 0.5).dt), T, kCentre);
  CHECK(r.lhs == 0.0);
  CHECK(r.source > 0.0);
  CHECK(r.ratio == 0.0);
}

TEST_CASE("short horizons and weak contrasts are not certified") {
  Domain d = test::unit_disk(32);
  CounterRng rng(4);
  Field u0 = smooth_random_unknowns(d, rng), u1 = smooth_random_unknowns(d, rng);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  ObservabilityReport shortT = observability_ratio(s, d, u0, u1, {}, 1.0, kCentre);
  CHECK_FALSE(shortT.certified);
  CHECK_FALSE(shortT.warning.empty());
  CHECK(shortT.lhs > 0.0);

  SpeedField weak = build_speed_field(test::centred_disk(0.2), 0.7, d);
  ObservabilityReport w = observability_ratio(weak, d, u0, u1, {}, 4.0 * d.diameter(), kCentre);
  CHECK_FALSE(w.certified);

  CHECK_THROWS_AS(observability_ratio(s, d, u0, u1, {}, 4.0, {2.0, 2.0, 0.0}), GeometryError);
  CHECK_THROWS_AS(observability_ratio(s, d, Field(3, 0.0), u1, {}, 4.0, kCentre), PreconditionError);
}

TEST_CASE("ensemble layout, determinism and the constant-speed limit") {
  Domain d = test::unit_disk(24);
  EnsembleSpec spec;
  spec.contrasts = {0.999, 1.0};
  spec.inclusion_coeffs = {0.15};
  spec.samples = 3;
  spec.seed = 17;
  EnsembleStats a = observability_ensemble(d, kCentre, spec);
  EnsembleStats b = observability_ensemble(d, kCentre, spec);
  REQUIRE(a.rows.size() == 6);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].report.ratio == b.rows[k].report.ratio);
    CHECK(a.rows[k].member == k);
    CHECK(std::isfinite(a.rows[k].report.ratio));
    CHECK(a.rows[k].report.ratio > 0.0);
  }
  for (int k = 0; k < 3; ++k)
    CHECK(a.rows[k].report.ratio == doctest::Approx(a.rows[3 + k].report.ratio).epsilon(0.01));
  CHECK(a.max_ratio >= a.mean_ratio);

  spec.zero_data = true;
  spec.with_source = true;
  spec.contrasts = {0.9};
  EnsembleStats z = observability_ensemble(d, kCentre, spec);
  for (const auto& row : z.rows) {
    CHECK(row.report.lhs == 0.0);
    CHECK(row.report.source > 0.0);
  }
}

TEST_CASE("eccentricity scan produces elongated inclusions") {
  Domain d = test::unit_disk(24);
  EnsembleSpec spec;
  spec.contrasts = {0.9};
  spec.inclusion_coeffs = {0.15};
  spec.eccentricities = {0.0, 0.2};
  spec.samples = 1;
  EnsembleStats st = observability_ensemble(d, kCentre, spec);
  REQUIRE(st.rows.size() == 2);
  CHECK(st.rows[0].eccentricity == doctest::Approx(0.0).scale(1.0));
  CHECK(st.rows[1].eccentricity == doctest::Approx(1.2 / 0.8 - 1.0).epsilon(1e-3));
}

}  // TEST_SUITE
