// Acceptance runner: one pass/fail line per criterion.
//   paikit_acceptance            all criteria
//   paikit_acceptance 03 07      selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "paikit/config.hpp"
#include "paikit/control.hpp"
#include "paikit/error.hpp"
#include "paikit/experiments.hpp"
#include "paikit/inversion.hpp"
#include "paikit/io.hpp"
#include "paikit/observability.hpp"
#include "paikit/random.hpp"
#include "paikit/wave_dirichlet.hpp"
#include "paikit/wave_forward.hpp"

using namespace paikit;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Detail {
 public:
  template <class T>
  Detail& operator()(const std::string& key, T value) {
    if (!first_) os_ << ", ";
    first_ = false;
    os_ << key << "=" << value;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
  bool first_ = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Domain unit_disk(int res) { return Domain::disk({0.5, 0.5, 0.0}, 0.5, 2, res); }
Domain unit_square(int res) { return Domain::rectangle({0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, 2, res); }

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------- 01

Outcome solver_convergence() {
  auto t0 = std::chrono::steady_clock::now();
  const double w = std::sqrt(2.0) * kPi, T = 0.5;
  auto exact = [w](double t, const Point& x) {
    return std::sin(kPi * x[0] + 0.3) * std::sin(kPi * x[1] + 0.7) * std::cos(w * t);
  };
  std::vector<double> err;
  for (int res : {64, 128, 256}) {
    Domain d = unit_square(res);
    const auto& mesh = d.neumann();
    Field f(mesh.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = exact(0.0, mesh.positions()[i]);
    InitialData data{f, Field(f.size(), 0.0), Field(mesh.boundary().size(), 0.0)};
    ForwardOptions o;
    o.dirichlet_data = exact;
    o.snapshot_stride = 1L << 40;
    ForwardResult r = simulate_forward(uniform_speed(d), data, d, T, o);
    const Field& pT = r.trajectory.p.back();
    double s = 0.0;
    for (std::size_t i = 0; i < pT.size(); ++i) s += std::pow(pT[i] - exact(T, mesh.positions()[i]), 2);
    err.push_back(std::sqrt(s * d.h() * d.h()));
  }
  double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
  double secs = seconds_since(t0);
  Detail det;
  det("L2_64", err[0])("L2_128", err[1])("L2_256", err[2])("order_64_128", o1)("order_128_256", o2)("seconds", secs);
  return {std::min(o1, o2) >= 1.9 && secs <= 120.0, det.str()};
}

// ---------------------------------------------------------------- 02

Outcome energy_decay() {
  CounterRng root(2024, 0x6e72);
  double worst_inc = 0.0, worst_id = 0.0;
  bool ok = true;
  for (int k = 0; k < 10; ++k) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(k));
    Domain d = unit_disk(128);
    Point x0{0.5 + rng.uniform(-0.05, 0.05), 0.5 + rng.uniform(-0.05, 0.05), 0.0};
    StarInclusion shape = random_star_inclusion(x0, 3, rng.uniform(0.15, 0.25), 0.03, rng);
    auto sc = shape.coeffs();
    StarInclusion inc(2, x0, std::vector<double>(sc.begin(), sc.end()), 0.05);
    const double a = rng.uniform(0.76, 0.99);
    OpticalCoefficients optics;
    optics.D_out = rng.uniform(0.03, 0.08);
    optics.D_in = rng.uniform(0.02, 0.05);
    optics.mu_out = rng.uniform(0.1, 0.3);
    optics.mu_in = rng.uniform(0.5, 1.5);
    optics.illumination = rng.uniform(0.5, 1.5);
    optics.beta = rng.uniform(0.5, 2.0);
    SpeedField s = build_speed_field(inc, a, d);
    InitialData data = make_initial_data(optics, s, d);
    ForwardResult r = simulate_forward(s, data, d, 4.0 * d.diameter());
    const EnergyReport& e = r.energy;
    double inc_rel = e.max_increase / e.E0, id_rel = e.identity_defect / e.E0;
    worst_inc = std::max(worst_inc, inc_rel);
    worst_id = std::max(worst_id, id_rel);
    ok = ok && e.E0 > 0.0 && inc_rel <= 1e-8 && id_rel <= 0.05;
  }
  return {ok, (Detail{})("configs", 10)("max_increase_rel", worst_inc)("identity_defect_rel", worst_id).str()};
}

// ---------------------------------------------------------------- 03

Outcome dirichlet_energy() {
  Domain d = unit_disk(128);
  SpeedField s = build_speed_field(StarInclusion(2, {0.5, 0.5, 0.0}, {0.2, 0.0, 0.0, 0.03, 0.0}), 0.9, d);
  CounterRng rng(3);
  DirichletProblem p;
  p.u0 = smooth_random_unknowns(d, rng);
  p.u1 = smooth_random_unknowns(d, rng);
  p.T = 4.0 * d.diameter();
  DirichletResult r = simulate_dirichlet(s, d, p);
  const double E0 = r.energy.front();
  double dev = 0.0;
  for (double e : r.energy) dev = std::max(dev, std::abs(e - E0) / E0);
  return {E0 > 0.0 && dev <= 1e-3, (Detail{})("max_rel_deviation", dev)("steps", r.n_steps).str()};
}

// ---------------------------------------------------------------- 04

Outcome observability() {
  auto t0 = std::chrono::steady_clock::now();
  Domain ball = Domain::disk({0.5, 0.5, 0.5}, 0.5, 3, 32);
  EnsembleSpec spec3;
  spec3.contrasts = {0.9};
  spec3.inclusion_coeffs = {0.2};
  spec3.T_factors = {1.0};
  spec3.samples = 10;
  spec3.seed = 1;
  EnsembleStats s3 = observability_ensemble(ball, {0.5, 0.5, 0.5}, spec3);
  double max3 = 0.0;
  bool ok3 = s3.rows.size() == 10;
  for (const auto& row : s3.rows) {
    max3 = std::max(max3, row.report.ratio);
    ok3 = ok3 && std::isfinite(row.report.ratio) && row.report.ratio <= 1.1;
  }
  const double secs3 = seconds_since(t0);

  Json frozen = read_json_file(fs::path(PAIKIT_TEST_DATA_DIR) / "observability_2d_bound.json");
  const double R2 = frozen.at("R_2D").get<double>();
  ExperimentConfig cfg = parse_config(frozen.at("config").dump(), "observe", "observability_2d_bound.json");
  Domain d2 = cfg.make_domain();
  EnsembleSpec spec2;
  spec2.contrasts = cfg.contrasts.empty() ? std::vector<double>{cfg.a} : cfg.contrasts;
  spec2.inclusion_coeffs = cfg.inclusion.radial_coeffs;
  spec2.eccentricities = cfg.eccentricities;
  spec2.T_factors = cfg.T_factors;
  spec2.samples = cfg.samples;
  spec2.with_source = cfg.with_source;
  spec2.seed = cfg.seed;
  spec2.cfl_factor = cfg.cfl_factor;
  EnsembleStats s2 = observability_ensemble(d2, cfg.x0(), spec2);

  Detail det;
  det("3d_rows", s3.rows.size())("3d_max_ratio", max3)("3d_seconds", secs3)("2d_rows", s2.rows.size());
  det("2d_max_ratio", s2.max_ratio)("R_2D", R2);
  return {ok3 && secs3 <= 600.0 && s2.max_ratio <= R2, det.str()};
}

// ---------------------------------------------------------------- 05

Outcome hum_control_criterion() {
  Domain d = unit_disk(64);
  SpeedField s = build_speed_field(StarInclusion(2, {0.5, 0.5, 0.0}, {0.2}), 0.9, d);
  CounterRng rng(5);
  ControlProblem p{d, s, smooth_random_unknowns(d, rng), 4.0 * d.diameter(), 1e-4, 200, 0.5, false};
  ControlCertificate c = hum_control(p);
  ControlledSolution sol = controlled_solution(p, c);

  ControlProblem zero = p;
  std::fill(zero.phi0.begin(), zero.phi0.end(), 0.0);
  ControlCertificate cz = hum_control(zero);
  const bool zero_exact = std::all_of(cz.control.begin(), cz.control.end(), [](double v) { return v == 0.0; });

  CounterRng probe(55);
  const double sym = gramian_symmetry_defect(p, probe, 3);
  Detail det;
  det("iterations", c.iterations)("final_energy_rel", c.final_energy_rel);
  det("resimulated_energy_rel", sol.final_energy_rel)("lambda0_zero", zero_exact)("symmetry_defect", sym);
  return {c.converged && c.iterations <= 200 && c.final_energy_rel <= 1e-4 && sol.final_energy_rel <= 1e-4 &&
              zero_exact && sym <= 1e-8,
          det.str()};
}

// ---------------------------------------------------------------- 06

struct RepresentationRun {
  std::vector<double> residuals;
  double mean = 0.0;
};

RepresentationRun representation_at(int res) {
  ExperimentConfig cfg = default_config("represent");
  cfg.resolution = res;
  Domain domain = cfg.make_domain();
  SpeedField c2 = build_speed_field(cfg.make_inclusion(cfg.inclusion), 0.9, domain);
  SpeedField c1 = build_speed_field(cfg.make_inclusion(*cfg.second_inclusion), 0.9, domain);
  InitialData data1 = make_initial_data(cfg.optics, c1, domain);
  InitialData data2 = make_initial_data(cfg.optics, c2, domain);
  CounterRng rng(cfg.seed, 0x726570726573ULL);
  RepresentationRun out;
  for (int k = 0; k < 10; ++k) {
    CounterRng sub = rng.split(static_cast<std::uint64_t>(k));
    ControlProblem prob{domain, c2, smooth_random_unknowns(domain, sub), cfg.final_time(domain), 1e-4, 200, 0.5,
                        false};
    ControlCertificate cert = hum_control(prob);
    RepresentationResidual r = representation_residual(prob, cert, c1, data1, data2);
    out.residuals.push_back(r.residual_rel);
    out.mean += r.residual_rel / 10.0;
  }
  return out;
}

Outcome representation() {
  RepresentationRun coarse = representation_at(32);
  RepresentationRun fine = representation_at(64);
  const double worst = *std::max_element(fine.residuals.begin(), fine.residuals.end());
  Detail det;
  det("probes", fine.residuals.size())("max_residual_rel_64", worst)("mean_32", coarse.mean)("mean_64", fine.mean);
  return {worst <= 5e-2 && fine.mean < coarse.mean, det.str()};
}

// ---------------------------------------------------------------- 07

Outcome transposition() {
  Domain d = unit_disk(128);
  SpeedField s = build_speed_field(StarInclusion(2, {0.5, 0.5, 0.0}, {0.2, 0.0, 0.0, 0.03, 0.0}), 0.9, d);
  const double T = 1.0;
  const auto& dm = d.dirichlet();
  const std::size_t n = dm.size();
  const double dt = time_grid(d, s, T, 0.5).dt;
  auto on_unknowns = [&](const std::function<double(const Point&)>& fn) {
    Field u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = fn(d.neumann().positions()[dm.closed_node(i)]);
    return u;
  };
  double worst = 0.0;
  CounterRng root(7);
  for (int k = 0; k < 3; ++k) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(k));
    const double cx = rng.uniform(0.35, 0.65), cy = rng.uniform(0.35, 0.65);
    Field psi0 = on_unknowns([&](const Point& x) {
      return std::exp(-(std::pow(x[0] - cx, 2) + std::pow(x[1] - cy, 2)) / 0.02);
    });
    Field psi1 = smooth_random_unknowns(d, rng);
    Field Fshape = smooth_random_unknowns(d, rng);
    const double om = rng.uniform(2.0, 6.0), phase = rng.uniform(0.0, 2.0 * kPi);
    auto F = [&](long step, std::span<double> out) {
      const double t = step * dt;
      for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(om * t) * Fshape[i];
    };
    auto g = [&](long step, std::span<double> out) {
      const double t = step * dt;
      const double env = t < 0.4 ? std::pow(std::sin(kPi * t / 0.4), 4) : 0.0;
      for (std::size_t f = 0; f < out.size(); ++f)
        out[f] = env * std::cos(std::atan2(dm.faces()[f].position[1] - 0.5, dm.faces()[f].position[0] - 0.5) +
                                phase);
    };
    TranspositionReport r = transposition_check(s, d, psi0, psi1, g, F, T);
    worst = std::max(worst, r.defect_rel);
  }
  return {worst <= 0.02, (Detail{})("probes", 3)("max_defect_rel", worst).str()};
}

// ---------------------------------------------------------------- 08

Outcome gradient() {
  const Point x0{0.5, 0.5, 0.0};
  std::vector<double> truth{0.25, 0.02, -0.01, 0.015, 0.0, 0.0, 0.01};
  Domain domain = unit_disk(64);
  InverseProblem p{domain, 0.9, OpticalCoefficients{}, BoundaryTrace{}, 4.0 * domain.diameter(), 0.5, 0.0, 3,
                   StarInclusion(2, x0, {0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0})};
  StarInclusion true_inc(2, x0, truth);
  p.observed = forward_state(true_inc, p).result.trace;

  CounterRng rng(8);
  std::vector<double> x = truth;
  for (double& v : x) v += rng.uniform(-0.01, 0.01);
  MisfitGradient g = adjoint_gradient(x, p);
  double worst = 0.0;
  const double h = 1e-4;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> dir(x.size());
    for (double& v : dir) v = rng.normal();
    const double nd = norm2(dir);
    for (double& v : dir) v /= nd;
    std::vector<double> xp = x, xm = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
      xp[j] += h * dir[j];
      xm[j] -= h * dir[j];
    }
    const double fd = (misfit(xp, p) - misfit(xm, p)) / (2.0 * h);
    double ad = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) ad += g.grad[j] * dir[j];
    worst = std::max(worst, std::abs(fd - ad) / std::max(std::abs(ad), 1e-300));
  }
  MisfitGradient gt = adjoint_gradient(truth, p);
  const double stat = norm2(gt.grad) / norm2(g.grad);
  Detail det;
  det("directions", 5)("fd_step", h)("max_rel_error", worst)("grad_norm_at_truth_rel", stat);
  return {worst <= 1e-3 && stat <= 1e-6, det.str()};
}

// ---------------------------------------------------------------- 09

Outcome reconstruction() {
  bool ok = true;
  Detail det;
  for (const char* name : {"invert_disk", "invert_three_mode"}) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = load_config(fs::path(PAIKIT_CONFIG_DIR) / (std::string(name) + ".json"), "invert");
    cfg.output = (fs::temp_directory_path() / "paikit_acceptance" / name).string();
    fs::remove_all(cfg.output);
    RunManifest m = run_experiment(cfg);
    const double secs = seconds_since(t0);

    Json hat = read_json_file(fs::path(cfg.output) / "inclusion_hat.json");
    std::vector<double> hc = hat.at("radial_coeffs").get<std::vector<double>>();
    std::vector<double> tc = cfg.inclusion.radial_coeffs;
    tc.resize(std::max(tc.size(), hc.size()), 0.0);
    hc.resize(tc.size(), 0.0);
    Domain domain = cfg.make_domain();
    StarInclusion truth = cfg.make_inclusion({cfg.inclusion.x0, tc});
    StarInclusion recon = cfg.make_inclusion({cfg.inclusion.x0, hc});
    const double hd = hausdorff_distance(truth, recon);
    double rel = 0.0;
    std::size_t active = 0;
    for (std::size_t j = 0; j < tc.size(); ++j)
      if (tc[j] != 0.0) {
        ++active;
        rel = std::max(rel, std::abs(hc[j] - tc[j]) / std::abs(tc[j]));
      }
    const double bound = active <= 1 ? 0.05 : 0.10;
    const bool pass = m.status == RunStatus::pass && hd <= 2.0 * domain.h() && rel <= bound && secs <= 1800.0;
    ok = ok && pass;
    det(std::string(name) + ".hausdorff", hd)(std::string(name) + ".2dx", 2.0 * domain.h());
    det(std::string(name) + ".coeff_rel", rel)(std::string(name) + ".seconds", secs);
  }
  return {ok, det.str()};
}

// ---------------------------------------------------------------- 10

Outcome stability_scan_criterion() {
  ExperimentConfig cfg = default_config("scan");
  Domain domain = cfg.make_domain();
  CounterRng rng(cfg.seed, 0x7363616eULL);
  auto pairs = scan_pairs(domain, cfg.x0(), 25, rng);
  std::vector<double> contrasts{0.9};
  StabilityScanReport rep = stability_scan(pairs, contrasts, cfg.optics, domain, cfg.final_time(domain));
  ProbeResult probe = reverse_inequality_probe(cfg.optics, pairs, 0.9, domain);
  double min_h1 = INFINITY;
  for (const auto& r : rep.rows) min_h1 = std::min(min_h1, r.h1);
  const bool finite = std::isfinite(rep.C_emp1) && std::isfinite(rep.C_emp2) && std::isfinite(rep.d_emp);
  Detail det;
  det("pairs", rep.rows.size())("min_h1", min_h1)("C_emp1", rep.C_emp1)("C_emp2", rep.C_emp2)("d_emp", rep.d_emp);
  det("a0_emp", rep.a0_emp)("probe_d_emp", probe.d_emp);
  return {rep.rows.size() == 25 && min_h1 > 1e-10 && finite && probe.d_emp > 0.0, det.str()};
}

struct Criterion {
  const char* id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"01", "solver_convergence", solver_convergence},
    {"02", "energy_decay", energy_decay},
    {"03", "dirichlet_energy", dirichlet_energy},
    {"04", "observability", observability},
    {"05", "hum_control", hum_control_criterion},
    {"06", "representation", representation},
    {"07", "transposition", transposition},
    {"08", "gradient", gradient},
    {"09", "reconstruction", reconstruction},
    {"10", "stability_scan", stability_scan_criterion},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    ++ran;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches the arguments\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
