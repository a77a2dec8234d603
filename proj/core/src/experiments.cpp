#include "paikit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <sstream>

#include "paikit/control.hpp"
#include "paikit/error.hpp"
#include "paikit/inversion.hpp"
#include "paikit/observability.hpp"

namespace paikit {

namespace fs = std::filesystem;

std::string tool_version() { return PAIKIT_VERSION; }

std::string status_name(RunStatus s) {
  switch (s) {
    case RunStatus::pass: return "pass";
    case RunStatus::assertion_failure: return "assertion_failure";
    case RunStatus::config_error: return "config_error";
    case RunStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

int exit_code(RunStatus s) { return static_cast<int>(s); }

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunStatus parse_status(const std::string& s) {
  if (s == "pass") return RunStatus::pass;
  if (s == "assertion_failure") return RunStatus::assertion_failure;
  if (s == "config_error") return RunStatus::config_error;
  if (s == "numerical_failure") return RunStatus::numerical_failure;
  throw ConfigError("unknown run status '" + s + "'");
}

/// Severity order used when merging runs: numerical > assertion > pass.
int severity(RunStatus s) {
  switch (s) {
    case RunStatus::pass: return 0;
    case RunStatus::assertion_failure: return 1;
    case RunStatus::config_error: return 2;
    case RunStatus::numerical_failure: return 3;
  }
  return 3;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <class Body>
RunManifest guarded(const ExperimentConfig& config, Body body) {
  RunContext ctx(config, config.output);
  try {
    body(ctx);
  } catch (const NumericalError& e) {
    ctx.manifest().status = RunStatus::numerical_failure;
    ctx.manifest().error = e.what();
    if (e.step() >= 0) ctx.manifest().error += " (step " + std::to_string(e.step()) + ")";
  }
  return ctx.finish();
}

void write_nodes(RunContext& ctx, const Domain& domain) {
  const auto& mesh = domain.neumann();
  const int d = domain.dim();
  std::vector<double> xyz;
  xyz.reserve(mesh.size() * d);
  for (const Point& p : mesh.positions())
    for (int k = 0; k < d; ++k) xyz.push_back(p[k]);
  Json meta = ctx.base_meta(domain);
  meta["quantity"] = "closed mesh node coordinates";
  ctx.array("nodes.bin", xyz, {mesh.size(), static_cast<std::size_t>(d)}, meta);
}

Json field_meta(const RunContext& ctx, const Domain& domain, const std::string& quantity,
                const std::string& layout = "closed_mesh_nodes") {
  Json m = ctx.base_meta(domain);
  m["quantity"] = quantity;
  m["node_layout"] = layout;
  return m;
}

std::vector<double> padded(std::span<const double> v, std::size_t n) {
  std::vector<double> out(v.begin(), v.end());
  out.resize(std::max(n, out.size()), 0.0);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- manifest

bool RunManifest::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

Json RunManifest::to_json() const {
  Json j;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["version"] = version;
  j["started"] = started;
  j["finished"] = finished;
  j["status"] = status_name(status);
  if (!error.empty()) j["error"] = error;
  j["assertions"] = Json::array();
  for (const auto& a : assertions)
    j["assertions"].push_back({{"name", a.name},
                               {"passed", a.passed},
                               {"value", finite_or_null(a.value)},
                               {"bound", finite_or_null(a.bound)},
                               {"detail", a.detail}});
  j["constants"] = constants;
  j["warnings"] = warnings;
  j["artifacts"] = Json::array();
  for (const auto& a : artifacts)
    j["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  return j;
}

RunManifest RunManifest::from_json(const Json& j) {
  RunManifest m;
  m.kind = j.at("kind").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.version = j.value("version", "");
  m.started = j.value("started", "");
  m.finished = j.value("finished", "");
  m.status = parse_status(j.at("status").get<std::string>());
  m.error = j.value("error", "");
  for (const auto& a : j.at("assertions")) {
    Assertion x;
    x.name = a.at("name").get<std::string>();
    x.passed = a.at("passed").get<bool>();
    x.value = a.at("value").is_number() ? a.at("value").get<double>() : NAN;
    x.bound = a.at("bound").is_number() ? a.at("bound").get<double>() : NAN;
    x.detail = a.value("detail", "");
    m.assertions.push_back(std::move(x));
  }
  m.constants = j.value("constants", Json::object());
  for (const auto& w : j.value("warnings", Json::array())) m.warnings.push_back(w.get<std::string>());
  for (const auto& a : j.at("artifacts"))
    m.artifacts.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>(),
                           a.at("bytes").get<std::uintmax_t>()});
  return m;
}

RunContext::RunContext(const ExperimentConfig& config, fs::path dir) : config_(config), dir_(std::move(dir)) {
  fs::create_directories(dir_);
  manifest_.kind = config.kind;
  manifest_.config_hash = config.hash();
  manifest_.seed = config.seed;
  manifest_.version = tool_version();
  manifest_.started = utc_now();
  json("config.json", config.to_json());
}

Json RunContext::base_meta(const Domain& domain) const {
  Json m;
  m["config_hash"] = manifest_.config_hash;
  m["experiment"] = config_.kind;
  m["seed"] = config_.seed;
  m["a"] = config_.a;
  Json g;
  g["dim"] = domain.dim();
  g["shape"] = domain.shape() == ShapeKind::disk ? "disk" : "rectangle";
  g["resolution"] = domain.resolution();
  g["h"] = domain.h();
  Json origin = Json::array(), cells = Json::array();
  for (int k = 0; k < domain.dim(); ++k) {
    origin.push_back(domain.grid().lo[k]);
    cells.push_back(domain.grid().cells[k]);
  }
  g["origin"] = origin;
  g["cells"] = cells;
  m["grid"] = g;
  return m;
}

void RunContext::record(const fs::path& p) {
  Artifact a;
  a.path = fs::relative(p, dir_).generic_string();
  a.sha256 = sha256_file(p);
  a.bytes = fs::file_size(p);
  manifest_.artifacts.push_back(std::move(a));
}

void RunContext::array(const std::string& name, std::span<const double> values,
                       const std::vector<std::size_t>& shape, const Json& meta) {
  fs::path p = dir_ / name;
  write_f64_array(p, values, shape, meta);
  record(p);
  record(p.string() + ".json");
}

void RunContext::trace(const std::string& stem, const BoundaryTrace& tr, const Json& meta) {
  for (const auto& p : write_trace(dir_ / stem, tr, meta)) record(p);
}

void RunContext::csv(const std::string& name, const CsvWriter& table) {
  table.save(dir_ / name);
  record(dir_ / name);
}

void RunContext::json(const std::string& name, const Json& j) {
  write_json(dir_ / name, j);
  record(dir_ / name);
}

void RunContext::check(std::string name, bool passed, double value, double bound, std::string detail) {
  manifest_.assertions.push_back({std::move(name), passed, value, bound, std::move(detail)});
}

void RunContext::warn(std::string message) { manifest_.warnings.push_back(std::move(message)); }

RunManifest RunContext::finish() {
  manifest_.finished = utc_now();
  if (manifest_.status != RunStatus::numerical_failure)
    manifest_.status = manifest_.all_passed() ? RunStatus::pass : RunStatus::assertion_failure;
  write_json(dir_ / "manifest.json", manifest_.to_json());
  return manifest_;
}

// ---------------------------------------------------------------- presets

void set_dimension(ExperimentConfig& c, int dim) {
  if (dim != 2 && dim != 3) throw ConfigError("--dim must be 2 or 3");
  if (dim == c.dim) return;
  c.dim = dim;
  auto mean_only = [](std::vector<double>& v) {
    if (!v.empty()) v.resize(1);
  };
  mean_only(c.inclusion.radial_coeffs);
  if (c.second_inclusion) mean_only(c.second_inclusion->radial_coeffs);
  mean_only(c.guess_coeffs);
}

void apply_small_preset(ExperimentConfig& c) {
  if (c.kind == "forward") {
    c.resolution = 64;
  } else if (c.kind == "observe") {
    if (c.dim == 3) {
      c.shape = "disk";
      c.center = {0.5, 0.5, 0.5};
      c.radius = 0.5;
      c.resolution = 32;
      c.a = 0.9;
      c.contrasts = {0.9};
      c.eccentricities.clear();
      c.T_factors = {1.0};
      c.T.reset();
      c.samples = 10;
      c.with_source = false;
      c.inclusion = {{0.5, 0.5, 0.5}, {0.2}};
      if (!c.ratio_bound) c.ratio_bound = 1.1;
    } else {
      c.resolution = 64;
      c.samples = 10;
    }
  } else if (c.kind == "control") {
    c.resolution = 32;
  } else if (c.kind == "represent") {
    c.resolution = 32;
    c.probes = 3;
  } else if (c.kind == "invert") {
    c.resolution = 64;
    c.max_iter = std::min(c.max_iter, 40);
  } else if (c.kind == "scan") {
    c.resolution = 64;
    c.pairs = 5;
  }
}

std::vector<std::pair<StarInclusion, StarInclusion>> scan_pairs(const Domain& domain, const Point& x0,
                                                                std::size_t count, CounterRng& rng,
                                                                int max_mode) {
  const double R = domain.distance_to_boundary(x0);
  if (!(R > 0.0)) throw GeometryError("scan centre must lie inside the domain");
  std::vector<std::pair<StarInclusion, StarInclusion>> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng sub = rng.split(i);
    for (int attempt = 0;; ++attempt) {
      if (attempt == 20) throw GeometryError("could not draw a resolved inclusion pair");
      CounterRng r = sub.split(static_cast<std::uint64_t>(attempt));
      double r1 = r.uniform(0.25, 0.35) * R;
      double r2 = r1 + r.uniform(0.1, 0.2) * R;
      auto make = [&](double r0) {
        if (domain.dim() == 3) return StarInclusion(3, x0, {r0});
        return random_star_inclusion(x0, max_mode, r0, 0.02 * R, r);
      };
      StarInclusion a = make(r1), b = make(r2);
      try {
        a.validate(domain);
        b.validate(domain);
      } catch (const GeometryError&) {
        continue;
      }
      Field ia = rasterize_indicator(a, domain.neumann()), ib = rasterize_indicator(b, domain.neumann());
      double diff = 0.0;
      for (std::size_t k = 0; k < ia.size(); ++k) diff = std::max(diff, std::abs(ia[k] - ib[k]));
      if (diff >= 1.0 - 1e-9) {
        pairs.emplace_back(std::move(a), std::move(b));
        break;
      }
    }
  }
  return pairs;
}

// ---------------------------------------------------------------- runners

RunManifest run_forward(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](RunContext& ctx) {
    Domain domain = cfg.make_domain();
    StarInclusion inc = cfg.make_inclusion(cfg.inclusion);
    SpeedField speed = build_speed_field(inc, cfg.a, domain);
    InitialData data = make_initial_data(cfg.optics, speed, domain);
    const double T = cfg.final_time(domain);
    ForwardOptions fo;
    fo.cfl_factor = cfg.cfl_factor;
    ForwardResult r = simulate_forward(speed, data, domain, T, fo);

    write_nodes(ctx, domain);
    ctx.array("f.bin", data.f, {data.f.size()}, field_meta(ctx, domain, "f"));
    ctx.array("g.bin", data.g, {data.g.size()}, field_meta(ctx, domain, "g"));
    ctx.array("speed.bin", speed.c, {speed.c.size()}, field_meta(ctx, domain, "c"));
    ctx.trace("trace", r.trace, ctx.base_meta(domain));

    const EnergyReport& e = r.energy;
    CsvWriter energy({"k", "t", "energy", "dissipation"});
    for (std::size_t k = 0; k < e.energy.size(); ++k) {
      energy.row().add(k).add((static_cast<double>(k) - 0.5) * r.trace.dt).add(e.energy[k]);
      energy.add(k < e.dissipation.size() ? e.dissipation[k] : 0.0);
    }
    ctx.csv("energy.csv", energy);

    TraceNorms norms = trace_norms(r.trace);
    CompatibilityReport compat = check_compatibility(data, speed, domain);
    ctx.constant("E0", e.E0);
    ctx.constant("stability_constant", e.stability_constant);
    ctx.constant("dt", r.trace.dt);
    ctx.constant("n_steps", r.trace.n_steps);
    ctx.constant("T", T);
    ctx.constant("trace_H1", norms.H1);
    ctx.constant("trace_H32", norms.H32);
    ctx.constant("trace_weighted", norms.weighted_t);
    ctx.constant("f_H1", data.f_h1);
    ctx.constant("f_H2", data.f_h2);
    ctx.constant("compat_p1a", compat.p1a);
    ctx.constant("compat_p2a_relative", compat.p2a_relative);

    const double scale = std::max(e.E0, 1e-300);
    ctx.check("energy_nonincreasing", e.max_increase <= 1e-8 * scale, e.max_increase / scale, 1e-8,
              "max per-step energy increase / E(0)");
    ctx.check("dissipation_identity", e.identity_defect <= 0.05 * scale, e.identity_defect / scale, 0.05,
              "|E_N - E_0 + boundary loss| / E(0)");
    ctx.check("trace_finite", all_finite(r.trace.values), max_abs(r.trace.values), INFINITY);
    ctx.constant("compat_global", compat.global_compatible);
    ctx.constant("compat_boundary", compat.boundary_compatible);
  });
}

RunManifest run_observe(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](RunContext& ctx) {
    Domain domain = cfg.make_domain();
    const Point x0 = cfg.x0();
    EnsembleSpec spec;
    spec.contrasts = cfg.contrasts.empty() ? std::vector<double>{cfg.a} : cfg.contrasts;
    spec.inclusion_coeffs = cfg.inclusion.radial_coeffs;
    spec.eccentricities = cfg.eccentricities;
    spec.T_factors = cfg.T ? std::vector<double>{*cfg.T / (4.0 * domain.diameter())} : cfg.T_factors;
    spec.samples = cfg.samples;
    spec.with_source = cfg.with_source;
    spec.seed = cfg.seed;
    spec.cfl_factor = cfg.cfl_factor;
    if (spec.samples < 10) ctx.warn("ensemble has fewer than 10 samples per setting");
    EnsembleStats stats = observability_ensemble(domain, x0, spec);

    CsvWriter table({"member", "a", "eccentricity", "T", "T_over_Tmin", "seed", "lhs", "flux", "source",
                     "constant", "ratio", "proof_ratio", "certified"});
    std::map<double, std::pair<double, std::size_t>> per_a;  // max ratio, count
    double max_cert = 0.0;
    std::size_t certified = 0;
    for (const auto& row : stats.rows) {
      const auto& r = row.report;
      table.row().add(static_cast<long>(row.member)).add(row.a).add(row.eccentricity).add(r.T);
      table.add(row.T_over_Tmin).add(static_cast<long>(row.seed)).add(r.lhs).add(r.flux).add(r.source);
      table.add(r.constant).add(r.ratio).add(r.proof_ratio).add(r.certified);
      auto& slot = per_a[row.a];
      slot.first = std::max(slot.first, r.ratio);
      ++slot.second;
      if (r.certified) {
        ++certified;
        max_cert = std::max(max_cert, r.ratio);
      } else if (!r.warning.empty() && ctx.manifest().warnings.empty()) {
        ctx.warn(r.warning);
      }
    }
    ctx.csv("observability.csv", table);

    Json pa = Json::array();
    for (const auto& [a, s] : per_a) pa.push_back({{"a", a}, {"max_ratio", s.first}, {"members", s.second}});
    ctx.constant("per_a", pa);
    ctx.constant("max_ratio", stats.max_ratio);
    ctx.constant("max_certified_ratio", max_cert);
    ctx.constant("mean_ratio", stats.mean_ratio);
    ctx.constant("certified_members", certified);
    ctx.constant("dim", domain.dim());

    bool finite = std::all_of(stats.rows.begin(), stats.rows.end(),
                              [](const EnsembleRow& r) { return std::isfinite(r.report.ratio); });
    ctx.check("ratios_finite", finite, stats.max_ratio, INFINITY);
    if (domain.dim() == 3) {
      const double bound = cfg.ratio_bound.value_or(1.1);
      ctx.check("certified_members_present", certified > 0, static_cast<double>(certified), 1.0,
                "members with T > 2 C(x0) a^-2 and a in the certified range");
      ctx.check("ratio_le_bound_3d", max_cert <= bound, max_cert, bound,
                "max over certified members of lhs / (constant (flux + source))");
    } else if (cfg.ratio_bound) {
      ctx.check("ratio_le_regression_bound_2d", stats.max_ratio <= *cfg.ratio_bound, stats.max_ratio,
                *cfg.ratio_bound, "frozen 2-D ensemble bound");
    } else {
      ctx.warn("2-D run without ratio_bound: ratios reported, not asserted");
    }
  });
}

RunManifest run_control(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](RunContext& ctx) {
    Domain domain = cfg.make_domain();
    StarInclusion inc = cfg.make_inclusion(cfg.inclusion);
    SpeedField speed = build_speed_field(inc, cfg.a, domain);
    CounterRng rng(cfg.seed, 0x636f6e74726f6cULL);
    CounterRng data_rng = rng.split(0);
    Field phi0 = smooth_random_unknowns(domain, data_rng);
    ControlProblem prob{domain, speed, phi0, cfg.final_time(domain), cfg.tol, cfg.max_iter, cfg.cfl_factor,
                        cfg.allow_degenerate};
    ControlCertificate cert = hum_control(prob);
    ControlledSolution sol = controlled_solution(prob, cert);

    ControlProblem zero = prob;
    zero.phi0.assign(phi0.size(), 0.0);
    ControlCertificate zc = hum_control(zero);
    CounterRng probe_rng = rng.split(1);
    double sym = gramian_symmetry_defect(prob, probe_rng, 3);

    Json meta = ctx.base_meta(domain);
    meta["quantity"] = "boundary control";
    meta["iterations"] = cert.iterations;
    meta["final_energy_rel"] = cert.final_energy_rel;
    meta["lambda_norm_emp"] = cert.lambda_norm_emp;
    meta["dt"] = cert.dt;
    meta["problem_hash"] = cert.problem_hash;
    ctx.array("control.bin", cert.control, {static_cast<std::size_t>(cert.n_steps + 1), cert.n_faces}, meta);
    ctx.array("phi0.bin", phi0, {phi0.size()}, field_meta(ctx, domain, "phi0", "dirichlet_unknowns"));

    CsvWriter hist({"iteration", "residual_rel"});
    for (std::size_t k = 0; k < cert.residual_history.size(); ++k)
      hist.row().add(k + 1).add(cert.residual_history[k]);
    ctx.csv("cg_history.csv", hist);
    CsvWriter energy({"k", "t", "energy"});
    for (std::size_t k = 0; k < sol.run.energy.size(); ++k)
      energy.row().add(k).add((static_cast<double>(k) + 0.5) * sol.run.dt).add(sol.run.energy[k]);
    ctx.csv("controlled_energy.csv", energy);

    ctx.json("certificate.json", {{"config_hash", ctx.manifest().config_hash},
                                  {"problem_hash", cert.problem_hash},
                                  {"iterations", cert.iterations},
                                  {"converged", cert.converged},
                                  {"free_energy", cert.free_energy},
                                  {"final_energy_rel", cert.final_energy_rel},
                                  {"final_energy_rel_resimulated", sol.final_energy_rel},
                                  {"lambda_norm", cert.lambda_norm},
                                  {"phi0_norm", cert.phi0_norm},
                                  {"lambda_norm_emp", cert.lambda_norm_emp},
                                  {"C_emp", sol.C_emp}});

    ctx.constant("iterations", cert.iterations);
    ctx.constant("final_energy_rel", cert.final_energy_rel);
    ctx.constant("final_energy_rel_resimulated", sol.final_energy_rel);
    ctx.constant("lambda_norm_emp", cert.lambda_norm_emp);
    ctx.constant("C_emp", sol.C_emp);
    ctx.constant("gramian_symmetry_defect", sym);

    ctx.check("final_energy_rel", cert.converged && cert.final_energy_rel <= cfg.tol, cert.final_energy_rel,
              cfg.tol, "CG residual energy / free final energy");
    ctx.check("final_energy_rel_resimulated", sol.final_energy_rel <= cfg.tol, sol.final_energy_rel, cfg.tol,
              "re-simulation with the stored control");
    ctx.check("iterations_within_cap", cert.iterations <= cfg.max_iter, cert.iterations, cfg.max_iter);
    ctx.check("zero_datum_zero_control", max_abs(zc.control) == 0.0 && zc.iterations == 0,
              max_abs(zc.control), 0.0);
    ctx.check("gramian_symmetry", sym <= 1e-8, sym, 1e-8);
    ctx.check("lambda_norm_finite", std::isfinite(cert.lambda_norm_emp), cert.lambda_norm_emp, INFINITY);
  });
}

RunManifest run_represent(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](RunContext& ctx) {
    if (!cfg.second_inclusion) throw ConfigError("represent: geometry.second_inclusion is required");
    Domain domain = cfg.make_domain();
    SpeedField c2 = build_speed_field(cfg.make_inclusion(cfg.inclusion), cfg.a, domain);
    SpeedField c1 = build_speed_field(cfg.make_inclusion(*cfg.second_inclusion), cfg.a, domain);
    InitialData data1 = make_initial_data(cfg.optics, c1, domain);
    InitialData data2 = make_initial_data(cfg.optics, c2, domain);
    const double T = cfg.final_time(domain);

    CsvWriter table({"probe", "A", "B", "C", "D", "residual_rel", "C_disc", "residual_disc_rel",
                     "hum_energy_rel", "boundary_mismatch", "iterations", "lambda_norm_emp"});
    CounterRng rng(cfg.seed, 0x726570726573ULL);
    double worst = 0.0, worst_disc = 0.0, lambda_max = 0.0;
    for (int k = 0; k < cfg.probes; ++k) {
      CounterRng sub = rng.split(static_cast<std::uint64_t>(k));
      Field phi0 = smooth_random_unknowns(domain, sub);
      ControlProblem prob{domain, c2, phi0, T, cfg.tol, cfg.max_iter, cfg.cfl_factor, cfg.allow_degenerate};
      ControlCertificate cert = hum_control(prob);
      RepresentationResidual r = representation_residual(prob, cert, c1, data1, data2);
      table.row().add(k).add(r.A).add(r.B).add(r.C).add(r.D).add(r.residual_rel).add(r.C_disc);
      table.add(r.residual_disc_rel).add(r.hum_energy_rel).add(r.boundary_mismatch).add(cert.iterations);
      table.add(cert.lambda_norm_emp);
      worst = std::max(worst, r.residual_rel);
      worst_disc = std::max(worst_disc, r.residual_disc_rel);
      lambda_max = std::max(lambda_max, cert.lambda_norm_emp);
      ctx.check("residual_rel_probe_" + std::to_string(k), r.residual_rel <= cfg.residual_tol, r.residual_rel,
                cfg.residual_tol, "|A + B + C - D| / max(|A|, |B|, |C|, |D|)");
    }
    ctx.csv("representation.csv", table);
    ctx.constant("max_residual_rel", worst);
    ctx.constant("max_residual_disc_rel", worst_disc);
    ctx.constant("lambda_norm_emp", lambda_max);
    ctx.constant("probes", cfg.probes);
  });
}

RunManifest run_invert(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](RunContext& ctx) {
    Domain domain = cfg.make_domain();
    require_certified_contrast(cfg.a);
    StarInclusion truth = cfg.make_inclusion(cfg.inclusion);
    std::vector<double> guess_coeffs = cfg.guess_coeffs.empty() ? cfg.inclusion.radial_coeffs : cfg.guess_coeffs;
    StarInclusion guess = cfg.make_inclusion({cfg.inclusion.x0, guess_coeffs});
    guess.validate(domain);
    InverseProblem prob{domain, cfg.a, cfg.optics, BoundaryTrace{}, cfg.final_time(domain), cfg.cfl_factor,
                        0.0, 3, guess};
    ForwardState truth_state = forward_state(truth, prob);
    prob.observed = truth_state.result.trace;
    if (cfg.gamma >= 0.0) {
      prob.gamma = cfg.gamma;
    } else {
      double J0 = misfit(guess_coeffs, prob);
      double n2 = 0.0;
      for (double c : guess_coeffs) n2 += c * c;
      prob.gamma = n2 > 0.0 ? 1e-6 * J0 / n2 : 0.0;
    }
    ReconstructionOptions ro;
    ro.max_iter = cfg.max_iter;
    ReconstructionResult res = reconstruct(prob, ro, &truth);

    write_nodes(ctx, domain);
    ctx.trace("observed", prob.observed, ctx.base_meta(domain));
    ctx.array("f_hat.bin", res.f_hat, {res.f_hat.size()}, field_meta(ctx, domain, "f_hat"));
    CsvWriter hist({"entry", "stage", "J", "grad_norm"});
    for (std::size_t k = 0; k < res.misfit_history.size(); ++k) {
      hist.row().add(k).add(res.stage_history[k]).add(res.misfit_history[k]);
      hist.add(res.grad_norm_history[k]);
    }
    ctx.csv("history.csv", hist);

    auto coeffs_hat = res.inclusion_hat.coeffs();
    std::vector<double> truth_c = padded(truth.coeffs(), coeffs_hat.size());
    std::vector<double> hat_c = padded(coeffs_hat, truth_c.size());
    Json x0 = Json::array();
    for (int k = 0; k < domain.dim(); ++k) x0.push_back(cfg.x0()[k]);
    ctx.json("inclusion_hat.json", {{"config_hash", ctx.manifest().config_hash},
                                    {"dim", domain.dim()},
                                    {"x0", x0},
                                    {"radial_coeffs", hat_c},
                                    {"smoothing_width", cfg.smoothing_width},
                                    {"iterations", res.iterations},
                                    {"stop_reason", res.stop_reason}});

    double worst_rel = 0.0, inactive = 0.0;
    std::size_t active = 0;
    for (std::size_t j = 0; j < truth_c.size(); ++j) {
      if (truth_c[j] != 0.0) {
        ++active;
        worst_rel = std::max(worst_rel, std::abs(hat_c[j] - truth_c[j]) / std::abs(truth_c[j]));
      } else {
        inactive = std::max(inactive, std::abs(hat_c[j]));
      }
    }
    const double coeff_bound = active <= 1 ? 0.05 : 0.10;
    const double hd = res.hausdorff_to_truth.value_or(NAN);
    Field df(res.f_hat.size());
    for (std::size_t i = 0; i < df.size(); ++i) df[i] = res.f_hat[i] - truth_state.data.f[i];

    bool monotone = true;
    for (std::size_t k = 1; k < res.misfit_history.size(); ++k)
      if (res.stage_history[k] == res.stage_history[k - 1])
        monotone = monotone && res.misfit_history[k] <= res.misfit_history[k - 1];

    ctx.constant("iterations", res.iterations);
    ctx.constant("stop_reason", res.stop_reason);
    ctx.constant("gamma", prob.gamma);
    ctx.constant("hausdorff", finite_or_null(hd));
    ctx.constant("coeff_rel_error_active", worst_rel);
    ctx.constant("coeff_abs_inactive", inactive);
    ctx.constant("f_hat_error_H1", h1_norm(domain.neumann(), df));
    ctx.constant("final_misfit", res.misfit_history.empty() ? 0.0 : res.misfit_history.back());
    if (res.line_search_failed) ctx.warn("line search failed; last iterate reported");

    ctx.check("hausdorff_le_2h", hd <= 2.0 * domain.h(), hd, 2.0 * domain.h());
    ctx.check("active_coeff_rel_error", worst_rel <= coeff_bound, worst_rel, coeff_bound,
              std::to_string(active) + " active coefficients");
    ctx.check("misfit_nonincreasing", monotone, 0.0, 0.0, "accepted steps within each continuation stage");
  });
}

RunManifest run_scan(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](RunContext& ctx) {
    Domain domain = cfg.make_domain();
    const double T = cfg.final_time(domain);
    std::vector<double> contrasts = cfg.contrasts.empty() ? std::vector<double>{cfg.a} : cfg.contrasts;
    CounterRng rng(cfg.seed, 0x7363616eULL);
    auto pairs = scan_pairs(domain, cfg.x0(), static_cast<std::size_t>(cfg.pairs), rng);
    StabilityScanReport rep = stability_scan(pairs, contrasts, cfg.optics, domain, T, cfg.cfl_factor);
    ProbeResult probe = reverse_inequality_probe(cfg.optics, pairs, contrasts.front(), domain);

    CsvWriter table({"pair", "a", "indicator_diff_inf", "one_minus_a", "lhs1", "h1", "h32", "weighted",
                     "f_diff_h1", "hausdorff", "symmetric_difference"});
    for (const auto& r : rep.rows) {
      table.row().add(r.pair).add(r.a).add(r.indicator_diff_inf).add(r.one_minus_a).add(r.lhs1).add(r.h1);
      table.add(r.h32).add(r.weighted).add(r.f_diff_h1).add(r.hausdorff).add(r.symmetric_difference);
    }
    ctx.csv("scan.csv", table);

    Json per_a = Json::array();
    for (double a : contrasts) {
      double c1 = 0.0, c2 = 0.0, d = INFINITY, min_h1 = INFINITY;
      for (const auto& r : rep.rows) {
        if (r.a != a) continue;
        c1 = std::max(c1, r.lhs1 / r.h1);
        c2 = std::max(c2, r.f_diff_h1 / (r.h32 + r.weighted));
        d = std::min(d, r.f_diff_h1 / r.indicator_diff_inf);
        min_h1 = std::min(min_h1, r.h1);
      }
      per_a.push_back({{"a", a},
                       {"C_emp1", finite_or_null(c1)},
                       {"C_emp2", finite_or_null(c2)},
                       {"d_emp", finite_or_null(d)},
                       {"a0_emp", finite_or_null(std::max(0.75, 1.0 - d / (6.0 * c1)))},
                       {"min_h1", finite_or_null(min_h1)}});
    }
    ctx.constant("per_a", per_a);
    ctx.constant("C_emp1", finite_or_null(rep.C_emp1));
    ctx.constant("C_emp2", finite_or_null(rep.C_emp2));
    ctx.constant("d_emp", finite_or_null(rep.d_emp));
    ctx.constant("a0_emp", finite_or_null(rep.a0_emp));
    ctx.constant("probe_d_emp", finite_or_null(probe.d_emp));

    double min_h1 = INFINITY;
    for (const auto& r : rep.rows) min_h1 = std::min(min_h1, r.h1);
    ctx.check("identifiability_floor", rep.identifiable && min_h1 > 1e-10, min_h1, 1e-10,
              "min over pairs of ||p1 - p2||_H1");
    ctx.check("constants_finite",
              std::isfinite(rep.C_emp1) && std::isfinite(rep.C_emp2) && std::isfinite(rep.d_emp),
              rep.C_emp1, INFINITY, "C_emp1, C_emp2, d_emp");
    ctx.check("probe_d_emp_positive", probe.d_emp > 0.0, probe.d_emp, 0.0,
              "reverse inequality probe of the optical model");
  });
}

RunManifest run_experiment(const ExperimentConfig& config) {
  if (config.kind == "forward") return run_forward(config);
  if (config.kind == "observe") return run_observe(config);
  if (config.kind == "control") return run_control(config);
  if (config.kind == "represent") return run_represent(config);
  if (config.kind == "invert") return run_invert(config);
  if (config.kind == "scan") return run_scan(config);
  throw ConfigError("unknown experiment kind '" + config.kind + "'");
}

// ---------------------------------------------------------------- report

ReportSummary report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + ": not a directory");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ConfigError(dir.string() + ": no manifest.json found");

  const std::vector<std::string> keys{"C_emp1", "C_emp2", "d_emp", "a0_emp", "lambda_norm_emp", "max_ratio"};
  std::vector<std::string> header{"run", "kind", "config_hash", "status", "passed", "assertions", "a"};
  header.insert(header.end(), keys.begin(), keys.end());
  ReportSummary s;
  s.table = CsvWriter(header);
  std::vector<std::vector<std::string>> text_rows{header};
  std::vector<std::string> notes;

  auto num = [](const Json& j, const std::string& k) -> std::string {
    return j.contains(k) && j.at(k).is_number() ? format_number(j.at(k).get<double>()) : "";
  };

  for (const auto& p : paths) {
    std::string run = fs::relative(p.parent_path(), dir).generic_string();
    if (run.empty()) run = ".";
    RunManifest m;
    try {
      m = RunManifest::from_json(read_json_file(p));
    } catch (const std::exception& e) {
      ++s.warnings;
      notes.push_back("warning: skipped " + p.string() + ": " + e.what());
      continue;
    }
    ++s.manifests;
    RunStatus status = m.status;
    for (const auto& a : m.artifacts) {
      fs::path f = p.parent_path() / a.path;
      if (!fs::exists(f) || sha256_file(f) != a.sha256) {
        ++s.warnings;
        notes.push_back("warning: " + run + ": digest mismatch for " + a.path);
        if (severity(status) < severity(RunStatus::assertion_failure)) status = RunStatus::assertion_failure;
      }
    }
    s.warnings += m.warnings.size();
    for (const auto& w : m.warnings) notes.push_back("note: " + run + ": " + w);
    if (severity(status) > severity(s.worst)) s.worst = status;

    std::size_t passed = std::count_if(m.assertions.begin(), m.assertions.end(),
                                       [](const Assertion& a) { return a.passed; });
    std::vector<Json> groups;
    if (m.constants.contains("per_a") && m.constants.at("per_a").is_array() && !m.constants.at("per_a").empty()) {
      for (const auto& g : m.constants.at("per_a")) {
        Json merged = m.constants;
        merged.erase("per_a");
        for (auto it = g.begin(); it != g.end(); ++it) merged[it.key()] = it.value();
        groups.push_back(std::move(merged));
      }
    } else {
      groups.push_back(m.constants);
    }
    for (const auto& g : groups) {
      std::vector<std::string> cells{run,
                                     m.kind,
                                     m.config_hash.substr(0, 12),
                                     status_name(status),
                                     std::to_string(passed),
                                     std::to_string(m.assertions.size()),
                                     num(g, "a")};
      for (const auto& k : keys) cells.push_back(num(g, k));
      s.table.row();
      for (const auto& c : cells) s.table.add(c);
      text_rows.push_back(std::move(cells));
    }
  }
  if (s.manifests == 0) throw ConfigError(dir.string() + ": no readable manifest found");

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : text_rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  for (const auto& r : text_rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << r[c];
      if (c + 1 < r.size()) out << std::string(width[c] - r[c].size() + 2, ' ');
    }
    out << '\n';
  }
  for (const auto& n : notes) out << n << '\n';
  out << "runs: " << s.manifests << "  warnings: " << s.warnings << "  worst status: " << status_name(s.worst)
      << '\n';
  s.text = out.str();
  return s;
}

}  // namespace paikit
