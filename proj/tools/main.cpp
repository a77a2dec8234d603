// paikit: experiment runner for the photoacoustic inclusion toolkit.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "paikit/config.hpp"
#include "paikit/error.hpp"
#include "paikit/experiments.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> dim;
  std::optional<int> resolution;
  std::string out;
  bool small = false;
};

void print_manifest(const paikit::RunManifest& m, const std::filesystem::path& dir) {
  std::printf("%s  config %s  seed %llu\n", m.kind.c_str(), m.config_hash.substr(0, 12).c_str(),
              static_cast<unsigned long long>(m.seed));
  for (const auto& a : m.assertions)
    std::printf("  %-4s %-34s value %-18s bound %s\n", a.passed ? "ok" : "FAIL", a.name.c_str(),
                paikit::format_number(a.value).c_str(), paikit::format_number(a.bound).c_str());
  for (const auto& w : m.warnings) std::printf("  warning: %s\n", w.c_str());
  if (!m.error.empty()) std::printf("  error: %s\n", m.error.c_str());
  std::printf("status %s, %zu artifacts, manifest %s\n", paikit::status_name(m.status).c_str(),
              m.artifacts.size(), (dir / "manifest.json").string().c_str());
}

int run_kind(const std::string& kind, const RunFlags& f) {
  paikit::ExperimentConfig cfg =
      f.config.empty() ? paikit::default_config(kind) : paikit::load_config(f.config, kind);
  if (f.dim) paikit::set_dimension(cfg, *f.dim);
  if (f.small) paikit::apply_small_preset(cfg);
  if (f.resolution) {
    if (*f.resolution < 4) throw paikit::ConfigError("--resolution must be at least 4");
    cfg.resolution = *f.resolution;
  }
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output = f.out;
  paikit::RunManifest m = paikit::run_experiment(cfg);
  print_manifest(m, cfg.output);
  return paikit::exit_code(m.status);
}

int run_report(const std::string& dir, const std::string& out) {
  paikit::ReportSummary s = paikit::report(dir);
  std::filesystem::path csv = out.empty() ? std::filesystem::path(dir) / "summary.csv" : std::filesystem::path(out);
  s.table.save(csv);
  std::cout << s.text;
  if (s.warnings > 0) std::cout << "flag: " << s.warnings << " warning(s)\n";
  std::cout << "summary " << csv.string() << '\n';
  return paikit::exit_code(s.worst);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photoacoustic inclusion toolkit: forward solves, observability, HUM control, inversion"};
  app.require_subcommand(1);

  const std::pair<const char*, const char*> kinds[] = {
      {"forward", "Damped-boundary wave solve; writes f, g, the boundary trace and the energy history"},
      {"observe", "Observability ensemble for the Dirichlet problem"},
      {"control", "Conjugate-gradient HUM boundary control"},
      {"represent", "Weak representation identity over probe data"},
      {"invert", "Shape reconstruction from a single boundary trace"},
      {"scan", "Stability scan over random inclusion pairs"},
  };
  RunFlags flags;
  std::string selected;
  for (const auto& [name, help] : kinds) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Root seed of the counter-based generator");
    sub->add_option("--dim", flags.dim, "Spatial dimension")->check(CLI::IsMember({2, 3}));
    sub->add_option("--resolution", flags.resolution, "Cells across the domain");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_flag("--small", flags.small, "Reduced acceptance preset");
    sub->callback([&selected, n = std::string(name)] { selected = n; });
  }
  std::string report_dir, report_out;
  CLI::App* rep = app.add_subcommand("report", "Aggregate the manifests below a directory");
  rep->add_option("dir", report_dir, "Directory searched for manifest.json files")->required();
  rep->add_option("--out", report_out, "Summary CSV path (default <dir>/summary.csv)");
  rep->callback([&selected] { selected = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (selected == "report") return run_report(report_dir, report_out);
    return run_kind(selected, flags);
  } catch (const paikit::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const paikit::GeometryError& e) {
    std::fprintf(stderr, "invalid geometry: %s\n", e.what());
    return 2;
  } catch (const paikit::PreconditionError& e) {
    std::fprintf(stderr, "precondition violated: %s\n", e.what());
    return 2;
  } catch (const paikit::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
