#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "paikit/config.hpp"
#include "paikit/error.hpp"
#include "paikit/experiments.hpp"
#include "paikit/io.hpp"
#include "support.hpp"

using namespace paikit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("paikit_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text, const std::string& kind = "forward") {
  try {
    parse_config(text, kind, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig tiny_forward(const fs::path& out) {
  ExperimentConfig c = default_config("forward");
  c.resolution = 48;
  c.T = 0.5;
  c.output = out.string();
  return c;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config errors name the field and its position") {
  const std::string missing_a = R"({
  "experiment": {"kind": "forward"},
  "geometry": {
    "dim": 2,
    "domain": {"shape": "disk", "center": [0.5, 0.5], "radius": 0.5},
    "inclusion": {"x0": [0.5, 0.5], "radial_coeffs": [0.2]}
  }
})";
  std::string e = error_of(missing_a);
  CHECK(e.find("geometry.a") != std::string::npos);
  CHECK(e.find("cfg.json:") != std::string::npos);

  std::string unknown = error_of(R"({"experiment": {"kind": "forward"},
  "geometry": {"a": 0.9, "domain": {"shape": "disk", "center": [0.5, 0.5], "radius": 0.5}, "inclusion": {"x0": [0.5, 0.5], "radial_coeffs": [0.2]}},
  "solver": {"cfl": 0.5}})");
  CHECK(unknown.find("solver.cfl") != std::string::npos);
  CHECK(unknown.find("unknown key") != std::string::npos);
  CHECK(unknown.find(":3:") != std::string::npos);

  std::string typed = error_of(R"({"geometry": {"a": "high", "domain": {"shape": "disk", "center": [0.5, 0.5], "radius": 0.5},
  "inclusion": {"x0": [0.5, 0.5], "radial_coeffs": [0.2]}}})");
  CHECK(typed.find("expected a number") != std::string::npos);

  CHECK_FALSE(error_of("{ not json").empty());
  CHECK_FALSE(error_of(R"({"geometry": {"a": 1.5, "domain": {"shape": "disk", "center": [0.5, 0.5], "radius": 0.5},
  "inclusion": {"x0": [0.5, 0.5], "radial_coeffs": [0.2]}}})").empty());
  CHECK_FALSE(error_of(R"({"experiment": {"kind": "observe"}})", "forward").empty());
}

TEST_CASE("config hash is canonical") {
  const std::string text = R"({"geometry": {"a": 0.85, "domain": {"shape": "disk", "center": [0.5, 0.5], "radius": 0.5},
    "inclusion": {"x0": [0.5, 0.5], "radial_coeffs": [0.2]}}})";
  ExperimentConfig a = parse_config(text, "forward");
  ExperimentConfig b = parse_config(text, "forward");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 64);
  b.seed += 1;
  CHECK(a.hash() != b.hash());
  ExperimentConfig round = parse_config(a.to_json().dump(), "forward");
  CHECK(round.hash() == a.hash());
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string_view("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("f64 arrays round trip with a sidecar") {
  fs::path dir = scratch("f64");
  std::vector<double> v{1.0, -2.5, 3.25e-300, 0.1, 7.0, 1e300};
  std::string digest = write_f64_array(dir / "a.bin", v, {2, 3}, Json{{"field", "test"}});
  CHECK(fs::file_size(dir / "a.bin") == v.size() * 8);
  CHECK(digest == sha256_file(dir / "a.bin"));
  CHECK(read_f64_array(dir / "a.bin") == v);
  Json side = read_json_file(dir / "a.bin.json");
  CHECK(side.at("shape") == Json::array({2, 3}));
  CHECK(side.at("meta").at("field") == "test");
  CHECK(side.at("sha256") == digest);
  const std::string bytes = slurp(dir / "a.bin");
  CHECK(static_cast<unsigned char>(bytes[7]) == 0x3f);
  CHECK(static_cast<unsigned char>(bytes[6]) == 0xf0);
  fs::remove_all(dir);
}

TEST_CASE("csv writer formatting") {
  CsvWriter w({"name", "x", "n", "ok"});
  w.row().add("a").add(0.5).add(3).add(true);
  w.row().add("b").add(-1e-20).add(std::size_t{7}).add(false);
  CHECK(w.rows() == 2);
  CHECK(w.str() == "name,x,n,ok\na,5.0000000000e-01,3,true\nb,-1.0000000000e-20,7,false\n");
  CHECK(format_number(1.0) == "1.0000000000e+00");
}

TEST_CASE("runs are deterministic and reports aggregate them") {
  fs::path root = scratch("runs");
  ExperimentConfig c = tiny_forward(root / "fwd");
  RunManifest m1 = run_experiment(c);
  CHECK(m1.status == RunStatus::pass);
  const std::string csv1 = slurp(root / "fwd" / "energy.csv");
  const std::string bin1 = sha256_file(root / "fwd" / "trace.bin");
  RunManifest m2 = run_experiment(c);
  CHECK(slurp(root / "fwd" / "energy.csv") == csv1);
  CHECK(sha256_file(root / "fwd" / "trace.bin") == bin1);
  CHECK(m1.config_hash == m2.config_hash);
  CHECK_FALSE(m1.artifacts.empty());

  ReportSummary s = report(root);
  CHECK(s.manifests == 1);
  CHECK(s.worst == RunStatus::pass);
  CHECK(s.table.rows() >= 1);

  RunManifest back = RunManifest::from_json(read_json_file(root / "fwd" / "manifest.json"));
  CHECK(back.config_hash == m2.config_hash);
  CHECK(back.artifacts.size() == m2.artifacts.size());

  {
    std::ofstream tamper(root / "fwd" / "energy.csv", std::ios::app);
    tamper << "x\n";
  }
  ReportSummary t = report(root);
  CHECK(t.warnings >= 1);
  CHECK(t.worst == RunStatus::assertion_failure);

  fs::path empty = scratch("empty");
  CHECK_THROWS_AS(report(empty), ConfigError);
  CHECK_THROWS_AS(report(empty / "missing"), ConfigError);
  fs::remove_all(root);
  fs::remove_all(empty);
}

TEST_CASE("status codes") {
  CHECK(exit_code(RunStatus::pass) == 0);
  CHECK(exit_code(RunStatus::assertion_failure) == 1);
  CHECK(exit_code(RunStatus::config_error) == 2);
  CHECK(exit_code(RunStatus::numerical_failure) == 3);
  CHECK(status_name(RunStatus::pass) != status_name(RunStatus::numerical_failure));
}

TEST_CASE("dimension switch and small presets") {
  ExperimentConfig c = default_config("observe");
  set_dimension(c, 3);
  CHECK(c.dim == 3);
  CHECK(c.inclusion.radial_coeffs.size() == 1);
  apply_small_preset(c);
  CHECK(c.resolution == 32);
  CHECK(c.samples == 10);
  REQUIRE(c.ratio_bound.has_value());
  CHECK(*c.ratio_bound == 1.1);
  CHECK_NOTHROW(c.make_domain());
  CHECK_THROWS_AS(set_dimension(c, 4), ConfigError);
}

TEST_CASE("scan pairs are distinct and reproducible") {
  Domain d = test::unit_disk(32);
  CounterRng r1(5), r2(5);
  auto a = scan_pairs(d, {0.5, 0.5, 0.0}, 6, r1);
  auto b = scan_pairs(d, {0.5, 0.5, 0.0}, 6, r2);
  REQUIRE(a.size() == 6);
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto ca = a[k].first.coeffs(), cb = b[k].first.coeffs(), cs = a[k].second.coeffs();
    CHECK(std::equal(ca.begin(), ca.end(), cb.begin(), cb.end()));
    CHECK_FALSE(std::equal(ca.begin(), ca.end(), cs.begin(), cs.end()));
    Field i1 = rasterize_indicator(a[k].first, d.neumann()), i2 = rasterize_indicator(a[k].second, d.neumann());
    double diff = 0.0;
    for (std::size_t i = 0; i < i1.size(); ++i) diff = std::max(diff, std::abs(i1[i] - i2[i]));
    CHECK(diff == doctest::Approx(1.0));
  }
}

TEST_CASE("counter generator streams") {
  CounterRng a(42), b(42);
  for (int k = 0; k < 5; ++k) CHECK(a.next() == b.next());
  CounterRng s1 = a.split(3), s2 = b.split(3), s3 = a.split(4);
  CHECK(s1.next() == s2.next());
  CHECK(s1.next() != s3.next());
  double mean = 0.0;
  CounterRng u(1);
  for (int k = 0; k < 20000; ++k) mean += u.uniform();
  CHECK(mean / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

}  // TEST_SUITE
