#include "paikit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "paikit/error.hpp"

namespace paikit {

namespace {

const std::set<std::string> kKinds{"forward", "observe", "control", "represent", "invert", "scan"};

/// Best-effort source location of a key for diagnostics.
struct Locator {
  std::string text;
  std::string source;

  std::string where(const std::string& path) const {
    std::string key = path.substr(path.find_last_of('.') + 1);
    auto bracket = key.find('[');
    if (bracket != std::string::npos) key = key.substr(0, bracket);
    std::string needle = "\"" + key + "\"";
    auto pos = text.find(needle);
    if (pos == std::string::npos) return source + ": " + path;
    return source + ":" + position(pos) + ": " + path;
  }
  std::string position(std::size_t byte) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return std::to_string(line) + ":" + std::to_string(col);
  }
};

class Reader {
 public:
  Reader(const Json& j, std::string path, const Locator& loc) : j_(j), path_(std::move(path)), loc_(loc) {
    if (!j_.is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) {
        throw ConfigError(loc_.where(child(it.key())) + ": unknown key");
      }
  }
  bool has(const char* k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const Json& at(const char* k) const { return j_.at(k); }
  std::string child(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = "") const {
    throw ConfigError(loc_.where(key.empty() ? path_ : child(key)) + ": " + msg);
  }
  void require(const char* k) const {
    if (!has(k)) {
      std::string at = path_.empty() ? loc_.source : loc_.where(path_);
      throw ConfigError(at + ": required key '" + child(k) + "' missing");
    }
  }

  double number(const char* k, double def) const {
    if (!has(k)) return def;
    if (!at(k).is_number()) fail("expected a number", k);
    return at(k).get<double>();
  }
  double positive(const char* k, double def) const {
    double v = number(k, def);
    if (!(v > 0.0)) fail("must be positive", k);
    return v;
  }
  long integer(const char* k, long def) const {
    if (!has(k)) return def;
    if (!at(k).is_number_integer()) fail("expected an integer", k);
    return at(k).get<long>();
  }
  bool boolean(const char* k, bool def) const {
    if (!has(k)) return def;
    if (!at(k).is_boolean()) fail("expected true or false", k);
    return at(k).get<bool>();
  }
  std::string string(const char* k, const std::string& def) const {
    if (!has(k)) return def;
    if (!at(k).is_string()) fail("expected a string", k);
    return at(k).get<std::string>();
  }
  std::vector<double> numbers(const char* k, const std::vector<double>& def) const {
    if (!has(k)) return def;
    if (!at(k).is_array()) fail("expected an array of numbers", k);
    std::vector<double> v;
    for (const auto& e : at(k)) {
      if (!e.is_number()) fail("expected an array of numbers", k);
      v.push_back(e.get<double>());
    }
    return v;
  }
  Point point(const char* k, const Point& def, int dim) const {
    if (!has(k)) return def;
    auto v = numbers(k, {});
    if (static_cast<int>(v.size()) < dim || v.size() > 3) fail("expected " + std::to_string(dim) + " coordinates", k);
    Point p{};
    for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i];
    return p;
  }

 private:
  const Json& j_;
  std::string path_;
  const Locator& loc_;
};

InclusionSpec read_inclusion(const Reader& parent, const char* key, const Locator& loc, int dim,
                             const InclusionSpec& def) {
  Reader r(parent.at(key), parent.child(key), loc);
  r.allow({"x0", "radial_coeffs"});
  InclusionSpec s = def;
  s.x0 = r.point("x0", def.x0, dim);
  s.radial_coeffs = r.numbers("radial_coeffs", def.radial_coeffs);
  if (s.radial_coeffs.empty()) r.fail("needs at least one coefficient", "radial_coeffs");
  return s;
}

Json point_json(const Point& p, int dim) {
  Json a = Json::array();
  for (int k = 0; k < dim; ++k) a.push_back(p[k]);
  return a;
}

}  // namespace

ExperimentConfig default_config(const std::string& kind) {
  if (!kKinds.count(kind)) throw ConfigError("unknown experiment kind '" + kind + "'");
  ExperimentConfig c;
  c.kind = kind;
  c.output = "out/" + kind;
  c.inclusion.x0 = {0.5, 0.5, 0.5};
  c.inclusion.radial_coeffs = {0.25, 0.0, 0.0, 0.0, 0.0, 0.03, 0.0};
  if (kind == "forward") {
    c.resolution = 64;
    c.smoothing_width = 0.05;
  } else if (kind == "observe") {
    c.resolution = 64;
    c.samples = 20;
    c.contrasts = {0.9};
    c.inclusion.radial_coeffs = {0.2, 0.0, 0.0, 0.03, 0.0};
  } else if (kind == "control") {
    c.resolution = 64;
    c.inclusion.radial_coeffs = {0.2};
  } else if (kind == "represent") {
    c.shape = "rectangle";
    c.resolution = 64;
    c.probes = 10;
    c.inclusion.radial_coeffs = {0.2, 0.0, 0.0, 0.02, 0.0};
    c.second_inclusion = InclusionSpec{{0.52, 0.49, 0.5}, {0.17, 0.0, 0.0, 0.0, 0.0, 0.03, 0.0}};
  } else if (kind == "invert") {
    c.resolution = 128;
    c.inclusion.radial_coeffs = {0.25, 0.0, 0.0};
    c.guess_coeffs = {0.2, 0.0, 0.0};
    c.max_iter = 100;
  } else if (kind == "scan") {
    c.resolution = 128;
    c.pairs = 25;
    c.contrasts = {0.9};
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& kind,
                              const std::string& source_name) {
  Locator loc{text, source_name};
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::string msg = e.what();
    throw ConfigError(source_name + ":" + loc.position(e.byte > 0 ? e.byte - 1 : 0) +
                      ": malformed JSON (" + msg.substr(msg.find(':') + 2) + ")");
  }
  Reader top(j, "", loc);
  top.allow({"experiment", "seed", "output", "geometry", "optics", "solver"});

  std::string k = kind;
  if (top.has("experiment")) {
    Reader e(top.at("experiment"), "experiment", loc);
    std::string declared = e.string("kind", kind);
    if (!kKinds.count(declared)) e.fail("unknown experiment kind '" + declared + "'", "kind");
    if (!kind.empty() && declared != kind)
      e.fail("config declares '" + declared + "' but the subcommand is '" + kind + "'", "kind");
    k = declared;
  }
  if (k.empty()) throw ConfigError(source_name + ": experiment.kind: required key missing");
  ExperimentConfig c = default_config(k);

  if (top.has("seed")) {
    if (!top.at("seed").is_number_unsigned()) top.fail("expected a nonnegative integer", "seed");
    c.seed = top.at("seed").get<std::uint64_t>();
  }
  c.output = top.string("output", c.output);

  top.require("geometry");
  {
    Reader g(top.at("geometry"), "geometry", loc);
    g.allow({"dim", "domain", "a", "inclusion", "second_inclusion", "smoothing_width"});
    c.dim = static_cast<int>(g.integer("dim", c.dim));
    if (c.dim != 2 && c.dim != 3) g.fail("must be 2 or 3", "dim");
    g.require("a");
    c.a = g.number("a", c.a);
    if (!(c.a > 0.5 && c.a <= 1.0)) g.fail("contrast must lie in (1/2, 1]", "a");
    c.smoothing_width = g.number("smoothing_width", c.smoothing_width);
    g.require("domain");
    Reader d(g.at("domain"), "geometry.domain", loc);
    d.allow({"shape", "center", "radius", "lo", "hi"});
    d.require("shape");
    c.shape = d.string("shape", c.shape);
    if (c.shape == "disk") {
      c.center = d.point("center", c.center, c.dim);
      c.radius = d.positive("radius", c.radius);
    } else if (c.shape == "rectangle") {
      c.lo = d.point("lo", c.lo, c.dim);
      c.hi = d.point("hi", c.hi, c.dim);
      for (int a = 0; a < c.dim; ++a)
        if (!(c.hi[a] > c.lo[a])) d.fail("hi must exceed lo componentwise", "hi");
    } else {
      d.fail("shape must be \"disk\" or \"rectangle\"", "shape");
    }
    if (g.has("inclusion")) c.inclusion = read_inclusion(g, "inclusion", loc, c.dim, c.inclusion);
    if (g.has("second_inclusion"))
      c.second_inclusion = read_inclusion(g, "second_inclusion", loc, c.dim,
                                          c.second_inclusion.value_or(c.inclusion));
  }
  if (top.has("optics")) {
    Reader o(top.at("optics"), "optics", loc);
    o.allow({"D_out", "D_in", "mu_out", "mu_in", "grueneisen", "illumination", "beta", "M"});
    auto& op = c.optics;
    op.D_out = o.positive("D_out", op.D_out);
    op.D_in = o.positive("D_in", op.D_in);
    op.mu_out = o.number("mu_out", op.mu_out);
    op.mu_in = o.number("mu_in", op.mu_in);
    op.grueneisen = o.number("grueneisen", op.grueneisen);
    op.illumination = o.number("illumination", op.illumination);
    op.beta = o.positive("beta", op.beta);
    op.M = o.positive("M", op.M);
    if (op.mu_out < 0.0 || op.mu_in < 0.0) o.fail("absorption must be nonnegative", "mu_in");
  }
  if (top.has("solver")) {
    Reader s(top.at("solver"), "solver", loc);
    s.allow({"resolution", "cfl_factor", "T"});
    c.resolution = static_cast<int>(s.integer("resolution", c.resolution));
    if (c.resolution < 4) s.fail("must be at least 4", "resolution");
    c.cfl_factor = s.positive("cfl_factor", c.cfl_factor);
    if (s.has("T")) c.T = s.positive("T", 1.0);
  }
  if (top.has("experiment")) {
    Reader e(top.at("experiment"), "experiment", loc);
    e.allow({"kind", "samples", "contrasts", "eccentricities", "T_factors", "with_source", "ratio_bound",
             "tol", "max_iter", "allow_degenerate", "probes", "residual_tol", "guess", "gamma", "pairs"});
    c.samples = static_cast<int>(e.integer("samples", c.samples));
    if (c.samples < 1) e.fail("must be positive", "samples");
    c.contrasts = e.numbers("contrasts", c.contrasts);
    for (double a : c.contrasts)
      if (!(a > 0.5 && a <= 1.0)) e.fail("contrasts must lie in (1/2, 1]", "contrasts");
    c.eccentricities = e.numbers("eccentricities", c.eccentricities);
    c.T_factors = e.numbers("T_factors", c.T_factors);
    c.with_source = e.boolean("with_source", c.with_source);
    if (e.has("ratio_bound")) c.ratio_bound = e.positive("ratio_bound", 1.0);
    c.tol = e.positive("tol", c.tol);
    c.max_iter = static_cast<int>(e.integer("max_iter", c.max_iter));
    c.allow_degenerate = e.boolean("allow_degenerate", c.allow_degenerate);
    c.probes = static_cast<int>(e.integer("probes", c.probes));
    c.residual_tol = e.positive("residual_tol", c.residual_tol);
    c.guess_coeffs = e.numbers("guess", c.guess_coeffs);
    if (e.has("gamma") && e.at("gamma").is_string()) {
      if (e.at("gamma").get<std::string>() != "auto") e.fail("expected a nonnegative number or \"auto\"", "gamma");
      c.gamma = -1.0;
    } else if (e.has("gamma")) {
      c.gamma = e.number("gamma", c.gamma);
      if (c.gamma < 0.0) e.fail("must be nonnegative or \"auto\"", "gamma");
    }
    c.pairs = static_cast<int>(e.integer("pairs", c.pairs));
    if (c.pairs < 1) e.fail("must be positive", "pairs");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), kind, path.string());
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["experiment"]["kind"] = kind;
  j["seed"] = seed;
  j["output"] = output;
  auto& g = j["geometry"];
  g["dim"] = dim;
  g["a"] = a;
  g["smoothing_width"] = smoothing_width;
  g["domain"]["shape"] = shape;
  if (shape == "disk") {
    g["domain"]["center"] = point_json(center, dim);
    g["domain"]["radius"] = radius;
  } else {
    g["domain"]["lo"] = point_json(lo, dim);
    g["domain"]["hi"] = point_json(hi, dim);
  }
  g["inclusion"]["x0"] = point_json(inclusion.x0, dim);
  g["inclusion"]["radial_coeffs"] = inclusion.radial_coeffs;
  if (second_inclusion) {
    g["second_inclusion"]["x0"] = point_json(second_inclusion->x0, dim);
    g["second_inclusion"]["radial_coeffs"] = second_inclusion->radial_coeffs;
  }
  auto& o = j["optics"];
  o["D_out"] = optics.D_out;
  o["D_in"] = optics.D_in;
  o["mu_out"] = optics.mu_out;
  o["mu_in"] = optics.mu_in;
  o["grueneisen"] = optics.grueneisen;
  o["illumination"] = optics.illumination;
  o["beta"] = optics.beta;
  o["M"] = optics.M;
  auto& s = j["solver"];
  s["resolution"] = resolution;
  s["cfl_factor"] = cfl_factor;
  if (T) s["T"] = *T;
  auto& e = j["experiment"];
  if (kind == "observe") {
    e["samples"] = samples;
    e["contrasts"] = contrasts;
    e["eccentricities"] = eccentricities;
    e["T_factors"] = T_factors;
    e["with_source"] = with_source;
    if (ratio_bound) e["ratio_bound"] = *ratio_bound;
  } else if (kind == "control") {
    e["tol"] = tol;
    e["max_iter"] = max_iter;
    e["allow_degenerate"] = allow_degenerate;
  } else if (kind == "represent") {
    e["probes"] = probes;
    e["residual_tol"] = residual_tol;
    e["tol"] = tol;
    e["max_iter"] = max_iter;
  } else if (kind == "invert") {
    e["guess"] = guess_coeffs;
    if (gamma < 0.0) {
      e["gamma"] = "auto";
    } else {
      e["gamma"] = gamma;
    }
    e["max_iter"] = max_iter;
  } else if (kind == "scan") {
    e["pairs"] = pairs;
    e["contrasts"] = contrasts;
  }
  return j;
}

std::string ExperimentConfig::hash() const {
  Json j = to_json();
  j.erase("output");
  return sha256_hex(j.dump());
}

namespace {
Point truncated(Point p, int dim) {
  for (int k = dim; k < 3; ++k) p[k] = 0.0;
  return p;
}
}  // namespace

Domain ExperimentConfig::make_domain() const {
  if (shape == "disk") return Domain::disk(truncated(center, dim), radius, dim, resolution);
  return Domain::rectangle(truncated(lo, dim), truncated(hi, dim), dim, resolution);
}

Point ExperimentConfig::x0() const { return truncated(inclusion.x0, dim); }

StarInclusion ExperimentConfig::make_inclusion(const InclusionSpec& spec) const {
  return StarInclusion(dim, truncated(spec.x0, dim), spec.radial_coeffs, smoothing_width);
}

double ExperimentConfig::final_time(const Domain& domain) const {
  return T ? *T : 4.0 * domain.diameter();
}

}  // namespace paikit
