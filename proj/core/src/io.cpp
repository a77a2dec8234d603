#include "paikit/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "paikit/error.hpp"

namespace paikit {

namespace {

std::string to_hex(const unsigned char* d, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(digits[d[i] >> 4]);
    s.push_back(digits[d[i] & 15]);
  }
  return s;
}

struct Sha256 {
  EVP_MD_CTX* ctx;
  Sha256() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256 initialisation failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx); }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx, p, n); }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    return to_hex(md, len);
  }
};

std::vector<unsigned char> le_bytes(std::span<const double> values) {
  std::vector<unsigned char> out(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[8 * i + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.finish();
}

std::string sha256_hex(std::string_view text) {
  Sha256 h;
  h.update(text.data(), text.size());
  return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

std::string write_f64_array(const std::filesystem::path& path, std::span<const double> values,
                            const std::vector<std::size_t>& shape, const Json& meta) {
  std::size_t count = 1;
  for (auto s : shape) count *= s;
  if (count != values.size()) throw PreconditionError("array shape does not match its length");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto bytes = le_bytes(values);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }
  std::string digest = sha256_hex(bytes);
  Json side;
  side["file"] = path.filename().string();
  side["dtype"] = "float64";
  side["byte_order"] = "little";
  side["layout"] = "row-major";
  side["shape"] = shape;
  side["sha256"] = digest;
  side["meta"] = meta;
  write_json(std::filesystem::path(path.string() + ".json"), side);
  return digest;
}

std::vector<double> read_f64_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  if (bytes.size() % 8 != 0) throw std::runtime_error("truncated float64 array " + path.string());
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[8 * i + b]) << (8 * b);
    v[i] = std::bit_cast<double>(u);
  }
  return v;
}

namespace {

Json points_json(const std::vector<Point>& pts, int dim) {
  Json a = Json::array();
  for (const auto& p : pts) {
    Json q = Json::array();
    for (int k = 0; k < dim; ++k) q.push_back(p[k]);
    a.push_back(q);
  }
  return a;
}

}  // namespace

std::vector<std::filesystem::path> write_trace(const std::filesystem::path& stem,
                                               const BoundaryTrace& tr, const Json& meta) {
  Json m = meta;
  m["kind"] = "boundary_trace";
  m["dt"] = tr.dt;
  m["T"] = tr.T();
  m["n_steps"] = tr.n_steps;
  m["n_points"] = tr.n_points;
  m["weights"] = tr.weights;
  m["positions"] = points_json(tr.positions, tr.dim);
  m["normals"] = points_json(tr.normals, tr.dim);
  std::vector<std::size_t> shape{static_cast<std::size_t>(tr.n_steps + 1), tr.n_points};
  std::filesystem::path a = stem.string() + ".bin", b = stem.string() + "_dt.bin";
  m["quantity"] = "p";
  write_f64_array(a, tr.values, shape, m);
  m["quantity"] = "dp/dt";
  write_f64_array(b, tr.dvalues, shape, m);
  return {a, std::filesystem::path(a.string() + ".json"), b, std::filesystem::path(b.string() + ".json")};
}

std::vector<std::filesystem::path> write_normal_trace(const std::filesystem::path& stem,
                                                      const NormalTrace& tr, const Json& meta) {
  Json m = meta;
  m["kind"] = "normal_trace";
  m["dt"] = tr.dt;
  m["T"] = tr.dt * tr.n_steps;
  m["n_steps"] = tr.n_steps;
  m["n_faces"] = tr.n_faces;
  m["weights"] = tr.weights;
  std::filesystem::path a = stem.string() + ".bin";
  write_f64_array(a, tr.values, {static_cast<std::size_t>(tr.n_steps + 1), tr.n_faces}, m);
  return {a, std::filesystem::path(a.string() + ".json")};
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

CsvWriter& CsvWriter::row() {
  rows_.emplace_back();
  return *this;
}

CsvWriter& CsvWriter::add(double v) { return add(format_number(v)); }

CsvWriter& CsvWriter::add(long v) { return add(std::to_string(v)); }

CsvWriter& CsvWriter::add(const std::string& v) {
  if (rows_.empty()) rows_.emplace_back();
  bool quote = v.find_first_of(",\"\n") != std::string::npos;
  if (!quote) {
    rows_.back().push_back(v);
  } else {
    std::string q = "\"";
    for (char c : v) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    rows_.back().push_back(q + "\"");
  }
  return *this;
}

std::string CsvWriter::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
  os << '\n';
  for (const auto& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
  return os.str();
}

void CsvWriter::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << str();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return Json::parse(in);
}

}  // namespace paikit
