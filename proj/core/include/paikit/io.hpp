#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paikit/third_party/json.hpp"
#include "paikit/wave_dirichlet.hpp"
#include "paikit/wave_forward.hpp"

namespace paikit {

using Json = nlohmann::ordered_json;

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

/// Header-free little-endian float64 array plus `<path>.json` sidecar with
/// shape, layout and the caller's metadata. Returns the array digest.
std::string write_f64_array(const std::filesystem::path& path, std::span<const double> values,
                            const std::vector<std::size_t>& shape, const Json& meta);
std::vector<double> read_f64_array(const std::filesystem::path& path);

/// Boundary trace as a (n_steps + 1) x n_points array; values and time
/// derivatives go to `<stem>.bin` and `<stem>_dt.bin`.
std::vector<std::filesystem::path> write_trace(const std::filesystem::path& stem,
                                               const BoundaryTrace& trace, const Json& meta);
std::vector<std::filesystem::path> write_normal_trace(const std::filesystem::path& stem,
                                                      const NormalTrace& trace, const Json& meta);

/// Minimal CSV writer; numbers are printed with %.10e so reruns compare
/// bit-identically at the printed precision.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvWriter& row();
  CsvWriter& add(double v);
  CsvWriter& add(long v);
  CsvWriter& add(int v) { return add(static_cast<long>(v)); }
  CsvWriter& add(std::size_t v) { return add(static_cast<long>(v)); }
  CsvWriter& add(bool v) { return add(std::string(v ? "true" : "false")); }
  CsvWriter& add(const std::string& v);
  CsvWriter& add(const char* v) { return add(std::string(v)); }

  std::string str() const;
  void save(const std::filesystem::path& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string format_number(double v);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

}  // namespace paikit
