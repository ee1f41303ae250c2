#include "difcast/matrix_io.hpp"

#include "difcast/errors.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>

namespace difcast {

namespace {

constexpr std::array<char, 4> kMagic{'D', 'F', 'M', '1'};
constexpr std::uint32_t kVersion = 1;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

void write_dfm(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t rows = static_cast<std::uint64_t>(matrix.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(matrix.cols());
  os.write(kMagic.data(), 4);
  os.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  os.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  os.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  const RowMajor data = matrix;
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!os) throw IoError("write failed for " + path.string());
}

Eigen::MatrixXd read_dfm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  if (!is.read(magic.data(), 4) || magic != kMagic) throw IoError(path.string() + " is not a DFM1 file");
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  is.read(reinterpret_cast<char*>(&rows), sizeof rows);
  is.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!is) throw IoError("truncated header in " + path.string());
  if (version != kVersion) throw IoError("unsupported DFM1 version " + std::to_string(version));
  RowMajor data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double))))
    throw IoError("truncated data in " + path.string());
  return data;
}

std::filesystem::path metadata_path(const std::filesystem::path& matrix_path) {
  return matrix_path.string() + ".meta";
}

void write_metadata(const std::filesystem::path& matrix_path, const Metadata& meta) {
  std::ofstream os(metadata_path(matrix_path));
  if (!os) throw IoError("cannot write metadata for " + matrix_path.string());
  for (const auto& [key, value] : meta) os << key << '=' << value << '\n';
}

Metadata read_metadata(const std::filesystem::path& matrix_path) {
  std::ifstream is(metadata_path(matrix_path));
  if (!is) throw IoError("missing metadata " + metadata_path(matrix_path).string());
  Metadata meta;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed metadata line: " + line);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw IoError("cannot parse number '" + text + "'");
  return v;
}

const std::string& require(const Metadata& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw IoError("metadata key '" + key + "' missing");
  return it->second;
}

}  // namespace difcast
