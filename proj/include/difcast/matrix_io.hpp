#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>

namespace difcast {

//! Key/value sidecar stored next to a matrix file as "<path>.meta".
using Metadata = std::map<std::string, std::string>;

// DFM1: "DFM1" + u32 version + u64 rows + u64 cols + row-major little-endian f64.
void write_dfm(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_dfm(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& matrix_path);
void write_metadata(const std::filesystem::path& matrix_path, const Metadata& meta);
Metadata read_metadata(const std::filesystem::path& matrix_path);

//! Shortest round-trip decimal form with '.' as separator.
std::string format_double(double v);
//! Parses a whole string as a double, throwing IoError otherwise.
double parse_double(const std::string& text);

//! Looks up a required key, throwing IoError when missing.
const std::string& require(const Metadata& meta, const std::string& key);

}  // namespace difcast
