#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "gmmdecomp/core.hpp"
#include "gmmdecomp/greedy.hpp"

namespace gmmdecomp {

/// Unreadable, missing or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SignalProvenance {
  std::string source;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db;
  std::optional<double> noise_sigma;
  std::string rng;  // generator identifier when noise was drawn
};

struct SignalFile {
  Signal signal;
  SignalProvenance provenance;
};

/// Files ending in ".csv" use the single-file CSV layout (1D: coordinate,value
/// rows; 2D: counts[0] rows of counts[1] values), with the grid in a '#'
/// comment line. Anything else is a JSON header plus an adjacent ".raw" block
/// of little-endian float64 samples in flat-index order.
void write_signal(const std::filesystem::path& path, const Signal& s,
                  const SignalProvenance& provenance = {});
SignalFile read_signal(const std::filesystem::path& path);

/// Location of the raw sample block belonging to a JSON signal header.
std::filesystem::path raw_path_for(const std::filesystem::path& header);

nlohmann::json gmm_to_json(const Gmm& gmm, int dim);
/// Accepts "sigma" or "covariance" per component.
Gmm gmm_from_json(const nlohmann::json& doc);
void write_gmm(const std::filesystem::path& path, const Gmm& gmm, int dim);
Gmm read_gmm(const std::filesystem::path& path);

nlohmann::json trace_to_json(const DecompositionResult& result);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// One point per row, comma separated; lines starting with '#' are skipped.
void write_points_csv(const std::filesystem::path& path, const PointCloud& points);
/// `dim` is required only to read a file without any points.
PointCloud read_points_csv(const std::filesystem::path& path,
                           std::optional<int> dim = std::nullopt);

/// "origin:spacing:count" per axis, axes separated by ','.
Grid parse_grid_spec(const std::string& spec);
std::string format_grid_spec(const Grid& grid);

/// Shortest decimal that reads back to the same double; "inf", "-inf", "nan"
/// for non-finite values.
std::string format_double(double v);

}  // namespace gmmdecomp
