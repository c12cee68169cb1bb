#include "gmmdecomp/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

namespace gmmdecomp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSignalFormat = "gmmdecomp-signal";
constexpr const char* kGmmFormat = "gmmdecomp-gmm";
constexpr const char* kTraceFormat = "gmmdecomp-trace";

bool is_csv(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".csv";
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw IoError("cannot parse " + what + " from '" + text + "'");
  }
  return v;
}

Index parse_count(const std::string& text, const std::string& what) {
  unsigned long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw IoError("cannot parse " + what + " from '" + text + "'");
  }
  return static_cast<Index>(v);
}

std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(p, mode);
  if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(p, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& p) {
  out.flush();
  if (!out) throw IoError("failed writing '" + p.string() + "'");
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

// Non-finite values are not representable as JSON numbers.
json number(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

Vec json_vec(const json& a, const std::string& what) {
  if (!a.is_array()) throw IoError(what + " must be an array");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw IoError(what + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

Mat json_mat(const json& rows, Eigen::Index n, const std::string& what) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n) {
    throw IoError(what + " must have " + std::to_string(n) + " rows");
  }
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec r = json_vec(rows[static_cast<std::size_t>(i)], what);
    if (r.size() != n) throw IoError(what + " must be square");
    m.row(i) = r.transpose();
  }
  return m;
}

void check_format(const json& doc, const char* format, const fs::path& p) {
  if (!doc.is_object() || doc.value("format", std::string()) != format) {
    throw IoError("'" + p.string() + "' is not a " + format + " document");
  }
}

json provenance_json(const SignalProvenance& p) {
  json doc = json::object();
  doc["source"] = p.source;
  if (p.seed) doc["seed"] = *p.seed;
  if (p.snr_db) doc["snr_db"] = number(*p.snr_db);
  if (p.noise_sigma) doc["noise_sigma"] = number(*p.noise_sigma);
  if (!p.rng.empty()) doc["rng"] = p.rng;
  return doc;
}

SignalProvenance provenance_from_json(const json& doc) {
  SignalProvenance p;
  if (!doc.is_object()) return p;
  p.source = doc.value("source", std::string());
  if (doc.contains("seed")) p.seed = doc["seed"].get<std::uint64_t>();
  auto real = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key)) return std::nullopt;
    const json& v = doc[key];
    return v.is_string() ? parse_double(v.get<std::string>(), key) : v.get<double>();
  };
  p.snr_db = real("snr_db");
  p.noise_sigma = real("noise_sigma");
  p.rng = doc.value("rng", std::string());
  return p;
}

void write_raw(const fs::path& p, const Vec& values) {
  auto out = open_out(p, std::ios::binary);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  finish(out, p);
}

Vec read_raw(const fs::path& p, Index count) {
  auto in = open_in(p, std::ios::binary);
  std::vector<unsigned char> bytes(count * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<Index>(in.gcount()) != bytes.size() || in.peek() != EOF) {
    throw IoError("'" + p.string() + "' does not hold exactly " + std::to_string(count) +
                  " float64 samples");
  }
  Vec v(static_cast<Eigen::Index>(count));
  for (Index i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[i * 8 + static_cast<Index>(b)]} << (8 * b);
    v[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(bits);
  }
  return v;
}

Grid grid_from_header(const json& doc) {
  const Vec origin = json_vec(doc.at("origin"), "origin");
  const Vec spacing = json_vec(doc.at("spacing"), "spacing");
  std::vector<Index> counts;
  for (const auto& c : doc.at("counts")) counts.push_back(c.get<Index>());
  if (doc.contains("dim") && doc["dim"].get<int>() != static_cast<int>(counts.size())) {
    throw IoError("signal header: dim disagrees with counts");
  }
  return Grid(origin, spacing, counts);
}

void write_signal_csv(const fs::path& p, const Signal& s, const SignalProvenance& prov) {
  const Grid& g = s.grid();
  if (g.dim() > 2) throw IoError("CSV signals support 1 or 2 dimensions");
  auto out = open_out(p);
  out << "# " << kSignalFormat << '\n';
  out << "# grid " << format_grid_spec(g) << '\n';
  if (!prov.source.empty()) out << "# source " << prov.source << '\n';
  if (g.dim() == 1) {
    for (Index i = 0; i < s.size(); ++i) {
      out << format_double(g.coordinate(0, i)) << ',' << format_double(s[i]) << '\n';
    }
  } else {
    const Index cols = g.counts()[1];
    for (Index r = 0; r < g.counts()[0]; ++r) {
      for (Index c = 0; c < cols; ++c) {
        if (c) out << ',';
        out << format_double(s[r * cols + c]);
      }
      out << '\n';
    }
  }
  finish(out, p);
}

SignalFile read_signal_csv(const fs::path& p) {
  auto in = open_in(p);
  std::optional<Grid> grid;
  SignalProvenance prov;
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string body = trim(std::string_view(t).substr(1));
      if (body.rfind("grid ", 0) == 0) {
        try {
          grid = parse_grid_spec(trim(std::string_view(body).substr(5)));
        } catch (const std::invalid_argument& e) {
          throw IoError("'" + p.string() + "': bad grid line: " + e.what());
        }
      } else if (body.rfind("source ", 0) == 0) {
        prov.source = trim(std::string_view(body).substr(7));
      }
      continue;
    }
    if (!grid) throw IoError("'" + p.string() + "': missing '# grid' header line");
    const auto fields = split(t, ',');
    if (grid->dim() == 1) {
      if (fields.size() != 2) throw IoError("'" + p.string() + "': expected coordinate,value rows");
      values.push_back(parse_double(fields[1], "sample"));
    } else {
      if (fields.size() != grid->counts()[1]) {
        throw IoError("'" + p.string() + "': row length differs from grid counts");
      }
      for (const auto& f : fields) values.push_back(parse_double(f, "sample"));
    }
  }
  if (!grid) throw IoError("'" + p.string() + "': missing '# grid' header line");
  if (values.size() != grid->size()) {
    throw IoError("'" + p.string() + "': sample count " + std::to_string(values.size()) +
                  " does not match grid size " + std::to_string(grid->size()));
  }
  Vec v = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
  try {
    return {Signal(*grid, std::move(v)), prov};
  } catch (const std::invalid_argument& e) {
    throw IoError("'" + p.string() + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

fs::path raw_path_for(const fs::path& header) {
  fs::path raw = header;
  if (raw.extension() == ".json") {
    raw.replace_extension(".raw");
  } else {
    raw += ".raw";
  }
  return raw;
}

void write_signal(const fs::path& path, const Signal& s, const SignalProvenance& provenance) {
  if (is_csv(path)) {
    write_signal_csv(path, s, provenance);
    return;
  }
  const Grid& g = s.grid();
  const fs::path raw = raw_path_for(path);
  json doc;
  doc["format"] = kSignalFormat;
  doc["version"] = 1;
  doc["dim"] = g.dim();
  doc["counts"] = g.counts();
  doc["origin"] = vec_json(g.origin());
  doc["spacing"] = vec_json(g.spacing());
  doc["data"] = raw.filename().string();
  doc["encoding"] = "float64-le";
  doc["order"] = "row-major, axis 0 slowest";
  doc["provenance"] = provenance_json(provenance);
  write_raw(raw, s.values());
  write_json(path, doc);
}

SignalFile read_signal(const fs::path& path) {
  if (is_csv(path)) return read_signal_csv(path);
  const json doc = read_json(path);
  check_format(doc, kSignalFormat, path);
  try {
    if (doc.value("encoding", std::string("float64-le")) != "float64-le") {
      throw IoError("unsupported sample encoding");
    }
    Grid grid = grid_from_header(doc);
    const fs::path raw = path.parent_path() / doc.at("data").get<std::string>();
    Vec values = read_raw(raw, grid.size());
    SignalProvenance prov =
        provenance_from_json(doc.contains("provenance") ? doc["provenance"] : json());
    return {Signal(std::move(grid), std::move(values)), std::move(prov)};
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

json gmm_to_json(const Gmm& gmm, int dim) {
  if (!gmm.empty() && gmm.dim() != dim) {
    throw std::invalid_argument("gmm_to_json: dimension mismatch");
  }
  json doc;
  doc["format"] = kGmmFormat;
  doc["version"] = 1;
  doc["dim"] = dim;
  json comps = json::array();
  for (const auto& c : gmm) {
    comps.push_back({{"weight", c.weight()},
                     {"mean", vec_json(c.mean())},
                     {"sigma", mat_json(c.sigma())}});
  }
  doc["components"] = std::move(comps);
  return doc;
}

Gmm gmm_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("components")) {
    throw IoError("gmm document needs a 'components' array");
  }
  try {
    Gmm gmm;
    const auto& comps = doc.at("components");
    if (!comps.is_array()) throw IoError("'components' must be an array");
    for (const auto& c : comps) {
      const double w = c.at("weight").get<double>();
      const Vec mean = json_vec(c.at("mean"), "mean");
      if (doc.contains("dim") && doc["dim"].get<int>() != mean.size()) {
        throw IoError("component mean does not match dim");
      }
      if (c.contains("sigma")) {
        gmm.push_back(GaussianComponent(w, mean, json_mat(c["sigma"], mean.size(), "sigma")));
      } else if (c.contains("covariance")) {
        gmm.push_back(GaussianComponent::from_covariance(
            w, mean, json_mat(c["covariance"], mean.size(), "covariance")));
      } else {
        throw IoError("component needs 'sigma' or 'covariance'");
      }
    }
    return gmm;
  } catch (const json::exception& e) {
    throw IoError(std::string("gmm document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("gmm document: ") + e.what());
  }
}

void write_gmm(const fs::path& path, const Gmm& gmm, int dim) {
  write_json(path, gmm_to_json(gmm, dim));
}

Gmm read_gmm(const fs::path& path) {
  const json doc = read_json(path);
  try {
    return gmm_from_json(doc);
  } catch (const IoError& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

json trace_to_json(const DecompositionResult& result) {
  json doc;
  doc["format"] = kTraceFormat;
  doc["version"] = 1;
  doc["seed"] = result.seed;
  doc["stop_reason"] = to_string(result.stop_reason);
  doc["components"] = result.gmm.size();
  doc["wall_time_s"] = result.wall_time_s;
  json its = json::array();
  for (const auto& r : result.trace) {
    json it;
    it["iteration"] = r.iteration;
    it["seed_index"] = r.seed_index;
    it["x0"] = vec_json(r.x0);
    it["sigma0"] = mat_json(r.sigma0);
    it["a0"] = r.a0;
    it["residual_before"] = r.residual_before;
    it["residual_l2_sq"] = r.residual_after;
    it["snr_stop_db"] = number(r.snr_stop);
    it["component_count"] = r.component_count;
    it["single_status"] = to_string(r.single_status);
    it["joint_status"] = to_string(r.joint_status);
    it["single_iterations"] = r.single_iterations;
    it["joint_iterations"] = r.joint_iterations;
    it["joint_evaluations"] = r.joint_evaluations;
    it["wall_time_s"] = r.wall_time_s;
    its.push_back(std::move(it));
  }
  doc["iterations"] = std::move(its);
  return doc;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

void write_points_csv(const fs::path& path, const PointCloud& points) {
  auto out = open_out(path);
  out << "# points dim=" << points.dim() << " count=" << points.size() << '\n';
  const Mat& m = points.points();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  finish(out, path);
}

PointCloud read_points_csv(const fs::path& path, std::optional<int> dim) {
  auto in = open_in(path);
  std::vector<double> flat;
  int n = dim.value_or(0);
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(t, ',');
    if (n == 0) n = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != n) {
      throw IoError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected " +
                    std::to_string(n) + " fields");
    }
    for (const auto& f : fields) flat.push_back(parse_double(f, "coordinate"));
  }
  if (n == 0) throw IoError("'" + path.string() + "': no points and no dimension given");
  const auto count = static_cast<Eigen::Index>(flat.size()) / n;
  Mat pts = Eigen::Map<const Mat>(flat.data(), n, count);
  try {
    return PointCloud(n, std::move(pts));
  } catch (const std::invalid_argument& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

Grid parse_grid_spec(const std::string& spec) {
  const auto axes = split(spec, ',');
  const auto n = static_cast<Eigen::Index>(axes.size());
  Vec origin(n), spacing(n);
  std::vector<Index> counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto parts = split(axes[static_cast<std::size_t>(i)], ':');
    if (parts.size() != 3) {
      throw std::invalid_argument("grid axis '" + axes[static_cast<std::size_t>(i)] +
                                  "' is not origin:spacing:count");
    }
    try {
      origin[i] = parse_double(parts[0], "grid origin");
      spacing[i] = parse_double(parts[1], "grid spacing");
      counts.push_back(parse_count(parts[2], "grid count"));
    } catch (const IoError& e) {
      throw std::invalid_argument(e.what());
    }
  }
  return Grid(origin, spacing, counts);
}

std::string format_grid_spec(const Grid& grid) {
  std::string out;
  for (int i = 0; i < grid.dim(); ++i) {
    if (i) out += ',';
    out += format_double(grid.origin()[i]) + ':' + format_double(grid.spacing()[i]) + ':' +
           std::to_string(grid.counts()[static_cast<Index>(i)]);
  }
  return out;
}

}  // namespace gmmdecomp
