// gmmdecomp command-line front end.
//
// Exit codes: 0 success, 1 computation error (bad values, degenerate input),
// 2 usage error, 3 I/O error, 4 mode-distance bound violated.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "gmmdecomp/analysis.hpp"
#include "gmmdecomp/bridge.hpp"
#include "gmmdecomp/eval.hpp"
#include "gmmdecomp/greedy.hpp"
#include "gmmdecomp/io.hpp"
#include "gmmdecomp/linalg.hpp"
#include "gmmdecomp/presets.hpp"
#include "gmmdecomp/rng.hpp"

namespace fs = std::filesystem;
using namespace gmmdecomp;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitBound = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path sibling_with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p.parent_path() / (p.stem().string() + suffix);
  out += p.extension();
  return out;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Grid grid_option(const std::string& spec) {
  try {
    return parse_grid_spec(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
}

presets::Preset preset_option(const std::string& name) {
  try {
    return presets::by_name(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// Box around the means, four largest sigmas wide, about 2e5 nodes at most.
Grid auto_search_grid(const Gmm& gmm) {
  const int n = gmm.dim();
  double reach = 0.0;
  Vec lo = gmm[0].mean(), hi = gmm[0].mean();
  for (const auto& c : gmm) {
    reach = std::max(reach, symmetric_eigenvalues(c.sigma()).maxCoeff());
    lo = lo.cwiseMin(c.mean());
    hi = hi.cwiseMax(c.mean());
  }
  lo.array() -= 4.0 * reach;
  hi.array() += 4.0 * reach;
  const Index per_axis = n == 1 ? 4001 : n == 2 ? 401 : 61;
  const Vec spacing = (hi - lo) / static_cast<double>(per_axis - 1);
  return Grid(lo, spacing, std::vector<Index>(static_cast<Index>(n), per_axis));
}

struct SynthArgs {
  std::string gmm_file;
  std::string preset;
  std::string grid;
  std::optional<double> snr;
  std::optional<double> noise_sigma;
  std::uint64_t seed = 0;
  std::string out;
  std::string clean_out;
};

int run_synth(const SynthArgs& a) {
  if (a.snr && a.noise_sigma) throw UsageError("--snr and --noise-sigma are mutually exclusive");
  if (!a.snr && !a.noise_sigma) throw UsageError("one of --snr or --noise-sigma is required");
  if (a.gmm_file.empty() == a.preset.empty()) {
    throw UsageError("give exactly one of a GMM file or --preset");
  }
  Gmm gmm;
  std::optional<Grid> grid;
  std::string source;
  if (!a.preset.empty()) {
    auto p = preset_option(a.preset);
    gmm = p.gmm;
    grid = p.grid;
    source = "preset " + a.preset;
  } else {
    gmm = read_gmm(a.gmm_file);
    source = "gmm " + fs::path(a.gmm_file).filename().string();
  }
  if (!a.grid.empty()) grid = grid_option(a.grid);
  if (!grid) throw UsageError("--grid is required with a GMM file");

  const Signal clean = rasterize(gmm, *grid);
  SignalProvenance prov;
  prov.source = source;
  prov.seed = a.seed;
  prov.rng = std::string(NormalStream::kAlgorithm);
  double sigma = 0.0;
  if (a.snr) {
    sigma = noise_sigma_for_snr(clean, *a.snr);
    prov.snr_db = *a.snr;
  } else {
    sigma = *a.noise_sigma;
    if (population_variance(clean.values()) > 0.0 && sigma > 0.0) {
      prov.snr_db = snr_of_noise(clean, sigma).snr_db;
    }
  }
  prov.noise_sigma = sigma;
  const Signal noisy = add_white_noise(clean, sigma, a.seed);

  const fs::path out(a.out);
  const fs::path clean_out = a.clean_out.empty() ? sibling_with_suffix(out, ".clean")
                                                 : fs::path(a.clean_out);
  SignalProvenance clean_prov = prov;
  clean_prov.source = source + " (clean)";
  write_signal(clean_out, clean, clean_prov);
  write_signal(out, noisy, prov);
  std::cout << "noise_sigma " << format_double(sigma) << "\n";
  return 0;
}

struct DecomposeArgs {
  std::string signal;
  std::string out;
  std::string trace;
  Index tau1 = 10;
  Index tau2 = 20;
  double snr_stop = 20.0;
  Index max_components = 50;
  std::uint64_t seed = 0;
};

int run_decompose(const DecomposeArgs& a) {
  const SignalFile in = read_signal(a.signal);
  DecompositionConfig cfg;
  cfg.tau1 = a.tau1;
  cfg.tau2 = a.tau2;
  cfg.snr_stop_target = a.snr_stop;
  cfg.max_components = a.max_components;
  cfg.seed = a.seed;
  const DecompositionResult result = decompose(in.signal, cfg);
  write_gmm(a.out, result.gmm, in.signal.grid().dim());
  if (!a.trace.empty()) write_json(a.trace, trace_to_json(result));
  const double snr = result.trace.empty() ? 0.0 : result.trace.back().snr_stop;
  std::cout << "components " << result.gmm.size() << " stop_reason "
            << to_string(result.stop_reason) << " snr_stop_db " << format_double(snr)
            << " wall_time_s " << format_double(result.wall_time_s) << "\n";
  return 0;
}

struct ModesArgs {
  std::string gmm;
  std::string grid;
  std::string out;
};

int run_modes(const ModesArgs& a) {
  const Gmm gmm = read_gmm(a.gmm);
  if (gmm.empty()) throw std::invalid_argument("mode search needs a non-empty GMM");
  const Grid grid = a.grid.empty() ? auto_search_grid(gmm) : grid_option(a.grid);
  const ModeSearch search = find_modes(gmm, grid);

  json report;
  report["format"] = "gmmdecomp-modes";
  report["search_grid"] = format_grid_spec(grid);
  report["dropped_seeds"] = search.dropped_seeds;
  json modes = json::array();
  double worst = 0.0;
  Index violations = 0;
  for (const auto& m : search.modes) {
    const BoundCertificate c = certify_bound(gmm, m);
    worst = std::max(worst, c.ratio);
    if (c.ratio > 1.0 + 1e-6) ++violations;
    modes.push_back({{"location", vec_json(m.location)},
                     {"value", m.value},
                     {"gradient_norm", m.gradient_norm},
                     {"hessian_eigenvalue_min", m.min_hessian_eigenvalue},
                     {"hessian_eigenvalue_max", m.max_hessian_eigenvalue},
                     {"component", c.component},
                     {"distance", c.distance},
                     {"bound", c.bound},
                     {"ratio", c.ratio}});
  }
  report["modes"] = std::move(modes);
  report["max_ratio"] = worst;
  report["violations"] = violations;
  if (a.out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json(a.out, report);
    std::cout << "modes " << search.modes.size() << " max_ratio " << format_double(worst)
              << "\n";
  }
  if (violations > 0) {
    std::cerr << "gmmdecomp: " << violations << " mode(s) violate the distance bound\n";
    return kExitBound;
  }
  return 0;
}

struct BridgeArgs {
  std::string input;
  std::string out;
  std::string grid;
  Index target_count = 100000;
  Index k = 1;
  std::uint64_t seed = 0;
  int restarts = 1;
};

int run_pc2sig(const BridgeArgs& a) {
  if (a.grid.empty()) throw UsageError("pc2sig needs --grid");
  const Grid grid = grid_option(a.grid);
  const PointCloud pts = read_points_csv(a.input, grid.dim());
  const Histogram h = histogram(pts, grid);
  SignalProvenance prov;
  prov.source = "histogram of " + fs::path(a.input).filename().string();
  write_signal(a.out, h.counts, prov);
  std::cout << "points " << pts.size() << " dropped " << h.dropped << "\n";
  return 0;
}

int run_sig2pc(const BridgeArgs& a) {
  const SignalFile in = read_signal(a.input);
  const PointCloud pts = signal_to_points(in.signal, a.target_count);
  write_points_csv(a.out, pts);
  std::cout << "points " << pts.size() << "\n";
  return 0;
}

int run_em(const BridgeArgs& a) {
  const PointCloud pts = read_points_csv(a.input);
  EmConfig cfg;
  cfg.k = a.k;
  cfg.seed = a.seed;
  cfg.restarts = a.restarts;
  const EmResult r = em_fit(pts, cfg);
  json doc = gmm_to_json(r.gmm, pts.dim());
  doc["log_likelihood"] = r.log_likelihood;
  doc["points"] = pts.size();
  write_json(a.out, doc);
  std::cout << "log_likelihood " << format_double(r.log_likelihood) << "\n";
  return 0;
}

struct PlotArgs {
  std::string signal;
  std::string clean;
  std::string gmm;
  std::string out;
};

int run_plotdata(const PlotArgs& a) {
  const SignalFile d = read_signal(a.signal);
  const Grid& grid = d.signal.grid();
  if (grid.dim() > 2) throw std::invalid_argument("plot data supports 1D and 2D signals");
  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  write_signal(dir / "d.csv", d.signal, d.provenance);
  if (!a.clean.empty()) {
    const SignalFile clean = read_signal(a.clean);
    if (!clean.signal.grid().same_lattice(grid)) {
      throw std::invalid_argument("clean signal lives on a different grid");
    }
    write_signal(dir / "d_clean.csv", clean.signal, clean.provenance);
  }
  if (!a.gmm.empty()) {
    const Gmm gmm = read_gmm(a.gmm);
    if (!gmm.empty() && gmm.dim() != grid.dim()) {
      throw std::invalid_argument("GMM dimension differs from the signal grid");
    }
    const Signal est = rasterize(gmm, grid);
    SignalProvenance prov;
    prov.source = "rasterized GMM";
    write_signal(dir / "d_est.csv", est, prov);
    prov.source = "d - d_est";
    write_signal(dir / "residual.csv", Signal(grid, d.signal.values() - est.values()), prov);
  }
  return 0;
}

int run_preset(const std::string& name, const std::string& out) {
  const auto p = preset_option(name);
  write_gmm(out, p.gmm, p.grid.dim());
  std::cout << "grid " << format_grid_spec(p.grid) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Gaussian mixture decomposition of sampled signals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gmmdecomp 1.0");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "rasterize a GMM and add seeded white noise");
  synth_cmd->add_option("gmm", synth.gmm_file, "GMM file");
  synth_cmd->add_option("--preset", synth.preset, "built-in input (exp1, exp2, exp3)");
  synth_cmd->add_option("--grid", synth.grid, "origin:spacing:count per axis, comma separated");
  synth_cmd->add_option("--snr", synth.snr, "target SNR in dB");
  synth_cmd->add_option("--noise-sigma", synth.noise_sigma, "noise standard deviation");
  synth_cmd->add_option("--seed", synth.seed, "noise seed");
  synth_cmd->add_option("--out,-o", synth.out, "noisy signal file")->required();
  synth_cmd->add_option("--clean-out", synth.clean_out, "clean signal file");

  DecomposeArgs dec;
  auto* dec_cmd = app.add_subcommand("decompose", "greedy GMM decomposition of a signal");
  dec_cmd->add_option("signal", dec.signal, "signal file")->required();
  dec_cmd->add_option("--out,-o", dec.out, "output GMM file")->required();
  dec_cmd->add_option("--trace", dec.trace, "per-iteration trace (JSON)");
  dec_cmd->add_option("--tau1", dec.tau1, "smoothing neighbourhood size");
  dec_cmd->add_option("--tau2", dec.tau2, "moment neighbourhood size");
  dec_cmd->add_option("--snr-stop", dec.snr_stop, "stop once SNR_stop reaches this (dB)");
  dec_cmd->add_option("--max-components", dec.max_components, "component cap");
  dec_cmd->add_option("--seed", dec.seed, "recorded in the trace");

  ModesArgs modes;
  auto* modes_cmd = app.add_subcommand("modes", "locate modes and certify the distance bound");
  modes_cmd->add_option("gmm", modes.gmm, "GMM file")->required();
  modes_cmd->add_option("--grid", modes.grid, "search grid (default: box around the means)");
  modes_cmd->add_option("--out,-o", modes.out, "report file (default: stdout)");

  BridgeArgs bridge;
  auto* bridge_cmd = app.add_subcommand("bridge", "point-cloud / signal conversions and EM");
  bridge_cmd->require_subcommand(1);
  auto* pc2sig = bridge_cmd->add_subcommand("pc2sig", "histogram a point cloud on a grid");
  pc2sig->add_option("points", bridge.input, "point CSV")->required();
  pc2sig->add_option("--grid", bridge.grid, "histogram grid");
  pc2sig->add_option("--out,-o", bridge.out, "signal file")->required();
  auto* sig2pc = bridge_cmd->add_subcommand("sig2pc", "expand a signal into a point cloud");
  sig2pc->add_option("signal", bridge.input, "signal file")->required();
  sig2pc->add_option("--target-count", bridge.target_count, "approximate point count");
  sig2pc->add_option("--out,-o", bridge.out, "point CSV")->required();
  auto* em = bridge_cmd->add_subcommand("em", "fit a normalized GMM by EM");
  em->add_option("points", bridge.input, "point CSV")->required();
  em->add_option("--k", bridge.k, "component count");
  em->add_option("--seed", bridge.seed, "initialization seed");
  em->add_option("--restarts", bridge.restarts, "independent initializations");
  em->add_option("--out,-o", bridge.out, "GMM file")->required();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plotdata", "write CSV grids for external plotting");
  plot_cmd->add_option("--signal", plot.signal, "noisy signal d")->required();
  plot_cmd->add_option("--clean", plot.clean, "clean signal");
  plot_cmd->add_option("--gmm", plot.gmm, "decomposition result");
  plot_cmd->add_option("--out,-o", plot.out, "output directory")->required();

  std::string preset_name, preset_out;
  auto* preset_cmd = app.add_subcommand("preset", "write a built-in input GMM");
  preset_cmd->add_option("name", preset_name, "exp1, exp2 or exp3")->required();
  preset_cmd->add_option("--out,-o", preset_out, "GMM file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*dec_cmd) return run_decompose(dec);
    if (*modes_cmd) return run_modes(modes);
    if (*pc2sig) return run_pc2sig(bridge);
    if (*sig2pc) return run_sig2pc(bridge);
    if (*em) return run_em(bridge);
    if (*plot_cmd) return run_plotdata(plot);
    if (*preset_cmd) return run_preset(preset_name, preset_out);
  } catch (const UsageError& e) {
    std::cerr << "gmmdecomp: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "gmmdecomp: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "gmmdecomp: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
