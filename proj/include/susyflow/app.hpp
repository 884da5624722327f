#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "susyflow/checks.hpp"
#include "susyflow/config.hpp"
#include "susyflow/dynamics.hpp"
#include "susyflow/fpoperator.hpp"
#include "susyflow/gtomap.hpp"
#include "susyflow/spectral.hpp"
#include "susyflow/topoanalysis.hpp"

#ifndef SUSYFLOW_VERSION
#define SUSYFLOW_VERSION "0.1.0"
#endif

namespace susyflow {

inline constexpr const char* version() { return SUSYFLOW_VERSION; }

enum ExitCode : int { ExitOk = 0, ExitCheckFailed = 1, ExitConfig = 2, ExitNumerical = 3 };

struct RunOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

class Experiment {
 public:
  Experiment(ExperimentConfig cfg, const RunOptions& ro) : cfg_(std::move(cfg)), threads_(ro.threads) {
    if (ro.seed) cfg_.seed = *ro.seed;
    if (ro.out_dir) cfg_.output.directory = *ro.out_dir;
    std::filesystem::create_directories(cfg_.output.directory);
  }

  const ExperimentConfig& config() const { return cfg_; }
  bool is_map() const { return cfg_.system.kind == "map"; }
  bool want(const std::string& fmt) const {
    return std::find(cfg_.output.formats.begin(), cfg_.output.formats.end(), fmt) != cfg_.output.formats.end();
  }

  std::filesystem::path path(const std::string& name) const { return std::filesystem::path(cfg_.output.directory) / name; }

  /// CSV files carry the resolved config as '#' comment lines.
  std::ofstream open_csv(const std::string& name) const {
    std::ofstream os(path(name));
    os << "# susyflow " << version() << '\n';
    std::istringstream yaml(to_yaml(cfg_));
    for (std::string line; std::getline(yaml, line);) os << "# " << line << '\n';
    return os;
  }

  nlohmann::json header() const { return {{"version", version()}, {"config", to_yaml(cfg_)}}; }

  void write_json(const std::string& name, nlohmann::json body) const {
    body["reproducibility"] = header();
    std::ofstream os(path(name));
    os << body.dump(2) << '\n';
  }

  // -- flows ---------------------------------------------------------------

  FPHamiltonian hamiltonian() const { return assemble_H(config_mesh(cfg_), config_flow(cfg_)); }

  bool use_dense(const FPHamiltonian& hf) const {
    if (cfg_.solver.method == "dense") return true;
    if (cfg_.solver.method == "krylov") return false;
    for (int k = 0; k <= hf.dim(); ++k)
      if (hf.block(k).rows() > cfg_.solver.dense_cap) return false;
    return true;
  }

  SpectrumReport flow_spectrum(const FPHamiltonian& hf, BfSummary* bf) const {
    SpectrumReport rep;
    if (use_dense(hf)) {
      DenseEigOptions o;
      o.cap = cfg_.solver.dense_cap;
      o.tol_eig = cfg_.solver.tol_eig;
      rep = dense_spectrum(hf, o, cfg_.system.id);
    } else {
      KrylovEigOptions o;
      o.count = cfg_.solver.krylov_m;
      o.subspace = cfg_.solver.krylov_subspace;
      o.tau = cfg_.solver.tau;
      o.residual_tol = cfg_.solver.krylov_residual;
      o.seed = static_cast<unsigned>(cfg_.seed + 7);
      rep = krylov_spectrum(hf, o, cfg_.system.id);
    }
    BfOptions bo;
    bo.tol_zero_rel = cfg_.solver.tol_zero;
    bo.tol_pair_rel = cfg_.solver.tol_pair;
    const BfSummary s = pair_bf(rep, hf.d, hf.j, bo);
    if (bf) *bf = s;
    return rep;
  }

  // -- maps ----------------------------------------------------------------

  GtoOperator gto() const { return build_gto(config_map(cfg_), cfg_.system.K); }

  GtoSpectrum map_spectrum(const GtoOperator& g) const {
    DenseEigOptions o;
    o.cap = cfg_.solver.dense_cap;
    o.tol_eig = cfg_.solver.tol_eig;
    o.compute_left = false;
    KrylovEigOptions k;
    k.count = cfg_.solver.krylov_m;
    k.subspace = cfg_.solver.krylov_subspace;
    k.residual_tol = cfg_.solver.krylov_residual;
    return gto_spectrum(g, o, k, cfg_.system.id);
  }

  std::vector<int> z_range() const {
    std::vector<int> ns;
    for (int n = cfg_.analysis.z_n_min; n <= cfg_.analysis.z_n_max; ++n) ns.push_back(n);
    return ns;
  }

  int threads() const { return threads_; }

 private:
  ExperimentConfig cfg_;
  int threads_ = 1;
};

inline nlohmann::json bf_json(const BfSummary& s) {
  return {{"paired", s.paired},
          {"unpaired", s.unpaired},
          {"d_symmetric", s.d_symmetric},
          {"multiplicity_mismatches", s.multiplicity_mismatches},
          {"diagnostics", s.diagnostics}};
}

inline nlohmann::json sectors_json(const SpectrumReport& rep) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : rep.sectors)
    out.push_back({{"sector", s.sector},
                   {"dimension", s.dimension},
                   {"method", s.method},
                   {"complete", s.complete},
                   {"defective", s.defective},
                   {"eigenvector_rank", s.eigenvector_rank},
                   {"norm_estimate", s.norm_estimate},
                   {"iterations", s.iterations}});
  return out;
}

inline int cmd_spectrum(Experiment& ex, std::ostream& log) {
  if (ex.is_map()) {
    const GtoOperator g = ex.gto();
    const GtoSpectrum s = ex.map_spectrum(g);
    if (ex.want("csv")) {
      auto os = ex.open_csv("spectrum.csv");
      write_spectrum_csv(os, s.report);
      auto mm = ex.open_csv("mode_map.csv");
      write_mode_map_csv(mm, g);
    }
    if (ex.want("json")) {
      nlohmann::json dims = nlohmann::json::array();
      for (int k = 0; k <= g.dim(); ++k) dims.push_back(g.block(k).rows());
      ex.write_json("operator_stats.json", {{"kind", "gto"},
                                            {"K", g.K},
                                            {"sector_dimensions", dims},
                                            {"dropped_modes", g.dropped_modes},
                                            {"supertrace", {gto_supertrace(g).real(), gto_supertrace(g).imag()}},
                                            {"spectral_radius", s.spectral_radius},
                                            {"radius_sector", s.radius_sector},
                                            {"sectors", sectors_json(s.report)}});
    }
    log << "spectral radius " << s.spectral_radius << " in sector " << s.radius_sector << '\n';
    return ExitOk;
  }
  const FPHamiltonian hf = ex.hamiltonian();
  BfSummary bf;
  const SpectrumReport rep = ex.flow_spectrum(hf, &bf);
  if (ex.want("csv")) {
    auto os = ex.open_csv("spectrum.csv");
    write_spectrum_csv(os, rep);
  }
  if (ex.want("json")) {
    nlohmann::json stats = operator_stats_json(hf);
    stats["kind"] = "fokker_planck";
    stats["spectra"] = sectors_json(rep);
    stats["bf_pairing"] = bf_json(bf);
    ex.write_json("operator_stats.json", stats);
  }
  log << rep.entries.size() << " eigenvalues, " << bf.unpaired << " unpaired\n";
  return ExitOk;
}

inline int cmd_classify(Experiment& ex, std::ostream& log) {
  const auto& cfg = ex.config();
  nlohmann::json extra;
  ChaosReport cr;
  if (ex.is_map()) {
    const GtoOperator g = ex.gto();
    const GtoSpectrum s = ex.map_spectrum(g);
    ClassifyOptions co{cfg.solver.tol_class, cfg.solver.tol_zero};
    cr = classify_map(s, co);
    cr.witten.push_back({1.0, gto_supertrace(g)});
    if (cfg.analysis.cross_check) {
      const MapSpec m = config_map(cfg);
      const LyapunovResult ly = lyapunov_map(m, 2000, 50, 10);
      cr.lyapunov1 = ly.exponents.front();
      const int n = cfg.analysis.z_n_max;
      cr.orbit_rate = std::log(static_cast<double>(fixed_point_count(m, n))) / n;
      extra["lyapunov_exponents"] = ly.exponents;
    }
    extra["spectral_radius"] = s.spectral_radius;
    extra["dropped_modes"] = g.dropped_modes;
  } else {
    const FPHamiltonian hf = ex.hamiltonian();
    BfSummary bf;
    const SpectrumReport rep = ex.flow_spectrum(hf, &bf);
    ClassifyOptions co{cfg.solver.tol_class, cfg.solver.tol_zero};
    cr = classify(rep, co);
    if (rep.all_complete()) {
      cr.witten = witten_index(rep, cfg.analysis.t_samples);
      if (!cr.susy_broken) {
        try {
          const GroundDensity gd = ground_density(hf.mesh, rep, cfg.solver.tol_zero);
          nlohmann::json ex_obs = nlohmann::json::object();
          for (const auto& o : cfg.analysis.observables) ex_obs[o] = expectation(FieldExpr::parse(o), gd.density);
          extra["ground_density"] = {{"sector", gd.sector},
                                     {"negativity", gd.negativity},
                                     {"imaginary_residue", gd.imaginary_residue},
                                     {"degenerate", gd.degenerate},
                                     {"expectations", ex_obs}};
          if (ex.want("csv")) {
            auto os = ex.open_csv("ground_density.csv");
            write_form_csv(os, gd.density);
          }
        } catch (const Error& e) {
          if (!is_numerical_failure(e.code())) throw;
          cr.anomalies.push_back(std::string("ground density: ") + e.what());
        }
      }
    }
    extra["bf_pairing"] = bf_json(bf);
    if (cfg.analysis.cross_check) {
      LyapunovConfig lc;
      lc.traj.flow = hf.flow;
      lc.traj.dt = cfg.analysis.lyapunov.dt;
      lc.traj.steps = cfg.analysis.lyapunov.steps;
      lc.traj.ensemble = cfg.analysis.lyapunov.ensemble;
      lc.traj.seed = cfg.seed;
      lc.traj.threads = ex.threads();
      lc.windows = cfg.analysis.lyapunov.windows;
      const LyapunovResult ly = lyapunov_spectrum(lc);
      cr.lyapunov1 = ly.exponents.front();
      extra["lyapunov_exponents"] = ly.exponents;
      extra["lyapunov_std_errors"] = ly.std_errors;
      const bool chaotic = ly.exponents.front() > 2.0 * ly.std_errors.front();
      extra["consistent_with_lyapunov"] = chaotic == cr.susy_broken;
      log << "lambda_1 = " << ly.exponents.front() << " +- " << ly.std_errors.front()
          << (chaotic == cr.susy_broken ? " (consistent with" : " (INCONSISTENT with") << " susy_broken = "
          << (cr.susy_broken ? "true" : "false") << ")\n";
    }
  }
  nlohmann::json j = chaos_report_json(cr);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  ex.write_json("chaos_report.json", j);
  log << "gamma_g = " << cr.gamma_g << ", susy_broken = " << (cr.susy_broken ? "true" : "false") << '\n';
  return ExitOk;
}

inline int cmd_witten(Experiment& ex, std::ostream& log) {
  const auto& cfg = ex.config();
  nlohmann::json body;
  PartitionResult z;
  if (ex.is_map()) {
    const GtoOperator g = ex.gto();
    z = map_partition_function(g, ex.z_range());
    body["supertrace"] = {{"re", gto_supertrace(g).real()}, {"im", gto_supertrace(g).imag()}};
  } else {
    const FPHamiltonian hf = ex.hamiltonian();
    if (!ex.use_dense(hf)) throw Error(ErrorCode::IncompleteSpectrum, "Witten index needs the dense path");
    const SpectrumReport rep = ex.flow_spectrum(hf, nullptr);
    const auto w = witten_index(rep, cfg.analysis.t_samples);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : w) arr.push_back({{"t", s.t}, {"re", s.value.real()}, {"im", s.value.imag()}});
    body["witten_index"] = arr;
    body["t_variation"] = witten_variation(w);
    z = partition_function(rep, cfg.analysis.z_t);
  }
  body["partition_log_slope"] = z.log_slope;
  if (ex.want("csv")) {
    auto os = ex.open_csv("partition.csv");
    os << (ex.is_map() ? "n" : "t") << ",Z\n";
    os.precision(17);
    for (std::size_t i = 0; i < z.t.size(); ++i) os << z.t[i] << ',' << z.z[i] << '\n';
  }
  ex.write_json("witten.json", body);
  log << "partition log-slope " << z.log_slope << '\n';
  return ExitOk;
}

inline int cmd_simulate(Experiment& ex, std::ostream& log) {
  const auto& cfg = ex.config();
  if (ex.is_map()) throw Error(ErrorCode::ConfigError, "key 'system.kind': simulate needs a flow system");
  const TrajectoryConfig tc = config_trajectory(cfg, ex.threads());
  std::vector<FieldExpr> obs;
  for (const auto& o : cfg.analysis.observables) obs.push_back(FieldExpr::parse(o));
  const EnsembleStats st = sample_stationary(tc, cfg.analysis.simulate.bins, obs.empty() ? nullptr : &obs.front());
  TrajectoryConfig first = tc;
  first.ensemble = 1;
  const auto traj = integrate_sde(first);
  if (ex.want("csv")) {
    auto h = ex.open_csv("histogram.csv");
    write_histogram_csv(h, st.histogram);
    auto t = ex.open_csv("trajectory.csv");
    write_trajectory_csv(t, traj.front(), tc.flow.dim());
  }
  nlohmann::json body{{"samples", st.samples}, {"seed", cfg.seed}};
  if (!obs.empty()) body["observable"] = {{"expr", cfg.analysis.observables.front()}, {"mean", st.mean}, {"std_error", st.std_error}};
  ex.write_json("simulate.json", body);
  log << st.samples << " post-burn-in samples (seed " << cfg.seed << ")\n";
  return ExitOk;
}

inline int cmd_orbits(Experiment& ex, std::ostream& log) {
  if (!ex.is_map()) throw Error(ErrorCode::ConfigError, "key 'system.kind': orbits needs a map system");
  const MapSpec m = config_map(ex.config());
  nlohmann::json rows = nlohmann::json::array();
  std::optional<std::ofstream> os;
  if (ex.want("csv")) {
    os.emplace(ex.open_csv("orbits.csv"));
    *os << "n,count,enumerated\n";
  }
  for (int n : ex.z_range()) {
    const long long c = fixed_point_count(m, n);
    long long e = -1;
    if (n <= 3) e = static_cast<long long>(enumerate_fixed_points(m, n).size());
    if (os) *os << n << ',' << c << ',' << e << '\n';
    rows.push_back({{"n", n}, {"count", c}, {"enumerated", e}});
    log << "n=" << n << " fixed points " << c << '\n';
    if (e >= 0 && e != c) throw Error(ErrorCode::NonConvergence, "enumeration disagrees with |det(A^n - I)|");
  }
  ex.write_json("orbits.json", {{"counts", rows}});
  return ExitOk;
}

inline int cmd_check(CheckLevel level, std::optional<SignFlip> flip, std::ostream& out) {
  CheckOptions o;
  o.level = level;
  o.flip = flip;
  const auto rows = run_checks(o);
  print_check_table(out, rows);
  const bool ok = all_passed(rows);
  out << (ok ? "all invariants hold\n" : "invariant violations detected\n");
  return ok ? ExitOk : ExitCheckFailed;
}

/// Runs one config-driven command, mapping errors onto the exit-code contract.
template <class Fn>
int run_guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numerical_failure(e.code()) ? ExitNumerical : ExitConfig;
  } catch (const YAML::Exception& e) {
    err << "error: ConfigError: " << e.what() << '\n';
    return ExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return ExitConfig;
  }
}

inline std::optional<SignFlip> parse_mutation(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  std::istringstream is(spec);
  std::string op, mask, axis;
  if (!std::getline(is, op, ':') || !std::getline(is, mask, ':') || !std::getline(is, axis))
    throw Error(ErrorCode::ConfigError, "mutation must be op:mask:axis");
  SignFlip f;
  if (op == "d")
    f.op = OpTag::D;
  else if (op == "iota")
    f.op = OpTag::Interior;
  else
    throw Error(ErrorCode::ConfigError, "mutation op must be 'd' or 'iota'");
  try {
    f.mask = static_cast<GhostMask>(std::stoul(mask));
    f.axis = std::stoi(axis);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "mutation mask/axis must be integers");
  }
  return f;
}

}  // namespace susyflow
