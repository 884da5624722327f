#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "susyflow/dynamics.hpp"
#include "susyflow/error.hpp"
#include "susyflow/gtomap.hpp"
#include "susyflow/mesh.hpp"
#include "susyflow/vfparse.hpp"

namespace susyflow {

struct FlowBlock {
  std::string builtin;  ///< empty when components are given
  std::map<std::string, double> params;
  std::vector<std::string> components;
  double temperature = 0.0;
  std::vector<double> vielbein;
};

struct MapBlock {
  std::string builtin;
  std::vector<std::vector<long long>> A;
  std::vector<double> b;
  double temperature = 0.0;
};

struct MeshBlock {
  int D = 1;
  std::vector<int> n{64};
  int stencil_order = 4;
};

struct SystemBlock {
  std::string id;
  std::string kind = "flow";
  std::optional<FlowBlock> flow;
  std::optional<MapBlock> map;
  MeshBlock mesh;
  int K = 8;
};

struct SolverBlock {
  std::string method = "auto";  ///< auto | dense | krylov
  long dense_cap = 3000;
  int krylov_m = 6;
  int krylov_subspace = 40;
  double tau = 0.0;  ///< 0 = auto
  double tol_eig = 1e-8;
  double tol_zero = 1e-6;
  double tol_pair = 1e-6;
  double tol_class = 1e-6;
  double krylov_residual = 1e-6;
};

struct SimulateBlock {
  double dt = 1e-3;
  long steps = 100000;
  int ensemble = 1;
  long burn_in = -1;  ///< -1 = 10% of steps
  long record_every = 100;
  int bins = 50;
};

struct LyapunovBlock {
  double dt = 1e-2;
  long steps = 20000;
  int ensemble = 4;
  int windows = 10;
};

struct AnalysisBlock {
  std::vector<double> t_samples{0.1, 1.0, 10.0};
  std::vector<double> z_t{1.0, 2.0, 4.0, 8.0, 16.0};
  int z_n_min = 1;
  int z_n_max = 8;
  std::vector<std::string> observables;
  bool cross_check = false;
  SimulateBlock simulate;
  LyapunovBlock lyapunov;
};

struct OutputBlock {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct ExperimentConfig {
  SystemBlock system;
  SolverBlock solver;
  AnalysisBlock analysis;
  OutputBlock output;
  std::uint64_t seed = 0;
  std::map<std::string, int> lines;  ///< key path -> 1-based source line (not serialized)
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(ExperimentConfig& cfg) : cfg_(cfg) {}

  [[noreturn]] void fail(const std::string& key, const YAML::Node& node, const std::string& msg) const {
    const int line = node.IsDefined() && node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
    throw Error(ErrorCode::ConfigError, "key '" + key + "'" + (line > 0 ? " (line " + std::to_string(line) + ")" : "") +
                                            ": " + msg);
  }

  void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
    if (!node.IsMap()) fail(path, node, "expected a mapping");
    for (const auto& kv : node) {
      const std::string k = kv.first.as<std::string>();
      const std::string full = path.empty() ? k : path + "." + k;
      if (!allowed.count(k)) fail(full, kv.first, "unknown key");
      cfg_.lines[full] = kv.first.Mark().line + 1;
    }
  }

  template <class T>
  void get(const YAML::Node& parent, const std::string& path, const std::string& key, T& out) {
    const YAML::Node n = parent[key];
    if (!n.IsDefined() || n.IsNull()) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      fail(path + "." + key, n, "wrong type");
    }
  }

  void positive(const std::string& key, double v) {
    if (!(v > 0.0)) fail_line(key, "must be positive");
  }

  [[noreturn]] void fail_line(const std::string& key, const std::string& msg) const {
    auto it = cfg_.lines.find(key);
    throw Error(ErrorCode::ConfigError, "key '" + key + "'" +
                                            (it != cfg_.lines.end() ? " (line " + std::to_string(it->second) + ")" : "") +
                                            ": " + msg);
  }

  void read(const YAML::Node& root) {
    if (!root.IsMap()) throw Error(ErrorCode::ConfigError, "top level must be a mapping");
    check_keys(root, "", {"system", "solver", "analysis", "output", "seed"});
    if (!root["system"]) throw Error(ErrorCode::ConfigError, "key 'system': missing");
    read_system(root["system"]);
    if (root["solver"]) read_solver(root["solver"]);
    if (root["analysis"]) read_analysis(root["analysis"]);
    if (root["output"]) {
      const YAML::Node o = root["output"];
      check_keys(o, "output", {"directory", "formats"});
      get(o, "output", "directory", cfg_.output.directory);
      get(o, "output", "formats", cfg_.output.formats);
      for (const auto& f : cfg_.output.formats)
        if (f != "csv" && f != "json") fail_line("output.formats", "unknown format '" + f + "'");
    }
    get(root, "", "seed", cfg_.seed);
  }

  void read_system(const YAML::Node& s) {
    check_keys(s, "system", {"id", "kind", "flow", "map", "mesh", "gto"});
    SystemBlock& sys = cfg_.system;
    get(s, "system", "kind", sys.kind);
    get(s, "system", "id", sys.id);
    if (sys.kind != "flow" && sys.kind != "map") fail("system.kind", s["kind"], "must be 'flow' or 'map'");
    if (s["flow"] && s["map"]) fail("system", s, "exactly one of 'flow' or 'map' is allowed");
    if (sys.kind == "flow") {
      if (!s["flow"]) fail("system.flow", s, "missing for kind 'flow'");
      if (s["gto"]) fail("system.gto", s["gto"], "only valid for kind 'map'");
      FlowBlock f;
      const YAML::Node fn = s["flow"];
      check_keys(fn, "system.flow", {"builtin", "params", "components", "temperature", "vielbein"});
      get(fn, "system.flow", "builtin", f.builtin);
      get(fn, "system.flow", "params", f.params);
      get(fn, "system.flow", "components", f.components);
      get(fn, "system.flow", "temperature", f.temperature);
      get(fn, "system.flow", "vielbein", f.vielbein);
      if (f.builtin.empty() == f.components.empty())
        fail("system.flow", fn, "give exactly one of 'builtin' or 'components'");
      if (f.temperature < 0.0) fail("system.flow.temperature", fn["temperature"], "must be >= 0");
      sys.flow = f;
      if (!s["mesh"]) fail("system.mesh", s, "missing for kind 'flow'");
      const YAML::Node m = s["mesh"];
      check_keys(m, "system.mesh", {"D", "n", "stencil_order"});
      get(m, "system.mesh", "D", sys.mesh.D);
      get(m, "system.mesh", "n", sys.mesh.n);
      get(m, "system.mesh", "stencil_order", sys.mesh.stencil_order);
      if (!m["n"]) sys.mesh.n.assign(static_cast<std::size_t>(std::max(sys.mesh.D, 1)), 64);
    } else {
      if (!s["map"]) fail("system.map", s, "missing for kind 'map'");
      if (s["mesh"]) fail("system.mesh", s["mesh"], "only valid for kind 'flow'");
      MapBlock mp;
      const YAML::Node mn = s["map"];
      check_keys(mn, "system.map", {"builtin", "A", "b", "temperature"});
      get(mn, "system.map", "builtin", mp.builtin);
      get(mn, "system.map", "A", mp.A);
      get(mn, "system.map", "b", mp.b);
      get(mn, "system.map", "temperature", mp.temperature);
      if (mp.builtin.empty() == mp.A.empty()) fail("system.map", mn, "give exactly one of 'builtin' or 'A'");
      if (mp.temperature < 0.0) fail("system.map.temperature", mn["temperature"], "must be >= 0");
      sys.map = mp;
      if (s["gto"]) {
        check_keys(s["gto"], "system.gto", {"K"});
        get(s["gto"], "system.gto", "K", sys.K);
      }
    }
    if (sys.id.empty()) sys.id = sys.kind == "flow" ? (sys.flow->builtin.empty() ? "flow" : sys.flow->builtin)
                                                    : (sys.map->builtin.empty() ? "map" : sys.map->builtin);
  }

  void read_solver(const YAML::Node& s) {
    check_keys(s, "solver", {"method", "dense_cap", "krylov_m", "krylov_subspace", "tau", "tol_eig", "tol_zero",
                             "tol_pair", "tol_class", "krylov_residual"});
    SolverBlock& b = cfg_.solver;
    get(s, "solver", "method", b.method);
    if (b.method != "auto" && b.method != "dense" && b.method != "krylov")
      fail("solver.method", s["method"], "must be auto, dense or krylov");
    get(s, "solver", "dense_cap", b.dense_cap);
    get(s, "solver", "krylov_m", b.krylov_m);
    get(s, "solver", "krylov_subspace", b.krylov_subspace);
    if (s["tau"] && !s["tau"].IsNull()) {
      if (s["tau"].IsScalar() && s["tau"].as<std::string>() == "auto")
        b.tau = 0.0;
      else {
        get(s, "solver", "tau", b.tau);
        positive("solver.tau", b.tau);
      }
    }
    get(s, "solver", "tol_eig", b.tol_eig);
    get(s, "solver", "tol_zero", b.tol_zero);
    get(s, "solver", "tol_pair", b.tol_pair);
    get(s, "solver", "tol_class", b.tol_class);
    get(s, "solver", "krylov_residual", b.krylov_residual);
    for (auto [k, v] : {std::pair{"solver.tol_eig", b.tol_eig}, {"solver.tol_zero", b.tol_zero},
                        {"solver.tol_pair", b.tol_pair}, {"solver.tol_class", b.tol_class},
                        {"solver.krylov_residual", b.krylov_residual}})
      positive(k, v);
    if (b.dense_cap < 1) fail_line("solver.dense_cap", "must be >= 1");
    if (b.krylov_m < 1) fail_line("solver.krylov_m", "must be >= 1");
    if (b.krylov_subspace < b.krylov_m + 2) fail_line("solver.krylov_subspace", "must exceed krylov_m + 1");
  }

  void read_analysis(const YAML::Node& a) {
    check_keys(a, "analysis", {"t_samples", "z_t", "z_n", "observables", "cross_check", "simulate", "lyapunov"});
    AnalysisBlock& b = cfg_.analysis;
    get(a, "analysis", "t_samples", b.t_samples);
    get(a, "analysis", "z_t", b.z_t);
    if (a["z_n"]) {
      check_keys(a["z_n"], "analysis.z_n", {"min", "max"});
      get(a["z_n"], "analysis.z_n", "min", b.z_n_min);
      get(a["z_n"], "analysis.z_n", "max", b.z_n_max);
      if (b.z_n_min < 1 || b.z_n_max < b.z_n_min) fail("analysis.z_n", a["z_n"], "need 1 <= min <= max");
    }
    get(a, "analysis", "observables", b.observables);
    for (const auto& o : b.observables) {
      try {
        (void)FieldExpr::parse(o);
      } catch (const Error& e) {
        fail_line("analysis.observables", e.what());
      }
    }
    get(a, "analysis", "cross_check", b.cross_check);
    for (double t : b.t_samples)
      if (!(t >= 0.0)) fail_line("analysis.t_samples", "must be >= 0");
    for (double t : b.z_t)
      if (!(t >= 0.0)) fail_line("analysis.z_t", "must be >= 0");
    if (a["simulate"]) {
      const YAML::Node s = a["simulate"];
      check_keys(s, "analysis.simulate", {"dt", "steps", "ensemble", "burn_in", "record_every", "bins"});
      SimulateBlock& m = b.simulate;
      get(s, "analysis.simulate", "dt", m.dt);
      get(s, "analysis.simulate", "steps", m.steps);
      get(s, "analysis.simulate", "ensemble", m.ensemble);
      get(s, "analysis.simulate", "burn_in", m.burn_in);
      get(s, "analysis.simulate", "record_every", m.record_every);
      get(s, "analysis.simulate", "bins", m.bins);
      positive("analysis.simulate.dt", m.dt);
      if (m.steps < 1) fail_line("analysis.simulate.steps", "must be >= 1");
      if (m.ensemble < 1) fail_line("analysis.simulate.ensemble", "must be >= 1");
      if (m.record_every < 1) fail_line("analysis.simulate.record_every", "must be >= 1");
      if (m.bins < 2) fail_line("analysis.simulate.bins", "must be >= 2");
      if (m.burn_in > m.steps) fail_line("analysis.simulate.burn_in", "exceeds steps");
    }
    if (a["lyapunov"]) {
      const YAML::Node s = a["lyapunov"];
      check_keys(s, "analysis.lyapunov", {"dt", "steps", "ensemble", "windows"});
      LyapunovBlock& l = b.lyapunov;
      get(s, "analysis.lyapunov", "dt", l.dt);
      get(s, "analysis.lyapunov", "steps", l.steps);
      get(s, "analysis.lyapunov", "ensemble", l.ensemble);
      get(s, "analysis.lyapunov", "windows", l.windows);
      positive("analysis.lyapunov.dt", l.dt);
      if (l.steps < 1 || l.ensemble < 1 || l.windows < 1)
        fail("analysis.lyapunov", s, "steps, ensemble and windows must be >= 1");
    }
  }

 private:
  ExperimentConfig& cfg_;
};

}  // namespace detail

/// Builds the phase-space objects named by the config; domain errors are
/// re-raised with the offending key and line.
inline TorusMesh config_mesh(const ExperimentConfig& cfg) {
  const auto& m = cfg.system.mesh;
  try {
    if (static_cast<int>(m.n.size()) != m.D)
      throw Error(ErrorCode::DimensionMismatch, "n has " + std::to_string(m.n.size()) + " entries for D=" + std::to_string(m.D));
    return build_mesh(m.D, std::span<const int>(m.n), m.stencil_order);
  } catch (const Error& e) {
    auto it = cfg.lines.find("system.mesh");
    throw Error(e.code(), std::string("key 'system.mesh'") +
                              (it != cfg.lines.end() ? " (line " + std::to_string(it->second) + ")" : "") + ": " + e.detail());
  }
}

inline FlowSpec config_flow(const ExperimentConfig& cfg) {
  const FlowBlock& f = *cfg.system.flow;
  try {
    FlowSpec spec;
    if (!f.builtin.empty()) {
      auto params = f.params;
      params["T"] = f.temperature;
      if (f.builtin == "diffusion") params["D"] = cfg.system.mesh.D;
      spec = builtin_flow(f.builtin, params);
      if (!f.vielbein.empty()) spec.vielbein = f.vielbein;
    } else {
      spec = make_flow(cfg.system.id, f.components, f.temperature, f.vielbein);
    }
    spec.validate();
    if (spec.dim() != cfg.system.mesh.D)
      throw Error(ErrorCode::DimensionMismatch,
                  "flow has " + std::to_string(spec.dim()) + " components, mesh D=" + std::to_string(cfg.system.mesh.D));
    return spec;
  } catch (const Error& e) {
    auto it = cfg.lines.find("system.flow");
    throw Error(e.code(), std::string("key 'system.flow'") +
                              (it != cfg.lines.end() ? " (line " + std::to_string(it->second) + ")" : "") + ": " + e.detail());
  }
}

inline MapSpec config_map(const ExperimentConfig& cfg) {
  const MapBlock& m = *cfg.system.map;
  try {
    if (!m.builtin.empty()) {
      std::map<std::string, double> p{{"T", m.temperature}};
      MapSpec spec = builtin_map(m.builtin, p);
      if (!m.b.empty()) {
        if (static_cast<int>(m.b.size()) != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "b has wrong length");
        spec.b = Eigen::Map<const Eigen::VectorXd>(m.b.data(), static_cast<Eigen::Index>(m.b.size()));
      }
      spec.name = cfg.system.id;
      return spec;
    }
    const auto D = static_cast<Eigen::Index>(m.A.size());
    IntMatrix A(D, D);
    for (Eigen::Index i = 0; i < D; ++i) {
      if (static_cast<Eigen::Index>(m.A[static_cast<std::size_t>(i)].size()) != D)
        throw Error(ErrorCode::DimensionMismatch, "A must be square");
      for (Eigen::Index j = 0; j < D; ++j) A(i, j) = m.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(D);
    if (!m.b.empty()) {
      if (static_cast<Eigen::Index>(m.b.size()) != D) throw Error(ErrorCode::DimensionMismatch, "b has wrong length");
      for (Eigen::Index i = 0; i < D; ++i) b[i] = m.b[static_cast<std::size_t>(i)];
    }
    return make_map(cfg.system.id, A, b, m.temperature);
  } catch (const Error& e) {
    auto it = cfg.lines.find("system.map");
    throw Error(e.code(), std::string("key 'system.map'") +
                              (it != cfg.lines.end() ? " (line " + std::to_string(it->second) + ")" : "") + ": " + e.detail());
  }
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, "YAML parse error (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
  }
  detail::ConfigReader(cfg).read(root);
  if (cfg.system.kind == "flow") {
    (void)config_mesh(cfg);
    (void)config_flow(cfg);
  } else {
    (void)config_map(cfg);
    if (cfg.system.K < 1) throw Error(ErrorCode::TruncationTooSmall, "key 'system.gto.K': K=" + std::to_string(cfg.system.K));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Fully resolved config (every default explicit).
inline std::string to_yaml(const ExperimentConfig& cfg) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "id" << YAML::Value << cfg.system.id;
  e << YAML::Key << "kind" << YAML::Value << cfg.system.kind;
  if (cfg.system.kind == "flow") {
    const FlowBlock& f = *cfg.system.flow;
    e << YAML::Key << "flow" << YAML::Value << YAML::BeginMap;
    if (!f.builtin.empty()) {
      e << YAML::Key << "builtin" << YAML::Value << f.builtin;
      e << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
      for (const auto& [k, v] : f.params) e << YAML::Key << k << YAML::Value << v;
      e << YAML::EndMap;
    } else {
      e << YAML::Key << "components" << YAML::Value << YAML::Flow << f.components;
    }
    e << YAML::Key << "temperature" << YAML::Value << f.temperature;
    if (!f.vielbein.empty()) e << YAML::Key << "vielbein" << YAML::Value << YAML::Flow << f.vielbein;
    e << YAML::EndMap;
    e << YAML::Key << "mesh" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "D" << YAML::Value << cfg.system.mesh.D;
    e << YAML::Key << "n" << YAML::Value << YAML::Flow << cfg.system.mesh.n;
    e << YAML::Key << "stencil_order" << YAML::Value << cfg.system.mesh.stencil_order;
    e << YAML::EndMap;
  } else {
    const MapBlock& m = *cfg.system.map;
    e << YAML::Key << "map" << YAML::Value << YAML::BeginMap;
    if (!m.builtin.empty())
      e << YAML::Key << "builtin" << YAML::Value << m.builtin;
    else {
      e << YAML::Key << "A" << YAML::Value << YAML::BeginSeq;
      for (const auto& row : m.A) e << YAML::Flow << row;
      e << YAML::EndSeq;
    }
    if (!m.b.empty()) e << YAML::Key << "b" << YAML::Value << YAML::Flow << m.b;
    e << YAML::Key << "temperature" << YAML::Value << m.temperature;
    e << YAML::EndMap;
    e << YAML::Key << "gto" << YAML::Value << YAML::BeginMap << YAML::Key << "K" << YAML::Value << cfg.system.K
      << YAML::EndMap;
  }
  e << YAML::EndMap;

  const SolverBlock& s = cfg.solver;
  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "method" << YAML::Value << s.method;
  e << YAML::Key << "dense_cap" << YAML::Value << s.dense_cap;
  e << YAML::Key << "krylov_m" << YAML::Value << s.krylov_m;
  e << YAML::Key << "krylov_subspace" << YAML::Value << s.krylov_subspace;
  if (s.tau > 0.0)
    e << YAML::Key << "tau" << YAML::Value << s.tau;
  else
    e << YAML::Key << "tau" << YAML::Value << "auto";
  e << YAML::Key << "tol_eig" << YAML::Value << s.tol_eig;
  e << YAML::Key << "tol_zero" << YAML::Value << s.tol_zero;
  e << YAML::Key << "tol_pair" << YAML::Value << s.tol_pair;
  e << YAML::Key << "tol_class" << YAML::Value << s.tol_class;
  e << YAML::Key << "krylov_residual" << YAML::Value << s.krylov_residual;
  e << YAML::EndMap;

  const AnalysisBlock& a = cfg.analysis;
  e << YAML::Key << "analysis" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "t_samples" << YAML::Value << YAML::Flow << a.t_samples;
  e << YAML::Key << "z_t" << YAML::Value << YAML::Flow << a.z_t;
  e << YAML::Key << "z_n" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "min" << YAML::Value
    << a.z_n_min << YAML::Key << "max" << YAML::Value << a.z_n_max << YAML::EndMap;
  e << YAML::Key << "observables" << YAML::Value << YAML::Flow << a.observables;
  e << YAML::Key << "cross_check" << YAML::Value << a.cross_check;
  e << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dt" << YAML::Value << a.simulate.dt;
  e << YAML::Key << "steps" << YAML::Value << a.simulate.steps;
  e << YAML::Key << "ensemble" << YAML::Value << a.simulate.ensemble;
  e << YAML::Key << "burn_in" << YAML::Value << a.simulate.burn_in;
  e << YAML::Key << "record_every" << YAML::Value << a.simulate.record_every;
  e << YAML::Key << "bins" << YAML::Value << a.simulate.bins;
  e << YAML::EndMap;
  e << YAML::Key << "lyapunov" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dt" << YAML::Value << a.lyapunov.dt;
  e << YAML::Key << "steps" << YAML::Value << a.lyapunov.steps;
  e << YAML::Key << "ensemble" << YAML::Value << a.lyapunov.ensemble;
  e << YAML::Key << "windows" << YAML::Value << a.lyapunov.windows;
  e << YAML::EndMap;
  e << YAML::EndMap;

  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "directory" << YAML::Value << cfg.output.directory;
  e << YAML::Key << "formats" << YAML::Value << YAML::Flow << cfg.output.formats;
  e << YAML::EndMap;
  e << YAML::Key << "seed" << YAML::Value << cfg.seed;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_yaml(a) == to_yaml(b); }

/// Simulation config for the configured flow.
inline TrajectoryConfig config_trajectory(const ExperimentConfig& cfg, int threads = 1) {
  TrajectoryConfig t;
  t.flow = config_flow(cfg);
  const auto& s = cfg.analysis.simulate;
  t.dt = s.dt;
  t.steps = s.steps;
  t.ensemble = s.ensemble;
  t.burn_in = s.burn_in;
  t.record_every = s.record_every;
  t.seed = cfg.seed;
  t.threads = threads;
  return t;
}

}  // namespace susyflow
