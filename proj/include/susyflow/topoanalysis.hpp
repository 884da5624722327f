#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "susyflow/exterior.hpp"
#include "susyflow/gtomap.hpp"
#include "susyflow/spectral.hpp"

namespace susyflow {

struct WittenSample {
  double t = 0.0;
  Complex value;
};

/// W_t = sum_k (-1)^k sum_a exp(-t E_{k,a}) over complete sector spectra.
inline std::vector<WittenSample> witten_index(const SpectrumReport& rep, const std::vector<double>& ts) {
  if (!rep.all_complete()) throw Error(ErrorCode::IncompleteSpectrum, "Witten index needs every sector's full spectrum");
  std::vector<WittenSample> out;
  for (double t : ts) {
    Complex w(0.0);
    for (const auto& e : rep.entries) w += (e.sector % 2 ? -1.0 : 1.0) * std::exp(-t * e.value);
    out.push_back({t, w});
  }
  return out;
}

/// max - min of |W| differences across samples.
inline double witten_variation(const std::vector<WittenSample>& w) {
  double v = 0.0;
  for (const auto& a : w)
    for (const auto& b : w) v = std::max(v, std::abs(a.value - b.value));
  return v;
}

struct PartitionResult {
  std::vector<double> t;
  std::vector<double> z;
  double log_slope = 0.0;  ///< least-squares slope of log Z over the upper half of the samples
};

namespace detail {
inline double fit_log_slope(const std::vector<double>& t, const std::vector<double>& z) {
  const std::size_t start = t.size() / 2;
  double st = 0, sl = 0, stt = 0, stl = 0;
  int n = 0;
  for (std::size_t i = start; i < t.size(); ++i) {
    if (!(z[i] > 0.0)) continue;
    const double l = std::log(z[i]);
    st += t[i];
    sl += l;
    stt += t[i] * t[i];
    stl += t[i] * l;
    ++n;
  }
  if (n < 2) return 0.0;
  const double den = n * stt - st * st;
  return den == 0.0 ? 0.0 : (n * stl - st * sl) / den;
}
}  // namespace detail

/// Z_t = Tr e^{-tH} summed over every sector.
inline PartitionResult partition_function(const SpectrumReport& rep, const std::vector<double>& ts) {
  if (!rep.all_complete()) throw Error(ErrorCode::IncompleteSpectrum, "partition function needs full spectra");
  PartitionResult out;
  for (double t : ts) {
    Complex z(0.0);
    for (const auto& e : rep.entries) z += std::exp(-t * e.value);
    out.t.push_back(t);
    out.z.push_back(z.real());
  }
  out.log_slope = detail::fit_log_slope(out.t, out.z);
  return out;
}

/// Z_n = Tr M^n over every sector, by exact sparse powers.
inline PartitionResult map_partition_function(const GtoOperator& g, const std::vector<int>& ns) {
  PartitionResult out;
  for (int n : ns) {
    if (n < 1) throw Error(ErrorCode::DomainMismatch, "iterate count must be >= 1");
    Complex z(0.0);
    for (int k = 0; k <= g.dim(); ++k) {
      Eigen::SparseMatrix<Complex> p = g.block(k);
      for (int i = 1; i < n; ++i) p = (g.block(k) * p).pruned();
      for (Eigen::Index c = 0; c < p.outerSize(); ++c)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(p, c); it; ++it)
          if (it.row() == it.col()) z += it.value();
    }
    out.t.push_back(n);
    out.z.push_back(z.real());
  }
  out.log_slope = detail::fit_log_slope(out.t, out.z);
  return out;
}

// ---------------------------------------------------------------------------

struct ClassifyOptions {
  double tol_class_rel = 1e-6;
  double tol_zero_rel = 1e-6;
};

struct ChaosReport {
  bool is_map = false;
  double gamma_g = 0.0;
  double scale = 0.0;
  double tol_class = 0.0;
  std::vector<int> ground_sectors;
  bool susy_broken = false;
  bool pseudo_tr_anomaly = false;
  bool ground_states_d_symmetric = false;
  std::vector<int> zero_modes;
  std::vector<WittenSample> witten;
  std::vector<std::string> anomalies;
  std::optional<double> lyapunov1;
  std::optional<double> orbit_rate;
};

/// Continuous-time classification: Gamma_g = min Re E over all sectors.
/// Ground-state d-symmetry uses the flags set by pair_bf.
inline ChaosReport classify(const SpectrumReport& rep, const ClassifyOptions& opt = {}) {
  ChaosReport r;
  r.scale = rep.scale();
  r.tol_class = opt.tol_class_rel * r.scale;
  const double tol_zero = opt.tol_zero_rel * r.scale;
  int top = -1;
  for (const auto& s : rep.sectors) top = std::max(top, s.sector);
  r.zero_modes.assign(static_cast<std::size_t>(top + 1), 0);
  r.gamma_g = std::numeric_limits<double>::infinity();
  for (const auto& e : rep.entries) {
    r.gamma_g = std::min(r.gamma_g, e.value.real());
    if (std::abs(e.value) <= tol_zero) ++r.zero_modes[static_cast<std::size_t>(e.sector)];
  }
  r.susy_broken = r.gamma_g < -r.tol_class;
  bool any_real = false;
  bool all_dsym = true;
  for (const auto& e : rep.entries) {
    if (std::abs(e.value.real() - r.gamma_g) > r.tol_class) continue;
    if (std::find(r.ground_sectors.begin(), r.ground_sectors.end(), e.sector) == r.ground_sectors.end())
      r.ground_sectors.push_back(e.sector);
    if (std::abs(e.value.imag()) <= r.tol_class) any_real = true;
    if (!e.d_symmetric) all_dsym = false;
  }
  std::sort(r.ground_sectors.begin(), r.ground_sectors.end());
  r.ground_states_d_symmetric = all_dsym;
  if (!any_real) {
    r.pseudo_tr_anomaly = true;
    r.anomalies.push_back("pseudo-time-reversal: no real eigenvalue attains the minimal real part");
  }
  if (!r.susy_broken && !all_dsym)
    r.anomalies.push_back("inconsistent: Gamma_g >= -tol but a ground state is not d-symmetric");
  if (!rep.all_complete())
    r.anomalies.push_back("extremal spectra only: zero-mode counts and d-symmetry are partial");
  return r;
}

/// Map variant: Gamma_g = -log of the spectral radius per step.
inline ChaosReport classify_map(const GtoSpectrum& gs, const ClassifyOptions& opt = {}) {
  ChaosReport r;
  r.is_map = true;
  r.scale = gs.spectral_radius;
  r.gamma_g = gs.gamma_g;
  r.tol_class = opt.tol_class_rel * std::max(1.0, std::abs(gs.gamma_g));
  r.susy_broken = r.gamma_g < -r.tol_class;
  r.ground_sectors = {gs.radius_sector};
  int top = -1;
  for (const auto& s : gs.report.sectors) top = std::max(top, s.sector);
  r.zero_modes.assign(static_cast<std::size_t>(top + 1), 0);
  const double tol_unit = opt.tol_zero_rel * std::max(1.0, gs.spectral_radius);
  for (const auto& e : gs.report.entries)
    if (std::abs(e.value - 1.0) <= tol_unit) ++r.zero_modes[static_cast<std::size_t>(e.sector)];
  if (std::abs(gs.leading.imag()) > 1e-10) {
    r.pseudo_tr_anomaly = true;
    r.anomalies.push_back("leading eigenvalue is not real");
  }
  r.anomalies.push_back(
      "map spectrum: cohomology-sector eigenvalues may differ from 1; zero_modes counts unit eigenvalues and the "
      "continuous-time d-symmetric/zero-eigenvalue correspondence is not imposed");
  return r;
}

inline nlohmann::json chaos_report_json(const ChaosReport& r) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& s : r.witten) w.push_back({{"t", s.t}, {"re", s.value.real()}, {"im", s.value.imag()}});
  nlohmann::json cross = nlohmann::json::object();
  cross["lyapunov1"] = r.lyapunov1 ? nlohmann::json(*r.lyapunov1) : nlohmann::json(nullptr);
  cross["orbit_rate"] = r.orbit_rate ? nlohmann::json(*r.orbit_rate) : nlohmann::json(nullptr);
  return {{"kind", r.is_map ? "map" : "flow"},
          {"gamma_g", r.gamma_g},
          {"susy_broken", r.susy_broken},
          {"tol_class", r.tol_class},
          {"scale", r.scale},
          {"ground_sectors", r.ground_sectors},
          {"ground_states_d_symmetric", r.ground_states_d_symmetric},
          {"pseudo_tr_anomaly", r.pseudo_tr_anomaly},
          {"witten_index", w},
          {"zero_modes", r.zero_modes},
          {"anomalies", r.anomalies},
          {"cross_checks", cross}};
}

// ---------------------------------------------------------------------------

struct GroundDensity {
  FormField density;  ///< top-degree form, integrates to 1
  int sector = -1;
  Complex eigenvalue;
  double negativity = 0.0;      ///< integral of |min(Re P, 0)|
  double imaginary_residue = 0.0;  ///< ||Im P|| (grid L2 norm)
  bool degenerate = false;
};

/// P_g = left ^ right for the ground pair in the highest sector attaining
/// Gamma_g. The left vector is realized as a (D-k)-form.
inline GroundDensity ground_density(const TorusMesh& mesh, const SpectrumReport& rep, double tol_rel = 1e-6) {
  const double scale = rep.scale();
  double gmin = std::numeric_limits<double>::infinity();
  for (const auto& e : rep.entries) gmin = std::min(gmin, e.value.real());
  const SpectrumEntry* pick = nullptr;
  int count = 0;
  for (const auto& e : rep.entries) {
    if (std::abs(e.value - Complex(gmin, 0.0)) > tol_rel * scale) continue;
    if (!pick || e.sector > pick->sector) {
      pick = &e;
      count = 1;
    } else if (e.sector == pick->sector) {
      ++count;
    }
  }
  if (!pick) throw Error(ErrorCode::NormalizationFailure, "no real ground state");
  if (pick->left.size() == 0) throw Error(ErrorCode::NormalizationFailure, "ground state has no left eigenvector");
  GroundDensity g;
  g.sector = pick->sector;
  g.eigenvalue = pick->value;
  g.degenerate = count > 1;
  const FormField right = FormField::from_block(mesh, pick->sector, pick->right);
  const FormField left = complement_realization(mesh, pick->sector, pick->left);
  FormField p = wedge(left, right);
  const Complex total = integrate_top(p);
  if (!(std::abs(total) > 1e-12)) throw Error(ErrorCode::NormalizationFailure, "integral of P_g vanishes");
  p.coeffs() /= total;
  const double vol = mesh.cell_volume();
  for (Eigen::Index i = 0; i < p.coeffs().size(); ++i) g.negativity += std::max(0.0, -p.coeffs()[i].real()) * vol;
  g.imaginary_residue = std::sqrt(p.coeffs().imag().squaredNorm() * vol);
  g.density = std::move(p);
  return g;
}

/// Quadrature of O * P over the grid, O sampled at the top-form points.
inline double expectation(const FieldExpr& obs, const FormField& density) {
  const TorusMesh& mesh = density.mesh();
  const GhostMask top = (1u << mesh.dim) - 1u;
  double s = 0.0;
  for (std::size_t p = 0; p < mesh.n_grid; ++p) {
    const auto x = mesh.point(p, top);
    s += obs.eval(std::span<const double>(x.data(), static_cast<std::size_t>(mesh.dim))) * density.at(top, p).real();
  }
  return s * mesh.cell_volume();
}

}  // namespace susyflow
