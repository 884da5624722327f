#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "susyflow/dynamics.hpp"
#include "susyflow/fpoperator.hpp"
#include "susyflow/gtomap.hpp"
#include "susyflow/spectral.hpp"
#include "susyflow/topoanalysis.hpp"

namespace susyflow {

struct CheckRow {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

enum class CheckLevel { Fast, Full };

struct CheckOptions {
  CheckLevel level = CheckLevel::Fast;
  std::optional<SignFlip> flip;
};

/// Eigenvalue of the drift1d Hamiltonian (either sector) for wavenumber m.
inline Complex drift_symbol(int order, int n, double v, double T, int m) {
  const double h = two_pi / n;
  const double th = m * h;
  if (order == 2) return Complex(T / 2.0 * 2.0 * (1.0 - std::cos(th)) / (h * h), v * std::sin(th) / h);
  const double kappa = (27.0 * std::sin(th / 2.0) - std::sin(1.5 * th)) / (12.0 * h);
  const double alpha = (9.0 * std::cos(th / 2.0) - std::cos(1.5 * th)) / 8.0;
  return Complex(T / 2.0 * kappa * kappa, v * alpha * kappa);
}

namespace detail {

inline double rel_norm(const SparseReal& diff, double scale) {
  SparseReal d = diff;
  d.prune(0.0);
  if (d.nonZeros() == 0) return 0.0;
  return norm_estimate(d) / std::max(scale, 1e-300);
}

/// Expected d iota + iota d for constant F: block-diagonal over masks,
/// sum_i F^i (average_i * difference_i) on every component.
inline SparseReal cartan_reference(const TorusMesh& mesh, int k, std::span<const double> F) {
  SparseReal c(static_cast<Eigen::Index>(mesh.n_grid), static_cast<Eigen::Index>(mesh.n_grid));
  for (int a = 0; a < mesh.dim; ++a)
    c += F[static_cast<std::size_t>(a)] * SparseReal(midpoint_average(mesh, a) * staggered_difference(mesh, a));
  const auto nm = static_cast<Eigen::Index>(binomial(mesh.dim, k));
  SparseReal eye(nm, nm);
  eye.setIdentity();
  return Eigen::kroneckerProduct(eye, c).eval();
}

}  // namespace detail

class CheckSuite {
 public:
  explicit CheckSuite(CheckOptions opt) : opt_(opt) {
    asm_.flip = opt.flip;
  }

  std::vector<CheckRow> run() {
    algebra_checks();
    spectral_checks();
    map_checks();
    if (opt_.level == CheckLevel::Full) full_checks();
    return rows_;
  }

 private:
  void add(std::string name, double measured, double threshold, std::string detail = {}) {
    rows_.push_back({std::move(name), measured <= threshold, measured, threshold, std::move(detail)});
  }
  void add_bool(std::string name, bool ok, double measured, std::string detail = {}) {
    rows_.push_back({std::move(name), ok, measured, 0.0, std::move(detail)});
  }
  template <class Fn>
  void guarded(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rows_.push_back({name, false, std::numeric_limits<double>::quiet_NaN(), 0.0, e.what()});
    }
  }

  void algebra_for(const TorusMesh& mesh, const FlowSpec& flow, const std::string& tag) {
    AssemblyOptions dopt;
    dopt.flip = asm_.flip;
    const OperatorFamily d = build_d(mesh, dopt);
    double worst = 0.0;
    for (int k = 0; k + 1 < mesh.dim; ++k) {
      const auto K = static_cast<std::size_t>(k);
      const double scale = norm_estimate(d[K + 1].matrix) * norm_estimate(d[K].matrix);
      worst = std::max(worst, detail::rel_norm(SparseReal(d[K + 1].matrix * d[K].matrix), scale));
    }
    add("d^2 = 0 " + tag, worst, 1e-12);

    std::vector<double> fc{0.7, -0.4, 0.3};
    std::vector<std::string> src;
    for (int a = 0; a < mesh.dim; ++a) src.push_back(std::to_string(fc[static_cast<std::size_t>(a)]));
    const FlowSpec cflow = make_flow("constant", src, 0.0);
    const OperatorFamily ic = build_interior(mesh, cflow, asm_);
    worst = 0.0;
    for (int k = 2; k <= mesh.dim; ++k) {
      const auto K = static_cast<std::size_t>(k);
      const double scale = norm_estimate(ic[K - 1].matrix) * norm_estimate(ic[K].matrix);
      worst = std::max(worst, detail::rel_norm(SparseReal(ic[K - 1].matrix * ic[K].matrix), scale));
    }
    add("iota^2 = 0 (constant F) " + tag, worst, 1e-12);

    worst = 0.0;
    for (int k = 0; k <= mesh.dim; ++k) {
      const auto K = static_cast<std::size_t>(k);
      const auto n = static_cast<Eigen::Index>(binomial(mesh.dim, k) * mesh.n_grid);
      SparseReal lie(n, n);
      if (k > 0) lie = d[K - 1].matrix * ic[K].matrix;
      if (k < mesh.dim) lie = SparseReal(lie + ic[K + 1].matrix * d[K].matrix);
      const SparseReal ref = detail::cartan_reference(mesh, k, fc);
      worst = std::max(worst, detail::rel_norm(SparseReal(lie - ref), norm_estimate(ref)));
    }
    add("Cartan d iota + iota d = F.grad (constant F) " + tag, worst, 1e-12);

    const FPHamiltonian hf = assemble_H(mesh, flow, asm_);
    const auto split = assemble_H_split(mesh, flow, asm_);
    worst = 0.0;
    double comm = 0.0;
    for (int k = 0; k <= mesh.dim; ++k) {
      const double hn = norm_estimate(hf.block(k));
      worst = std::max(worst, detail::rel_norm(SparseReal(hf.block(k) - split[static_cast<std::size_t>(k)]), hn));
      if (k < mesh.dim) {
        const SparseReal& dk = hf.d[static_cast<std::size_t>(k)].matrix;
        comm = std::max(comm, detail::rel_norm(SparseReal(dk * hf.block(k) - hf.block(k + 1) * dk),
                                               norm_estimate(dk) * hn));
      }
    }
    add("H = dj + jd matches split assembly " + tag, worst, 1e-12);
    add("[d, H] = 0 " + tag, comm, 1e-12);
  }

  void algebra_checks() {
    guarded("algebra T1", [&] {
      algebra_for(build_mesh(1, {16}, 4), builtin_flow("pendulum1d", {{"T", 0.5}}), "T1[16]");
    });
    guarded("algebra T2", [&] {
      algebra_for(build_mesh(2, {12, 12}, 4), builtin_flow("shear2d", {{"T", 0.5}}), "T2[12,12]");
    });
    guarded("algebra T3", [&] {
      algebra_for(build_mesh(3, {8, 8, 8}, 4), builtin_flow("abc", {{"T", 0.1}}), "T3[8,8,8]");
    });
    guarded("derivative stencil", [&] {
      const TorusMesh m = build_mesh(1, {64}, 4);
      const SparseReal dm = derivative_matrix(m, 0);
      add("derivative antisymmetric", detail::rel_norm(SparseReal(dm + SparseReal(dm.transpose())), norm_estimate(dm)),
          1e-15);
      const double h = m.h[0];
      double worst = 0.0;
      for (int kk = 1; kk <= 5; ++kk) {
        CVector f(64);
        for (int j = 0; j < 64; ++j) f[j] = std::exp(Complex(0.0, kk * j * h));
        const double kt = (8.0 * std::sin(kk * h) - std::sin(2.0 * kk * h)) / (6.0 * h);
        worst = std::max(worst, (susyflow::apply(dm, f) - Complex(0.0, kt) * f).norm() / f.norm());
      }
      add("derivative modified wavenumber", worst, 1e-12);
    });
    guarded("parser", [&] {
      int bad = 0;
      for (const char* s : {"-sin(x)", "2^-1^2", "x*y+z/2-(x-y)", "exp(cos(y)*0.5)-z^2"}) {
        const FieldExpr e = FieldExpr::parse(s);
        if (!(FieldExpr::parse(e.to_string()) == e)) ++bad;
      }
      add("parser print/parse round trip", bad, 0);
    });
  }

  void bf_for(const TorusMesh& mesh, const FlowSpec& flow, const std::string& tag) {
    const FPHamiltonian hf = assemble_H(mesh, flow, asm_);
    SpectrumReport rep = dense_spectrum(hf);
    const BfSummary s = pair_bf(rep, hf.d, hf.j);
    add("BF pairing complete " + tag, s.unpaired + s.multiplicity_mismatches, 0,
        std::to_string(s.paired) + " paired, " + std::to_string(s.d_symmetric) + " d-symmetric");
    double worst = 0.0;
    for (int k = 0; k <= mesh.dim; ++k) {
      std::vector<Complex> vals;
      for (int i : rep.sector_indices(k)) vals.push_back(rep.entries[static_cast<std::size_t>(i)].value);
      worst = std::max(worst, conjugation_defect(vals));
    }
    add("spectrum closed under conjugation " + tag, worst / rep.scale(), 1e-10);
  }

  void spectral_checks() {
    guarded("BF T1", [&] { bf_for(build_mesh(1, {16}, 4), builtin_flow("pendulum1d", {{"T", 0.5}}), "pendulum1d T1[16]"); });
    guarded("BF T2", [&] { bf_for(build_mesh(2, {8, 8}, 4), builtin_flow("shear2d", {{"T", 0.5}}), "shear2d T2[8,8]"); });
    guarded("Betti", [&] {
      const TorusMesh mesh = build_mesh(2, {8, 8}, 4);
      const FPHamiltonian hf = assemble_H(mesh, builtin_flow("diffusion", {{"T", 1.0}, {"D", 2}}), asm_);
      SpectrumReport rep = dense_spectrum(hf);
      pair_bf(rep, hf.d, hf.j);
      const ChaosReport cr = classify(rep);
      const bool ok = cr.zero_modes == std::vector<int>{1, 2, 1};
      add_bool("zero modes = Betti numbers (1,2,1) T2[8,8]", ok, 0.0,
               std::to_string(cr.zero_modes[0]) + "," + std::to_string(cr.zero_modes[1]) + "," +
                   std::to_string(cr.zero_modes[2]));
      const auto w = witten_index(rep, {0.1, 1.0, 10.0});
      double worst = 0.0;
      for (const auto& s : w) worst = std::max(worst, std::abs(s.value));
      add("Witten index = 0 (diffusion T2[8,8])", worst, 1e-8);
    });
  }

  void map_checks() {
    guarded("cat map", [&] {
      const GtoOperator g = build_gto(builtin_map("cat", {{"T", 0.1}}), 3);
      add("GTO supertrace = -1 (cat, K=3)", std::abs(gto_supertrace(g) - Complex(-1.0, 0.0)), 1e-10);
      add("GTO commutes with d (cat, K=3)", gto_d_commutator_defect(g), 1e-12);
      const GtoSpectrum s = gto_spectrum(g);
      add("GTO spectral radius = (3+sqrt5)/2 (cat, K=3)", std::abs(s.spectral_radius - (3.0 + std::sqrt(5.0)) / 2.0), 1e-8);
      const MapSpec cat = builtin_map("cat", {});
      int bad = 0;
      for (int n = 1; n <= 3; ++n)
        if (static_cast<long long>(enumerate_fixed_points(cat, n).size()) != fixed_point_count(cat, n)) ++bad;
      add("fixed-point count = brute enumeration (n<=3)", bad, 0);
    });
  }

  void full_checks() {
    guarded("Witten sweep", [&] {
      const TorusMesh mesh = build_mesh(2, {12, 12}, 4);
      const FPHamiltonian hf = assemble_H(mesh, builtin_flow("shear2d", {{"T", 0.5}}), asm_);
      SpectrumReport rep = dense_spectrum(hf);
      const auto w = witten_index(rep, {0.1, 0.3, 1.0, 3.0, 10.0});
      double worst = 0.0;
      for (const auto& s : w) worst = std::max(worst, std::abs(s.value));
      add("Witten index t-sweep (shear2d T2[12,12])", worst, 1e-6);
      add("Witten index t-variation (shear2d T2[12,12])", witten_variation(w), 1e-6);
    });
    guarded("BF T2 16", [&] {
      bf_for(build_mesh(2, {16, 16}, 4), builtin_flow("shear2d", {{"T", 0.5}}), "shear2d T2[16,16]");
    });
    guarded("pendulum", [&] {
      const TorusMesh mesh = build_mesh(1, {64}, 4);
      const FPHamiltonian hf = assemble_H(mesh, builtin_flow("pendulum1d", {{"T", 0.5}}), asm_);
      SpectrumReport rep = dense_spectrum(hf);
      pair_bf(rep, hf.d, hf.j);
      const ChaosReport cr = classify(rep);
      add("pendulum1d |Gamma_g|", std::abs(cr.gamma_g), 1e-8);
      add_bool("pendulum1d susy unbroken", !cr.susy_broken && cr.ground_states_d_symmetric, cr.gamma_g);
      const GroundDensity g = ground_density(mesh, rep);
      double num = 0.0, den = 0.0, z = 0.0;
      const GhostMask top = 1u;
      for (std::size_t p = 0; p < mesh.n_grid; ++p) z += std::exp(4.0 * std::cos(mesh.point(p, top)[0]));
      z *= mesh.cell_volume();
      for (std::size_t p = 0; p < mesh.n_grid; ++p) {
        const double exact = std::exp(4.0 * std::cos(mesh.point(p, top)[0])) / z;
        num += std::norm(g.density.at(top, p) - exact);
        den += exact * exact;
      }
      add("pendulum1d P_g relative L2 error", std::sqrt(num / den), 1e-3);
    });
    guarded("drift symbol", [&] {
      double worst = 0.0;
      for (int order : {2, 4}) {
        const TorusMesh mesh = build_mesh(1, {64}, order);
        const FPHamiltonian hf = assemble_H(mesh, builtin_flow("drift1d", {{"T", 0.5}, {"v", 1.0}}), asm_);
        const SpectrumReport rep = dense_spectrum(hf);
        for (const auto& e : rep.entries) {
          double best = std::numeric_limits<double>::infinity();
          for (int m = -31; m <= 32; ++m) best = std::min(best, std::abs(e.value - drift_symbol(order, 64, 1.0, 0.5, m)));
          worst = std::max(worst, best);
        }
      }
      add("drift1d eigenvalues = circulant symbol", worst, 1e-10);
    });
    guarded("cat K=8", [&] {
      const GtoSpectrum s = gto_spectrum(build_gto(builtin_map("cat", {{"T", 0.1}}), 8));
      add("cat map Gamma_g = -log((3+sqrt5)/2) (K=8)", std::abs(s.gamma_g + std::log((3.0 + std::sqrt(5.0)) / 2.0)), 1e-6);
    });
  }

  CheckOptions opt_;
  AssemblyOptions asm_;
  std::vector<CheckRow> rows_;
};

inline std::vector<CheckRow> run_checks(const CheckOptions& opt) { return CheckSuite(opt).run(); }

inline bool all_passed(const std::vector<CheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

inline void print_check_table(std::ostream& os, const std::vector<CheckRow>& rows) {
  std::size_t w = 9;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  os << std::left << std::setw(static_cast<int>(w)) << "invariant" << "  status  measured        threshold\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << (r.pass ? "PASS  " : "FAIL  ") << "  "
       << std::setw(14) << std::scientific << std::setprecision(3) << r.measured << "  " << std::setw(10)
       << r.threshold << std::defaultfloat;
    if (!r.detail.empty()) os << "  " << r.detail;
    os << '\n';
  }
}

}  // namespace susyflow
