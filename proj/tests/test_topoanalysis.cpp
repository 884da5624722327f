#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "susyflow/topoanalysis.hpp"

using namespace susyflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SpectrumReport solved(const std::string& flow, int D, int n, double T, FPHamiltonian* keep = nullptr) {
  std::vector<int> nn(static_cast<std::size_t>(D), n);
  const auto mesh = build_mesh(D, std::span<const int>(nn), 4);
  auto hf = assemble_H(mesh, builtin_flow(flow, {{"T", T}, {"D", D}}));
  SpectrumReport rep = dense_spectrum(hf);
  (void)pair_bf(rep, hf.d, hf.j);
  if (keep) *keep = std::move(hf);
  return rep;
}

}  // namespace

TEST_CASE("Witten index equals the Euler characteristic of the torus") {
  for (const auto& [flow, D, n] : std::vector<std::tuple<std::string, int, int>>{{"pendulum1d", 1, 32}, {"shear2d", 2, 8}}) {
    const SpectrumReport rep = solved(flow, D, n, 0.7);
    const auto w = witten_index(rep, {0.0, 0.1, 1.0, 10.0});
    for (const auto& s : w) CHECK(std::abs(s.value) < 1e-9);
    CHECK(witten_variation(w) < 1e-9);
  }
}

TEST_CASE("Witten index refuses partial spectra") {
  const auto mesh = build_mesh(1, {16}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("pendulum1d", {{"T", 1.0}}));
  KrylovEigOptions ko;
  ko.count = 2;
  const SpectrumReport rep = krylov_spectrum(hf, ko);
  try {
    (void)witten_index(rep, {1.0});
    FAIL("partial spectrum accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompleteSpectrum);
  }
}

TEST_CASE("partition function of free diffusion on the circle") {
  const int n = 16;
  const double T = 0.8;
  const auto mesh = build_mesh(1, {n}, 2);
  const auto hf = assemble_H(mesh, builtin_flow("diffusion", {{"T", T}, {"D", 1}}));
  const SpectrumReport rep = dense_spectrum(hf);
  const std::vector<double> ts{0.5, 1.0, 2.0, 4.0};
  const PartitionResult z = partition_function(rep, ts);
  const double h = two_pi / n;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double want = 0.0;
    for (int m = 0; m < n; ++m) want += 2.0 * std::exp(-ts[i] * 0.5 * T * 2.0 * (1.0 - std::cos(m * h)) / (h * h));
    CHECK_THAT(z.z[i], WithinRel(want, 1e-10));
  }
}

TEST_CASE("periodic-orbit partition function of the cat map") {
  const GtoOperator g = build_gto(builtin_map("cat", {{"T", 0.1}}), 5);
  const std::vector<int> ns{1, 2, 3, 4, 5, 6};
  const PartitionResult z = map_partition_function(g, ns);
  const double phi2 = (3.0 + std::sqrt(5.0)) / 2.0;
  // only k = 0 is periodic under a hyperbolic map: Z_n = 2 + phi^{2n} + phi^{-2n}
  for (std::size_t i = 0; i < ns.size(); ++i)
    CHECK_THAT(z.z[i], WithinRel(2.0 + std::pow(phi2, ns[i]) + std::pow(phi2, -ns[i]), 1e-10));
  // finite-n fit: the constant 2 biases the slope low by ~2e-2 at n = 4..6
  CHECK_THAT(z.log_slope, WithinAbs(std::log(phi2), 3e-2));
  CHECK(z.log_slope < std::log(phi2));
}

TEST_CASE("gradient flow is classified as unbroken with d-symmetric ground states") {
  const SpectrumReport rep = solved("pendulum1d", 1, 32, 1.0);
  const ChaosReport r = classify(rep);
  CHECK_FALSE(r.susy_broken);
  CHECK(std::abs(r.gamma_g) < 1e-9);
  CHECK(r.ground_states_d_symmetric);
  CHECK(r.zero_modes == std::vector<int>{1, 1});
  CHECK(r.ground_sectors == std::vector<int>{0, 1});
  CHECK(r.anomalies.empty());
  const auto js = chaos_report_json(r);
  CHECK(js["susy_broken"] == false);
  CHECK(js["cross_checks"]["lyapunov1"].is_null());
}

TEST_CASE("a complex ground pair with negative real part is broken and anomalous") {
  SpectrumReport rep;
  for (int k = 0; k <= 1; ++k) rep.sectors.push_back({k, 3, true, false, 3, 1.0, "dense", 0});
  auto add = [&](int k, Complex v) {
    SpectrumEntry e;
    e.value = v;
    e.sector = k;
    rep.entries.push_back(e);
  };
  add(0, 0.0);
  add(0, 2.0);
  add(0, 3.0);
  add(1, Complex(-0.5, 0.3));
  add(1, Complex(-0.5, -0.3));
  add(1, 2.0);
  const ChaosReport r = classify(rep);
  CHECK(r.susy_broken);
  CHECK_THAT(r.gamma_g, WithinAbs(-0.5, 1e-15));
  CHECK(r.pseudo_tr_anomaly);
  CHECK(r.ground_sectors == std::vector<int>{1});
}

TEST_CASE("hyperbolic map is classified as broken") {
  const GtoOperator g = build_gto(builtin_map("cat", {{"T", 0.1}}), 4);
  DenseEigOptions o;
  o.compute_left = false;
  o.tol_eig = 1e-6;
  const ChaosReport r = classify_map(gto_spectrum(g, o));
  CHECK(r.is_map);
  CHECK(r.susy_broken);
  CHECK_THAT(r.gamma_g, WithinRel(-std::log((3.0 + std::sqrt(5.0)) / 2.0), 1e-10));
  CHECK_FALSE(r.pseudo_tr_anomaly);
}

TEST_CASE("ground density of a gradient flow is the Boltzmann weight") {
  const double T = 1.0;
  FPHamiltonian hf;
  const SpectrumReport rep = solved("pendulum1d", 1, 64, T, &hf);
  const GroundDensity gd = ground_density(hf.mesh, rep);
  CHECK(gd.sector == 1);
  CHECK(gd.negativity < 1e-10);
  CHECK(gd.imaginary_residue < 1e-10);
  const double i0 = std::cyl_bessel_i(0.0, 2.0 / T);
  const double i1 = std::cyl_bessel_i(1.0, 2.0 / T);
  double l2 = 0.0;
  for (std::size_t p = 0; p < hf.mesh.n_grid; ++p) {
    const double x = hf.mesh.point(p, 1)[0];
    const double exact = std::exp(2.0 * std::cos(x) / T) / (two_pi * i0);
    l2 += std::pow(gd.density.at(1, p).real() - exact, 2) * hf.mesh.h[0];
  }
  CHECK(std::sqrt(l2) < 1e-3);
  CHECK_THAT(integrate_top(gd.density).real(), WithinAbs(1.0, 1e-12));
  CHECK_THAT(expectation(FieldExpr::parse("cos(x)"), gd.density), WithinAbs(i1 / i0, 1e-4));
}
