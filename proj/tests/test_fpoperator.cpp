#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "susyflow/fpoperator.hpp"

using namespace susyflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Eigenvalue of the constant-drift Hamiltonian for Fourier mode m, written
// out from the difference stencils by hand.
Complex drift_eigenvalue(int order, int n, double v, double T, int m) {
  const double h = two_pi / n;
  const double th = m * h;
  if (order == 2) return {0.5 * T * 2.0 * (1.0 - std::cos(th)) / (h * h), v * std::sin(th) / h};
  const double kappa = (27.0 * std::sin(th / 2) - std::sin(1.5 * th)) / (12.0 * h);
  const double avg = (9.0 * std::cos(th / 2) - std::cos(1.5 * th)) / 8.0;
  return {0.5 * T * kappa * kappa, v * avg * kappa};
}

std::vector<Complex> sorted_eigenvalues(const SparseReal& h) {
  Eigen::EigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
  std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), [](Complex a, Complex b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  return out;
}

double max_mismatch(std::vector<Complex> a, std::vector<Complex> b) {
  // greedy nearest matching; both lists have the same size
  double worst = 0.0;
  for (const Complex& x : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](Complex p, Complex q) { return std::abs(p - x) < std::abs(q - x); });
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

}  // namespace

TEST_CASE("constant drift spectrum matches the stencil symbol in both sectors") {
  for (int order : {2, 4}) {
    const int n = 32;
    const double v = 1.3, T = 0.7;
    const auto mesh = build_mesh(1, {n}, order);
    const auto hf = assemble_H(mesh, builtin_flow("drift1d", {{"v", v}, {"T", T}}));
    std::vector<Complex> expected;
    for (int m = -n / 2 + 1; m <= n / 2; ++m) expected.push_back(drift_eigenvalue(order, n, v, T, m));
    const double scale = std::abs(*std::max_element(expected.begin(), expected.end(), [](Complex a, Complex b) { return std::abs(a) < std::abs(b); }));
    for (int k = 0; k <= 1; ++k) CHECK(max_mismatch(sorted_eigenvalues(hf.block(k)), expected) < 1e-10 * scale);
  }
}

TEST_CASE("anisotropic noise scales the Laplacian per axis") {
  const auto mesh = build_mesh(2, {16, 16}, 4);
  FlowSpec f = builtin_flow("diffusion", {{"D", 2}, {"T", 1.0}});
  f.vielbein = {2.0, 1.0};
  const auto hf = assemble_H(mesh, f);
  CVector mode(static_cast<Eigen::Index>(mesh.n_grid));
  for (std::size_t p = 0; p < mesh.n_grid; ++p) mode[static_cast<Eigen::Index>(p)] = std::exp(Complex(0, mesh.point(p)[0]));
  // (T/2) e_x^2 kappa^2 with T = 1, e_x = 2
  const double kappa2 = drift_eigenvalue(4, 16, 0.0, 2.0, 1).real();
  const double expected = 0.5 * 4.0 * kappa2;
  const CVector hm = susyflow::apply(hf.block(0), mode);
  CHECK((hm - expected * mode).norm() < 1e-10 * mode.norm());
}

TEST_CASE("assembled and split Hamiltonians agree and commute with d") {
  for (const auto& [D, name] : std::vector<std::pair<int, std::string>>{{1, "pendulum1d"}, {2, "shear2d"}, {3, "abc"}}) {
    std::vector<int> n(static_cast<std::size_t>(D), 8);
    const auto mesh = build_mesh(D, std::span<const int>(n), 4);
    const auto flow = builtin_flow(name, {{"T", 0.4}});
    const auto hf = assemble_H(mesh, flow);
    const auto split = assemble_H_split(mesh, flow);
    for (int k = 0; k <= D; ++k) {
      const double s = hf.block(k).norm();
      CHECK(SparseReal(hf.block(k) - split[static_cast<std::size_t>(k)]).norm() < 1e-12 * s);
      if (k < D) {
        const auto& dk = hf.d[static_cast<std::size_t>(k)].matrix;
        CHECK(SparseReal(dk * hf.block(k) - hf.block(k + 1) * dk).norm() < 1e-12 * s * dk.norm());
      }
    }
  }
}

TEST_CASE("probability is conserved and constants are stationary in sector zero") {
  const auto mesh = build_mesh(2, {10, 12}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("shear2d", {{"T", 0.5}}));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(mesh.n_grid));
  // top-degree H is exact, so its image integrates to zero
  CHECK((ones.transpose() * hf.block(2)).norm() < 1e-10 * hf.block(2).norm());
  CHECK((hf.block(0) * ones).norm() < 1e-10 * hf.block(0).norm());
}

TEST_CASE("evolution damps a Fourier mode at its eigenvalue") {
  const int n = 24;
  const auto mesh = build_mesh(1, {n}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("drift1d", {{"v", 0.8}, {"T", 0.6}}));
  const int m = 3;
  FormField psi = FormField::from_function(mesh, 0, [&](const auto& x) { return std::exp(Complex(0, m * x[0])); });
  const double t = 0.75;
  const FormField out = evolve(hf, psi, t);
  const Complex factor = std::exp(-t * drift_eigenvalue(4, n, 0.8, 0.6, m));
  CHECK((out.coeffs() - factor * psi.coeffs()).norm() < 1e-9 * psi.coeffs().norm());
  try {
    (void)evolve(hf, psi, -1.0);
    FAIL("negative time accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativeTime);
  }
}

TEST_CASE("assembly statistics and dimension checks") {
  const auto mesh = build_mesh(2, {8, 8}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("shear2d", {{"T", 1.0}}));
  const auto js = operator_stats_json(hf);
  REQUIRE(js["sectors"].size() == 3);
  CHECK(js["sectors"][1]["dimension"] == 128);
  CHECK(js["sectors"][0]["nonzeros"].get<long>() > 0);
  try {
    (void)assemble_H(mesh, builtin_flow("pendulum1d", {}));
    FAIL("1-component flow on T^2 accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}
