#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "susyflow/spectral.hpp"

using namespace susyflow;
using Catch::Matchers::WithinAbs;

TEST_CASE("a Jordan block is reported as defective") {
  Eigen::MatrixXd j(2, 2);
  j << 1.0, 1.0, 0.0, 1.0;
  const DenseEig de = dense_eig(j);
  CHECK(de.defective);
  CHECK(de.eigenvector_rank == 1);
  CHECK(de.left.size() == 0);
  CHECK_THAT(de.values[0].real(), WithinAbs(1.0, 1e-7));
}

TEST_CASE("dense eigenpairs have small residuals and biorthogonal duals") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(40, 40);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  const DenseEig de = dense_eig(a);
  CHECK_FALSE(de.defective);
  for (double r : de.residuals) CHECK(r < 1e-12);
  const CMatrix p = de.left.transpose() * de.right;
  CHECK((p - CMatrix::Identity(40, 40)).norm() < 1e-10);
  DenseEigOptions small;
  small.cap = 10;
  try {
    (void)dense_eig(a, small);
    FAIL("cap ignored");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("gradient flow: every nonzero state is paired and zero modes are d-symmetric") {
  const auto mesh = build_mesh(1, {24}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("pendulum1d", {{"T", 1.0}}));
  SpectrumReport rep = dense_spectrum(hf, {}, "pendulum");
  REQUIRE(rep.entries.size() == 48);
  const BfSummary s = pair_bf(rep, hf.d, hf.j);
  CHECK(s.unpaired == 0);
  CHECK(s.multiplicity_mismatches == 0);
  CHECK(s.d_symmetric == 2);
  CHECK(s.paired == 46);
  for (int k = 0; k <= 1; ++k) CHECK(biorthogonality_defect(rep, k) < 1e-9);
  for (const auto& e : rep.entries) {
    if (e.d_symmetric) {
      CHECK(std::abs(e.value) < 1e-9);
      continue;
    }
    REQUIRE(e.partner.has_value());
    const auto& other = rep.entries[static_cast<std::size_t>(rep.sector_indices(e.partner->sector)[static_cast<std::size_t>(e.partner->index)])];
    CHECK(std::abs(other.value - e.value) < 1e-8 * rep.scale());
    CHECK(std::abs(other.sector - e.sector) == 1);
  }
  std::vector<Complex> vals;
  for (const auto& e : rep.entries) vals.push_back(e.value);
  CHECK(conjugation_defect(vals) < 1e-9 * rep.scale());
}

TEST_CASE("degenerate eigenspaces on T^2 still pair completely") {
  const auto mesh = build_mesh(2, {8, 8}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("diffusion", {{"D", 2}, {"T", 1.0}}));
  SpectrumReport rep = dense_spectrum(hf);
  const BfSummary s = pair_bf(rep, hf.d, hf.j);
  CHECK(s.complete());
  CHECK(s.d_symmetric == 4);
}

TEST_CASE("Krylov and dense spectra agree on the lowest states") {
  const auto mesh = build_mesh(2, {8, 8}, 4);
  const auto hf = assemble_H(mesh, builtin_flow("shear2d", {{"T", 0.5}}));
  const SpectrumReport dense = dense_spectrum(hf);
  KrylovEigOptions ko;
  ko.count = 3;
  const SpectrumReport kr = krylov_spectrum(hf, ko);
  CHECK_FALSE(kr.all_complete());
  CHECK(dense.all_complete());
  for (int k = 0; k <= 2; ++k) {
    const auto di = dense.sector_indices(k);
    const auto ki = kr.sector_indices(k);
    REQUIRE(ki.size() == 3);
    // compare real parts of the lowest three (imaginary order within ties may differ)
    for (std::size_t i = 0; i < 3; ++i)
      CHECK_THAT(kr.entries[static_cast<std::size_t>(ki[i])].value.real(),
                 WithinAbs(dense.entries[static_cast<std::size_t>(di[i])].value.real(), 1e-6));
  }
}

TEST_CASE("clusters chain nearby eigenvalues") {
  SpectrumReport rep;
  for (double v : {0.0, 1.0, 1.0 + 1e-9, 1.0 + 2e-9, 3.0}) {
    SpectrumEntry e;
    e.value = v;
    rep.entries.push_back(e);
  }
  const auto c = eigen_clusters(rep, 0, 1.5e-9);
  REQUIRE(c.size() == 3);
  CHECK(c[1].size() == 3);
}

TEST_CASE("spectrum CSV carries one row per eigenvalue") {
  const auto mesh = build_mesh(1, {8}, 2);
  const auto hf = assemble_H(mesh, builtin_flow("drift1d", {{"v", 1.0}, {"T", 0.5}}));
  SpectrumReport rep = dense_spectrum(hf, {}, "drift");
  (void)pair_bf(rep, hf.d, hf.j);
  std::ostringstream os;
  write_spectrum_csv(os, rep);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "system_id,sector,re,im,residual,d_symmetric,partner_sector,partner_index");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 16);
}
