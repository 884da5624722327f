#pragma once

#include <chrono>
#include <vector>

#include "json.hpp"

#include "susyflow/exterior.hpp"
#include "susyflow/krylov.hpp"

namespace susyflow {

struct SectorStats {
  int degree = 0;
  Eigen::Index dimension = 0;
  Eigen::Index nonzeros = 0;
  double assembly_seconds = 0.0;
};

/// H = [d, j] = d j + j d per ghost degree, with j = (T/2) d^dagger + iota_F.
struct FPHamiltonian {
  TorusMesh mesh;
  FlowSpec flow;
  double temperature = 0.0;
  OperatorFamily d;
  OperatorFamily j;
  std::vector<SparseReal> blocks;  ///< H_k, k = 0..D
  std::vector<SectorStats> stats;
  double total_seconds = 0.0;

  const SparseReal& block(int k) const { return blocks[static_cast<std::size_t>(k)]; }
  int dim() const { return mesh.dim; }
};

/// j_k = (T/2) d^dagger_k + iota_k, vielbein squared folded into d^dagger.
inline OperatorFamily assemble_j(const TorusMesh& mesh, const FlowSpec& flow, const AssemblyOptions& opt = {}) {
  if (flow.dim() != mesh.dim)
    throw Error(ErrorCode::DimensionMismatch,
                "flow has " + std::to_string(flow.dim()) + " components, mesh D=" + std::to_string(mesh.dim));
  const OperatorFamily codiff = build_codiff(mesh, flow.vielbein, opt);
  const OperatorFamily iota = build_interior(mesh, flow, opt);
  OperatorFamily j;
  for (int k = 0; k <= mesh.dim; ++k) {
    SectorOperator op = iota[static_cast<std::size_t>(k)];
    op.tag = OpTag::Current;
    if (k > 0) {
      op.matrix = 0.5 * flow.temperature * codiff[static_cast<std::size_t>(k)].matrix + iota[static_cast<std::size_t>(k)].matrix;
      op.matrix.prune(0.0);
    }
    j.push_back(std::move(op));
  }
  return j;
}

inline FPHamiltonian assemble_H(const TorusMesh& mesh, const FlowSpec& flow, const AssemblyOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  FPHamiltonian hf;
  hf.mesh = mesh;
  hf.flow = flow;
  hf.temperature = flow.temperature;
  AssemblyOptions dopt;
  dopt.flip = opt.flip;
  hf.d = build_d(mesh, dopt);
  hf.j = assemble_j(mesh, flow, opt);
  for (int k = 0; k <= mesh.dim; ++k) {
    const auto tk = clock::now();
    const auto n = static_cast<Eigen::Index>(binomial(mesh.dim, k) * mesh.n_grid);
    SparseReal h(n, n);
    if (k > 0) h = hf.d[static_cast<std::size_t>(k - 1)].matrix * hf.j[static_cast<std::size_t>(k)].matrix;
    if (k < mesh.dim) {
      SparseReal up = hf.j[static_cast<std::size_t>(k + 1)].matrix * hf.d[static_cast<std::size_t>(k)].matrix;
      h = (k > 0) ? SparseReal(h + up) : up;
    }
    h.prune(0.0);
    h.makeCompressed();
    SectorStats st;
    st.degree = k;
    st.dimension = n;
    st.nonzeros = h.nonZeros();
    st.assembly_seconds = std::chrono::duration<double>(clock::now() - tk).count();
    hf.stats.push_back(st);
    hf.blocks.push_back(std::move(h));
  }
  hf.total_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return hf;
}

/// Independent assembly path: (T/2)(d d^dagger + d^dagger d) + (d iota + iota d).
inline std::vector<SparseReal> assemble_H_split(const TorusMesh& mesh, const FlowSpec& flow,
                                                const AssemblyOptions& opt = {}) {
  AssemblyOptions dopt;
  dopt.flip = opt.flip;
  const OperatorFamily d = build_d(mesh, dopt);
  const OperatorFamily codiff = build_codiff(mesh, flow.vielbein, opt);
  const OperatorFamily iota = build_interior(mesh, flow, opt);
  std::vector<SparseReal> out;
  for (int k = 0; k <= mesh.dim; ++k) {
    const auto n = static_cast<Eigen::Index>(binomial(mesh.dim, k) * mesh.n_grid);
    SparseReal lap(n, n), lie(n, n);
    const auto K = static_cast<std::size_t>(k);
    if (k > 0) {
      lap = d[K - 1].matrix * codiff[K].matrix;
      lie = d[K - 1].matrix * iota[K].matrix;
    }
    if (k < mesh.dim) {
      lap = SparseReal(lap + codiff[K + 1].matrix * d[K].matrix);
      lie = SparseReal(lie + iota[K + 1].matrix * d[K].matrix);
    }
    out.push_back(SparseReal(0.5 * flow.temperature * lap + lie));
  }
  return out;
}

inline MatVec hamiltonian_matvec(const SparseReal& h) {
  return [&h](const CVector& x) { return susyflow::apply(h, x); };
}

/// e^{-tH} psi, sector by sector.
inline FormField evolve(const FPHamiltonian& hf, const FormField& psi, double t, const ExpmvOptions& opt = {}) {
  if (t < 0.0) throw Error(ErrorCode::NegativeTime, "t=" + std::to_string(t));
  if (!(psi.mesh() == hf.mesh)) throw Error(ErrorCode::MeshMismatch, "form and Hamiltonian meshes differ");
  FormField out = psi;
  for (int k = 0; k <= hf.mesh.dim; ++k) {
    if (!psi.is_full() && k != psi.degree()) continue;
    const CVector block = psi.degree_block(k);
    if (block.norm() == 0.0) continue;
    out.set_degree_block(k, expmv(hamiltonian_matvec(hf.block(k)), block, t, opt));
  }
  return out;
}

inline nlohmann::json operator_stats_json(const FPHamiltonian& hf) {
  nlohmann::json sectors = nlohmann::json::array();
  for (const auto& st : hf.stats)
    sectors.push_back({{"sector", st.degree},
                       {"dimension", st.dimension},
                       {"nonzeros", st.nonzeros},
                       {"assembly_seconds", st.assembly_seconds}});
  return {{"total_assembly_seconds", hf.total_seconds}, {"stencil_order", hf.mesh.stencil_order}, {"sectors", sectors}};
}

}  // namespace susyflow
