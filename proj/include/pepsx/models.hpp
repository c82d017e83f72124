#ifndef PEPSX_MODELS_HPP
#define PEPSX_MODELS_HPP

#include <optional>

#include "pepsx/lattice.hpp"
#include "pepsx/operator_basis.hpp"
#include "pepsx/tensor.hpp"

namespace pepsx {

enum class InjectivityHint { injective, symmetry_broken_cat, topological };

// Translationally repeated grid of site tensors, index order
// (physical, left, up, right, down). Bond matrices are absorbed wholly into
// the right and down legs, so adjacent tensors contract leg-to-leg.
struct PepsUnitCell {
  long cell_w = 1;
  long cell_h = 1;
  long phys_dim = 0;
  std::vector<Tensor> site_tensors;  // row-major over the cell
  InjectivityHint hint = InjectivityHint::injective;
  std::optional<MatrixXcd> virtual_symmetry;  // U_X on the virtual space

  const Tensor& site(long x, long y) const {
    long ix = ((x % cell_w) + cell_w) % cell_w;
    long iy = ((y % cell_h) + cell_h) % cell_h;
    return site_tensors[static_cast<size_t>(iy * cell_w + ix)];
  }
  long bond_dim_h() const { return site_tensors.front().extent(1); }
  long bond_dim_v() const { return site_tensors.front().extent(2); }
  void validate() const;
};

// Spin-2 AKLT vertex tensor (physical index first, then l,u,r,d spin-1/2
// virtual indices); entries are products of Clebsch-Gordan coefficients.
Tensor aklt_vertex_tensor();
PepsUnitCell build_aklt_peps();

// Nearest-neighbor RVB: d=2, D=3 with virtual space (empty, up, down).
Tensor rvb_vertex_tensor();
PepsUnitCell build_rvb_peps();

// Deformed Ising wavefunction exp(beta/2 sum ZZ)|+...+>, D=2.
PepsUnitCell build_ising_peps(double beta);
double ising_beta_critical();

// Toric-code edge-qubit state deformed by exp(beta/2 Z_e) on every edge,
// built directly in the 2^(2 Lx Ly) edge Hilbert space (unnormalized).
// Edge index 2*(y*Lx+x)+orient, bit 0 = Z=+1, edge 0 most significant.
VectorXd build_deformed_tc_state(double beta, const FiniteTorus& torus);

long edge_index(const FiniteTorus& t, long x, long y, int orient);
long edge_count(const FiniteTorus& t);

}  // namespace pepsx

#endif
