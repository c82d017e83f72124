#ifndef PEPSX_EXTRACTION_HPP
#define PEPSX_EXTRACTION_HPP

#include <string>

#include "pepsx/exact_oracle.hpp"
#include "pepsx/operator_basis.hpp"

namespace pepsx {

struct StructureFactorMatrix {
  MatrixXd raw;  // S as computed
  MatrixXd sym;  // (S + S^T)/2
  Momentum q;
  std::string provenance;  // e.g. "oracle:torus=4x4" or "genfunc:chi=80,delta=1e-4"
  double max_imag = 0.0;
  double max_asym = 0.0;
  double min_eigenvalue = 0.0;
  bool psd_flagged = false;  // min eigenvalue below the backend floor
};

StructureFactorMatrix assemble(const ExactSfResult& sf, const Momentum& q, const std::string& provenance,
                               double imag_tol = 1e-6, double psd_floor = -1e-10);
StructureFactorMatrix assemble_raw(const MatrixXd& s_raw, const Momentum& q, const std::string& provenance,
                                   double max_imag = 0.0, double psd_floor = -1e-8);

struct DeflationRecord {
  long requested_vectors = 0;
  long rank = 0;  // orthonormalized deflation rank
  double sentinel = 1e6;
};

struct DeflatedMatrix {
  MatrixXd m;           // P S P + sentinel on the deflated span
  MatrixXd basis;       // orthonormal deflated directions (columns)
  MatrixXd complement;  // orthonormal complement; eigensolves run here so
                        // small eigenvalues are not polluted by the sentinel
  MatrixXd sym;         // the undeflated symmetrized matrix
  DeflationRecord record;
};

// Projects out the union of the given coefficient-vector sets; deflated
// directions receive the sentinel eigenvalue so they never appear as kernel
// candidates.
DeflatedMatrix deflate(const StructureFactorMatrix& s, const std::vector<std::vector<VectorXd>>& subspaces,
                       double sentinel = 1e6);

struct ConservedOperatorSolution {
  double eigenvalue = 0.0;
  VectorXd coefficients;  // unit norm, sign fixed
  MatrixXcd local_term;
  Momentum q;
  long block = 0;        // solutions sharing a block form a degenerate cluster
  long block_size = 1;
  std::string provenance;
};

// Ascending eigenpairs of the deflated matrix, materialized in the basis.
// Clusters with eigenvalue gaps below `degeneracy_gap` share a block label
// and are canonically re-oriented inside their span.
std::vector<ConservedOperatorSolution> solve(const DeflatedMatrix& dm, const OperatorBasis& basis, long count,
                                             const Momentum& q, double degeneracy_gap = 1e-9);

struct RvbAnsatzCoefficients {
  double jt1, jt2, qt1, qt2;     // class-averaged raw couplings
  double j1, j2, q1, q2;         // J1-normalized couplings (j1 == 1)
  double variance_per_site;      // s / (2 jt1)^2
  double class_spread;           // max in-class coefficient deviation
  double all_axis_residual;      // consistency of the shared all-axis strings
};

// Reads the plaquette-model couplings off a solution in the 39-string basis.
RvbAnsatzCoefficients rvb_coefficients(const ConservedOperatorSolution& sol);

// Builds the translated plaquette-model Hamiltonian with J1 = 1 couplings.
GlobalOperator rvb_model_hamiltonian(double j2, double q1, double q2, const FiniteTorus& torus);

struct AkltFamilyReport {
  double residual;        // distance to the nearest family member
  double alpha;           // uniform penalty on the low total-spin channels
  bool in_family;
};

// Checks whether a pair-support d=5 term is block structured in the coupled
// total-spin basis: a uniform multiple of identity on channels S=0..3 and an
// arbitrary Hermitian block on S=4.
AkltFamilyReport aklt_family_membership(const ConservedOperatorSolution& sol, double tolerance);
MatrixXcd aklt_pair_coupling_unitary();  // columns ordered S=0..4, M descending

// Reference conserved operator of the deformed Ising family: plaquette
// coefficient vector (unit norm, product-basis ordering) and its regrouped
// vertex-centered local term on (center, up, right, down, left).
VectorXd ising_conserved_plaquette_coeffs();
SupportGeometry ising_vertex_geometry();
MatrixXcd ising_conserved_vertex_term();

}  // namespace pepsx

#endif
