#ifndef PEPSX_EXACT_ORACLE_HPP
#define PEPSX_EXACT_ORACLE_HPP

#include <optional>

#include "pepsx/models.hpp"
#include "pepsx/operator_basis.hpp"

namespace pepsx {

// Exact amplitudes of the PEPS on a finite torus. Site s = y*Lx + x is the
// s-th tensor factor, site 0 most significant: index = sum_s i_s d^(N-1-s).
VectorXcd contract_torus_statevector(const PepsUnitCell& peps, const FiniteTorus& torus);

// Reduced density matrix on an arbitrary site list (normalized, Hermitian).
// Factor order follows the order of `sites`.
MatrixXcd rdm_on_support(const PepsUnitCell& peps, const FiniteTorus& torus, const std::vector<long>& sites);

// Sum of translated k-local terms with momentum phases,
//   H = sum_x e^{i q.x} h_x,   h_x = sum_a coeffs[a] o^a_x.
class GlobalOperator {
 public:
  struct Placement {
    std::vector<long> sites;  // torus site (or edge) indices, first factor outermost
    MatrixXcd op;
    cplx weight;
  };

  static GlobalOperator build(const VectorXd& coeffs, const OperatorBasis& basis, const FiniteTorus& torus,
                              const Momentum& q);
  static GlobalOperator build_local(const MatrixXcd& local, const SupportGeometry& geom, const FiniteTorus& torus,
                                    const Momentum& q);
  // Edge-lattice assembly of a duality image; dimension 2^(2 Lx Ly).
  static GlobalOperator build_edge(const EdgeOperator& term, const FiniteTorus& torus, const Momentum& q);
  // Single placement at fixed sites (no translation sum).
  static GlobalOperator at_sites(const MatrixXcd& op, const std::vector<long>& sites, long site_dim, long n_sites);

  long dim() const { return dim_; }
  long site_dim() const { return site_dim_; }
  const std::vector<Placement>& placements() const { return placements_; }

  VectorXcd apply(const VectorXcd& v) const;
  VectorXd apply_real(const VectorXd& v) const;  // valid when all weights/ops are real
  bool is_real() const;
  MatrixXcd dense() const;  // dim <= 4096esque guard
  double hermiticity_deviation() const;

 private:
  long dim_ = 0, site_dim_ = 2, n_sites_ = 0;
  std::vector<Placement> placements_;
};

struct EnergyVariance {
  double energy_per_site;
  double variance_per_site;
};
EnergyVariance expectation_and_variance(const GlobalOperator& h, const VectorXcd& state, long n_sites);

struct SpectrumResult {
  VectorXd eigenvalues;  // sorted ascending
  long zero_modes = 0;   // |E| < threshold
  std::optional<MatrixXd> eigenvectors;
  double residual = 0.0;  // extremal mode: ||H v - e v|| of the returned pair
  bool converged = true;
};
// Full dense spectrum (dim <= 4096).
SpectrumResult full_spectrum(const GlobalOperator& h, double zero_threshold = 1e-10, bool want_vectors = false);
// Extremal (lowest) eigenpair via restarted Lanczos with the normalized
// all-ones start vector.
SpectrumResult lowest_eigenpair(const GlobalOperator& h, long max_iter = 2000, double tol = 1e-10);

// Static structure factor matrix entries
//   S_ab(q) = sum_x e^{-i q.x} [ <o^a_x o^b_0> - <o^a><o^b> ].
enum class OraclePath { rdm, statevector };
struct ExactSfResult {
  MatrixXd s_raw;          // real part; imaginary part must vanish at the supported momenta
  double max_imag = 0.0;
  double max_asym = 0.0;   // ||S - S^T||_max as a quality metric
};
ExactSfResult exact_structure_factor(const PepsUnitCell& peps, const FiniteTorus& torus, const OperatorBasis& basis,
                                     const Momentum& q, OraclePath path = OraclePath::rdm);
// Same contraction against an explicitly given state (used for edge-lattice
// states and cross-checks).
ExactSfResult statevector_structure_factor(const VectorXcd& psi, const FiniteTorus& torus, const OperatorBasis& basis,
                                           const Momentum& q);

}  // namespace pepsx

#endif
