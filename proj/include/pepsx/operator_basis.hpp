#ifndef PEPSX_OPERATOR_BASIS_HPP
#define PEPSX_OPERATOR_BASIS_HPP

#include <map>
#include <string>
#include <vector>

#include "pepsx/lattice.hpp"
#include "pepsx/tensor.hpp"

namespace pepsx {

MatrixXcd pauli_x();
MatrixXcd pauli_y();
MatrixXcd pauli_z();

// Spin operators for dimension d = 2s+1, largest Sz first.
struct SpinOps {
  MatrixXcd sx, sy, sz;
};
SpinOps spin_operators(long d);

// <j1 m1; j2 m2 | J M> with the Condon-Shortley sign convention.
double clebsch_gordan(double j1, double m1, double j2, double m2, double J, double M);

// Orthonormal Hermitian basis on a k-site support. Elements are generated
// on demand for large products; small bases can be materialized.
class OperatorBasis {
 public:
  OperatorBasis(SupportGeometry geometry, std::vector<MatrixXcd> site_elements,
                std::vector<std::string> site_labels);
  // Explicit element list (used for the reduced bases).
  static OperatorBasis explicit_basis(SupportGeometry geometry, std::vector<MatrixXcd> elements,
                                      std::vector<std::string> labels);

  const SupportGeometry& geometry() const { return geom_; }
  long size() const { return size_; }
  long matrix_dim() const { return geom_.dim(); }
  bool is_product_basis() const { return !explicit_; }

  MatrixXcd element(long i) const;
  std::string label(long i) const;
  // Site-basis labels of a product element, one per geometry site.
  std::vector<long> site_labels_of(long i) const;
  long index_of_site_labels(const std::vector<long>& labels) const;
  long site_basis_size() const { return static_cast<long>(site_elems_.size()); }
  const MatrixXcd& site_element(long j) const { return site_elems_.at(static_cast<size_t>(j)); }

  // Coefficients of a Hermitian matrix in this basis (trace pairing).
  VectorXd expand(const MatrixXcd& op, double* residual = nullptr) const;
  MatrixXcd materialize(const VectorXd& coeffs) const;

 private:
  SupportGeometry geom_;
  std::vector<MatrixXcd> site_elems_;
  std::vector<std::string> site_labels_;
  bool explicit_ = false;
  std::vector<MatrixXcd> elems_;
  std::vector<std::string> labels_;
  long size_ = 0;
};

// d^2 trace-orthonormal Hermitian matrices; identity/sqrt(d) first, then
// symmetric, antisymmetric and diagonal generators, Frobenius-normalized.
OperatorBasis hermitian_site_basis(long d);
std::vector<MatrixXcd> hermitian_site_matrices(long d);
std::vector<std::string> hermitian_site_labels(long d);

// All k-fold tensor products of the single-site basis, ordered
// lexicographically by site then label.
OperatorBasis product_basis(const SupportGeometry& geometry);

// Orthonormal coefficient vectors spanning the trivial kernel directions
// (identity direction plus placement combinations whose momentum-weighted
// lattice sum cancels).
std::vector<VectorXd> trivial_subspace(const SupportGeometry& geometry, const Momentum& q);

struct EmbeddedSolutions {
  std::vector<VectorXcd> raw;         // one per placement
  std::vector<VectorXd> orthonormal;  // real span (valid at the +-1 momenta)
};
EmbeddedSolutions embed_smaller_support(const VectorXd& coeffs, const SupportGeometry& small_geom,
                                        const SupportGeometry& big_geom, const Momentum& q);

// 39 orthonormal spin-1/2 strings on the plaquette: bond and diagonal
// Heisenberg pieces plus the symmetrized four-site products.
OperatorBasis su2_reduced_plaquette_basis();
// Indices of the four coefficient classes (bond, diagonal, parallel product,
// crossed product, all-site) used when reading off model couplings.
struct Su2ClassIndex {
  std::vector<long> nn, diag, quad_parallel, quad_cross, all_same;
};
Su2ClassIndex su2_class_index();

// Restricted 2x3-window basis: strings supported on the left or the right
// 2x2 sub-square, each acting as identity on the excluded column.
OperatorBasis medial_restricted_basis();

// --- Z2 lattice gauge duality -------------------------------------------
// Edges of the square lattice: orientation 0 = horizontal (from (x,y) to
// (x+1,y)), 1 = vertical (from (x,y) to (x,y+1)).
struct EdgeRef {
  int orient = 0;
  long x = 0;
  long y = 0;
  friend bool operator<(const EdgeRef& a, const EdgeRef& b) {
    if (a.orient != b.orient) return a.orient < b.orient;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  }
  friend bool operator==(const EdgeRef& a, const EdgeRef& b) {
    return a.orient == b.orient && a.x == b.x && a.y == b.y;
  }
};

// Weighted sum of Pauli strings on lattice edges.
struct EdgeOperator {
  struct Term {
    cplx coeff;
    std::map<EdgeRef, char> paulis;  // 'X','Y','Z'
  };
  std::vector<Term> terms;
};

// Maps a plaquette-local vertex-spin operator (polynomial in I,X,Z strings,
// commuting with the global X-flip) to the corresponding edge-spin operator:
// X at a vertex becomes the four-edge X star, a ZZ pair becomes Z on the
// edge path joining the two vertices.
EdgeOperator wegner_dual(const MatrixXcd& plaquette_term);

// Vertex-spin Pauli string on plaquette corners -> dense 16x16 helper.
MatrixXcd plaquette_pauli_string(const std::string& s4);

}  // namespace pepsx

#endif
