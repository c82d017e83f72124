#ifndef PEPSX_TENSOR_HPP
#define PEPSX_TENSOR_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pepsx {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Dense tensor, row-major, complex double storage. A `real` flag tracks
// tensors whose imaginary parts are exactly zero so that contractions can
// run on the real fast path (all benchmark states here are real).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> extents, bool real = true);
  static Tensor zeros(std::vector<long> extents, bool real = true);
  static Tensor identity_matrix(long n);
  static Tensor from_matrix(const MatrixXcd& m);
  static Tensor from_matrix(const MatrixXd& m);

  long rank() const { return static_cast<long>(ext_.size()); }
  const std::vector<long>& extents() const { return ext_; }
  long extent(long i) const { return ext_.at(static_cast<size_t>(i)); }
  long size() const { return static_cast<long>(a_.size()); }
  bool is_real() const { return real_; }
  void mark_complex() { real_ = false; }

  cplx* data() { return a_.data(); }
  const cplx* data() const { return a_.data(); }
  cplx& at(const std::vector<long>& idx);
  const cplx& at(const std::vector<long>& idx) const;
  cplx& operator[](long i) { return a_[static_cast<size_t>(i)]; }
  const cplx& operator[](long i) const { return a_[static_cast<size_t>(i)]; }

  // Flat row-major offset of a multi-index.
  long offset(const std::vector<long>& idx) const;

  Tensor& operator*=(cplx s);
  Tensor& operator*=(double s);
  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);

  double max_abs() const;
  double norm() const;  // Frobenius
  bool all_finite() const;
  void check_finite(const char* where) const;
  // Drops the real flag if any imaginary part is nonzero; call after writes.
  void refresh_real_flag();

  // Reinterpret with new extents of equal total size.
  Tensor reshaped(std::vector<long> new_ext) const;
  // Matrix view over a (rows|cols) index split. `row_indices` then
  // `col_indices` must cover all indices exactly once.
  MatrixXcd matricized(const std::vector<long>& row_indices,
                       const std::vector<long>& col_indices) const;

  Tensor conjugated() const;

 private:
  std::vector<long> ext_;
  std::vector<cplx> a_;
  bool real_ = true;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(cplx s, Tensor t);
Tensor operator*(double s, Tensor t);

// Reorder indices: result index k is input index perm[k].
Tensor permuted(const Tensor& t, const std::vector<long>& perm);

// Sum over the diagonal of two equal-extent indices of one tensor.
Tensor trace_pair(const Tensor& t, long i, long j);

// Pairwise index contraction. Result carries the uncontracted indices of
// `a` (original order) followed by those of `b`.
Tensor contract(const Tensor& a, const Tensor& b,
                const std::vector<std::pair<long, long>>& pairs);

struct SvdResult {
  Tensor u;                // [row extents..., k]
  std::vector<double> s;   // descending, nonnegative
  Tensor v;                // [k, col extents...]; reconstruct = u diag(s) v
  double discarded_weight = 0.0;
  bool degeneracy_split = false;  // multiplet cut at the truncation boundary
  long kept = 0;
};

// Truncated SVD across a (rows|cols) split. Keeps at most max_rank values
// (a degenerate multiplet at the boundary may extend this by up to 4),
// drops values below rel_cutoff * s[0]. Left singular vectors are gauge
// fixed: largest-magnitude entry real positive.
SvdResult svd_truncate(const Tensor& t, const std::vector<long>& row_indices,
                       const std::vector<long>& col_indices, long max_rank,
                       double rel_cutoff);

struct EighResult {
  VectorXd eigenvalues;  // ascending
  MatrixXd eigenvectors; // columns
};

// Symmetric real eigensolver; rejects inputs with |m - m^T|_max >= 1e-10 or
// imaginary parts above the same threshold.
EighResult eigh_sym(const MatrixXd& m);
EighResult eigh_sym(const Tensor& m);

// Deterministic randomized top-k SVD of the product A*B (neither formed).
// Used for CTMRG projectors at large bond dimension; seeded from fixed
// constants only, so reruns are bit-stable.
struct ProductSvd {
  MatrixXd u;
  VectorXd s;
  MatrixXd v;  // columns; A*B ~= u * s.asDiagonal() * v^T
};
ProductSvd randomized_product_svd(const MatrixXd& a, const MatrixXd& b,
                                  long k, long oversample = 24,
                                  int power_iters = 2);

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b);
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

}  // namespace pepsx

#endif
