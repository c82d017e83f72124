#include "pepsx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pepsx {

namespace {

long product(const std::vector<long>& v) {
  long p = 1;
  for (long x : v) p *= x;
  return p;
}

std::vector<long> row_major_strides(const std::vector<long>& ext) {
  std::vector<long> st(ext.size(), 1);
  for (long i = static_cast<long>(ext.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * ext[i + 1];
  return st;
}

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("tensor: " + msg);
}

}  // namespace

Tensor::Tensor(std::vector<long> extents, bool real) : ext_(std::move(extents)), real_(real) {
  for (long e : ext_)
    if (e <= 0) fail("extents must be positive");
  a_.assign(static_cast<size_t>(product(ext_)), cplx(0.0, 0.0));
}

Tensor Tensor::zeros(std::vector<long> extents, bool real) { return Tensor(std::move(extents), real); }

Tensor Tensor::identity_matrix(long n) {
  Tensor t({n, n});
  for (long i = 0; i < n; ++i) t.a_[static_cast<size_t>(i * n + i)] = 1.0;
  return t;
}

Tensor Tensor::from_matrix(const MatrixXcd& m) {
  Tensor t({m.rows(), m.cols()}, false);
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) t.a_[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
  t.refresh_real_flag();
  return t;
}

Tensor Tensor::from_matrix(const MatrixXd& m) {
  Tensor t({m.rows(), m.cols()}, true);
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) t.a_[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
  return t;
}

long Tensor::offset(const std::vector<long>& idx) const {
  if (idx.size() != ext_.size()) fail("index rank mismatch");
  long off = 0, stride = 1;
  for (long i = static_cast<long>(ext_.size()) - 1; i >= 0; --i) {
    long k = idx[static_cast<size_t>(i)];
    if (k < 0 || k >= ext_[static_cast<size_t>(i)]) fail("index out of range");
    off += k * stride;
    stride *= ext_[static_cast<size_t>(i)];
  }
  return off;
}

cplx& Tensor::at(const std::vector<long>& idx) { return a_[static_cast<size_t>(offset(idx))]; }
const cplx& Tensor::at(const std::vector<long>& idx) const { return a_[static_cast<size_t>(offset(idx))]; }

Tensor& Tensor::operator*=(cplx s) {
  for (auto& x : a_) x *= s;
  if (s.imag() != 0.0) real_ = false;
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& x : a_) x *= s;
  return *this;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  if (ext_ != o.ext_) fail("shape mismatch in +=");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  real_ = real_ && o.real_;
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  if (ext_ != o.ext_) fail("shape mismatch in -=");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  real_ = real_ && o.real_;
  return *this;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (const auto& x : a_) m = std::max(m, std::abs(x));
  return m;
}

double Tensor::norm() const {
  double s = 0.0;
  for (const auto& x : a_) s += std::norm(x);
  return std::sqrt(s);
}

bool Tensor::all_finite() const {
  for (const auto& x : a_)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

void Tensor::check_finite(const char* where) const {
  if (!all_finite()) throw std::runtime_error(std::string("non-finite tensor after ") + where);
}

void Tensor::refresh_real_flag() {
  for (const auto& x : a_)
    if (x.imag() != 0.0) {
      real_ = false;
      return;
    }
  real_ = true;
}

Tensor Tensor::reshaped(std::vector<long> new_ext) const {
  if (product(new_ext) != size()) fail("reshape size mismatch");
  Tensor t = *this;
  t.ext_ = std::move(new_ext);
  return t;
}

Tensor Tensor::conjugated() const {
  Tensor t = *this;
  if (!real_)
    for (auto& x : t.a_) x = std::conj(x);
  return t;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(cplx s, Tensor t) { return t *= s; }
Tensor operator*(double s, Tensor t) { return t *= s; }

Tensor permuted(const Tensor& t, const std::vector<long>& perm) {
  const long r = t.rank();
  if (static_cast<long>(perm.size()) != r) fail("permutation rank mismatch");
  std::vector<bool> seen(static_cast<size_t>(r), false);
  std::vector<long> new_ext(static_cast<size_t>(r));
  for (long k = 0; k < r; ++k) {
    long p = perm[static_cast<size_t>(k)];
    if (p < 0 || p >= r || seen[static_cast<size_t>(p)]) fail("bad permutation");
    seen[static_cast<size_t>(p)] = true;
    new_ext[static_cast<size_t>(k)] = t.extent(p);
  }
  Tensor out(new_ext, t.is_real());
  if (r == 0) {
    out[0] = t[0];
    return out;
  }
  const auto in_st = row_major_strides(t.extents());
  // Stride of output axis k in the input layout.
  std::vector<long> st(static_cast<size_t>(r));
  for (long k = 0; k < r; ++k) st[static_cast<size_t>(k)] = in_st[static_cast<size_t>(perm[static_cast<size_t>(k)])];

  const long inner = new_ext[static_cast<size_t>(r - 1)];
  const long inner_st = st[static_cast<size_t>(r - 1)];
  const long outer_rank = r - 1;
  std::vector<long> ctr(static_cast<size_t>(outer_rank), 0);
  const cplx* src = t.data();
  cplx* dst = out.data();
  long n_outer = 1;
  for (long k = 0; k < outer_rank; ++k) n_outer *= new_ext[static_cast<size_t>(k)];
  long in_off = 0;
  for (long blk = 0; blk < n_outer; ++blk) {
    if (inner_st == 1) {
      std::copy(src + in_off, src + in_off + inner, dst);
      dst += inner;
    } else {
      long o = in_off;
      for (long i = 0; i < inner; ++i, o += inner_st) *dst++ = src[o];
    }
    // odometer increment over the outer axes
    for (long k = outer_rank - 1; k >= 0; --k) {
      in_off += st[static_cast<size_t>(k)];
      if (++ctr[static_cast<size_t>(k)] < new_ext[static_cast<size_t>(k)]) break;
      in_off -= st[static_cast<size_t>(k)] * new_ext[static_cast<size_t>(k)];
      ctr[static_cast<size_t>(k)] = 0;
    }
  }
  return out;
}

Tensor trace_pair(const Tensor& t, long i, long j) {
  const long r = t.rank();
  if (i == j || i < 0 || j < 0 || i >= r || j >= r) fail("trace_pair: bad indices");
  if (t.extent(i) != t.extent(j)) fail("trace_pair: extent mismatch");
  if (i > j) std::swap(i, j);
  std::vector<long> perm, out_ext;
  for (long k = 0; k < r; ++k)
    if (k != i && k != j) {
      perm.push_back(k);
      out_ext.push_back(t.extent(k));
    }
  perm.push_back(i);
  perm.push_back(j);
  Tensor p = permuted(t, perm);
  Tensor out(out_ext.empty() ? std::vector<long>{} : out_ext, t.is_real());
  const long e = t.extent(i);
  const long blocks = out.size();
  for (long b = 0; b < blocks; ++b) {
    cplx acc = 0.0;
    const cplx* base = p.data() + b * e * e;
    for (long k = 0; k < e; ++k) acc += base[k * e + k];
    out[b] = acc;
  }
  return out;
}

namespace {

// Split real parts into a MatrixXd without a complex temporary.
MatrixXd real_matrix(const Tensor& t, long rows, long cols) {
  MatrixXd m(rows, cols);
  const cplx* p = t.data();
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = p[i * cols + j].real();
  return m;
}

MatrixXcd cplx_matrix(const Tensor& t, long rows, long cols) {
  MatrixXcd m(rows, cols);
  const cplx* p = t.data();
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = p[i * cols + j];
  return m;
}

}  // namespace

Tensor contract(const Tensor& a, const Tensor& b, const std::vector<std::pair<long, long>>& pairs) {
  const long ra = a.rank(), rb = b.rank();
  std::vector<bool> ca(static_cast<size_t>(ra), false), cb(static_cast<size_t>(rb), false);
  for (const auto& [ia, ib] : pairs) {
    if (ia < 0 || ia >= ra || ib < 0 || ib >= rb) fail("contract: index out of range");
    if (ca[static_cast<size_t>(ia)] || cb[static_cast<size_t>(ib)]) fail("contract: repeated index");
    if (a.extent(ia) != b.extent(ib)) fail("contract: extent mismatch");
    ca[static_cast<size_t>(ia)] = true;
    cb[static_cast<size_t>(ib)] = true;
  }
  std::vector<long> perm_a, perm_b, out_ext;
  for (long i = 0; i < ra; ++i)
    if (!ca[static_cast<size_t>(i)]) {
      perm_a.push_back(i);
      out_ext.push_back(a.extent(i));
    }
  long m = product(out_ext);
  long k = 1;
  for (const auto& [ia, ib] : pairs) {
    perm_a.push_back(ia);
    k *= a.extent(ia);
  }
  for (const auto& [ia, ib] : pairs) perm_b.push_back(ib);
  long n = 1;
  for (long i = 0; i < rb; ++i)
    if (!cb[static_cast<size_t>(i)]) {
      perm_b.push_back(i);
      out_ext.push_back(b.extent(i));
      n *= b.extent(i);
    }
  Tensor pa = permuted(a, perm_a);
  Tensor pb = permuted(b, perm_b);
  if (out_ext.empty()) out_ext = {};  // scalar result kept as rank-0
  Tensor out(out_ext.empty() ? std::vector<long>{} : out_ext, a.is_real() && b.is_real());

  if (a.is_real() && b.is_real()) {
    MatrixXd ma = real_matrix(pa, m, k);
    MatrixXd mb = real_matrix(pb, k, n);
    MatrixXd mc = ma * mb;
    cplx* p = out.data();
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < n; ++j) p[i * n + j] = mc(i, j);
  } else {
    MatrixXcd ma = cplx_matrix(pa, m, k);
    MatrixXcd mb = cplx_matrix(pb, k, n);
    MatrixXcd mc = ma * mb;
    cplx* p = out.data();
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < n; ++j) p[i * n + j] = mc(i, j);
  }
  return out;
}

MatrixXcd Tensor::matricized(const std::vector<long>& row_indices, const std::vector<long>& col_indices) const {
  const long r = rank();
  if (static_cast<long>(row_indices.size() + col_indices.size()) != r) fail("matricize: index split must cover all indices");
  std::vector<long> perm;
  perm.insert(perm.end(), row_indices.begin(), row_indices.end());
  perm.insert(perm.end(), col_indices.begin(), col_indices.end());
  Tensor p = permuted(*this, perm);
  long m = 1, n = 1;
  for (long i : row_indices) m *= extent(i);
  for (long i : col_indices) n *= extent(i);
  return cplx_matrix(p, m, n);
}

SvdResult svd_truncate(const Tensor& t, const std::vector<long>& row_indices, const std::vector<long>& col_indices,
                       long max_rank, double rel_cutoff) {
  if (row_indices.empty() || col_indices.empty()) fail("svd_truncate: empty index set");
  if (max_rank <= 0) fail("svd_truncate: max_rank must be positive");
  if (rel_cutoff < 0) fail("svd_truncate: negative cutoff");
  t.check_finite("svd input");

  std::vector<long> row_ext, col_ext;
  for (long i : row_indices) row_ext.push_back(t.extent(i));
  for (long i : col_indices) col_ext.push_back(t.extent(i));
  const long m = product(row_ext), n = product(col_ext);

  MatrixXcd u_full;
  VectorXd s_full;
  MatrixXcd v_full;  // rows of v_full are right singular vectors (V^H)
  const bool real = t.is_real();
  {
    std::vector<long> perm;
    perm.insert(perm.end(), row_indices.begin(), row_indices.end());
    perm.insert(perm.end(), col_indices.begin(), col_indices.end());
    Tensor p = permuted(t, perm);
    if (real) {
      MatrixXd mat = real_matrix(p, m, n);
      Eigen::BDCSVD<MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
      u_full = svd.matrixU().cast<cplx>();
      s_full = svd.singularValues();
      v_full = svd.matrixV().adjoint().cast<cplx>();
    } else {
      MatrixXcd mat = cplx_matrix(p, m, n);
      Eigen::BDCSVD<MatrixXcd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
      u_full = svd.matrixU();
      s_full = svd.singularValues();
      v_full = svd.matrixV().adjoint();
    }
  }
  const long full = s_full.size();
  const double s0 = full > 0 ? s_full(0) : 0.0;

  long keep = 0;
  while (keep < full && s_full(keep) > rel_cutoff * s0 && s_full(keep) > 0.0) ++keep;
  SvdResult res;
  if (keep > max_rank) {
    // Keep a degenerate multiplet whole when it straddles the boundary.
    const double tol = 1e-10 * std::max(s0, 1e-300);
    long lo = max_rank;
    while (lo > 0 && s_full(lo - 1) - s_full(max_rank - 1) < tol && s_full(max_rank - 1) - s_full(lo - 1) < tol) --lo;
    long hi = max_rank;
    while (hi < keep && std::abs(s_full(hi) - s_full(max_rank - 1)) < tol) ++hi;
    if (hi > max_rank) {
      if (hi <= max_rank + 4) {
        keep = hi;
      } else {
        keep = max_rank;
        res.degeneracy_split = true;
      }
    } else {
      keep = max_rank;
    }
    (void)lo;
  }
  if (keep == 0) keep = 1;  // zero matrix still yields a well-formed factorization

  double total = 0.0, kept_w = 0.0;
  for (long i = 0; i < full; ++i) total += s_full(i) * s_full(i);
  for (long i = 0; i < keep; ++i) kept_w += s_full(i) * s_full(i);
  res.discarded_weight = total > 0 ? (total - kept_w) / total : 0.0;
  res.kept = keep;

  MatrixXcd u = u_full.leftCols(keep);
  MatrixXcd v = v_full.topRows(keep);
  // Gauge fix: largest-magnitude entry of each left vector real positive.
  for (long j = 0; j < keep; ++j) {
    long imax = 0;
    double amax = 0.0;
    for (long i = 0; i < m; ++i) {
      double a = std::abs(u(i, j));
      if (a > amax) {
        amax = a;
        imax = i;
      }
    }
    if (amax > 0) {
      cplx ph = u(imax, j) / amax;
      u.col(j) *= std::conj(ph);
      v.row(j) *= ph;
    }
  }

  row_ext.push_back(keep);
  res.u = Tensor(row_ext, real);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < keep; ++j) res.u[i * keep + j] = u(i, j);
  std::vector<long> vext{keep};
  vext.insert(vext.end(), col_ext.begin(), col_ext.end());
  res.v = Tensor(vext, real);
  for (long i = 0; i < keep; ++i)
    for (long j = 0; j < n; ++j) res.v[i * n + j] = v(i, j);
  if (real) {
    // complex SVD of a real matrix can pick complex gauge; with the fix above
    // columns are real, but scrub rounding leftovers defensively
    res.u.refresh_real_flag();
    res.v.refresh_real_flag();
  }
  res.s.assign(s_full.data(), s_full.data() + keep);
  return res;
}

EighResult eigh_sym(const MatrixXd& m) {
  if (m.rows() != m.cols()) fail("eigh_sym: non-square input");
  double dev = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (dev >= 1e-10) fail("eigh_sym: symmetry deviation " + std::to_string(dev));
  MatrixXd s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigh_sym: solver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

EighResult eigh_sym(const Tensor& t) {
  if (t.rank() != 2 || t.extent(0) != t.extent(1)) fail("eigh_sym: non-square input");
  const long n = t.extent(0);
  MatrixXd m(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      cplx x = t[i * n + j];
      if (std::abs(x.imag()) >= 1e-10) fail("eigh_sym: complex input");
      m(i, j) = x.real();
    }
  return eigh_sym(m);
}

ProductSvd randomized_product_svd(const MatrixXd& a, const MatrixXd& b, long k, long oversample, int power_iters) {
  const long m = a.rows(), n = b.cols();
  const long l = std::min(std::min(m, n), k + oversample);
  // Fixed-seed Gaussian test matrix: independent of call site and wall clock.
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (static_cast<uint64_t>(m) << 32) ^ static_cast<uint64_t>(n));
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd omega(n, l);
  for (long j = 0; j < l; ++j)
    for (long i = 0; i < n; ++i) omega(i, j) = g(rng);

  MatrixXd y = a * (b * omega);
  Eigen::HouseholderQR<MatrixXd> qr(y);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(m, l);
  for (int it = 0; it < power_iters; ++it) {
    MatrixXd z = b.transpose() * (a.transpose() * q);
    Eigen::HouseholderQR<MatrixXd> qrz(z);
    MatrixXd qz = qrz.householderQ() * MatrixXd::Identity(n, l);
    MatrixXd y2 = a * (b * qz);
    Eigen::HouseholderQR<MatrixXd> qry(y2);
    q = qry.householderQ() * MatrixXd::Identity(m, l);
  }
  MatrixXd small = (q.transpose() * a) * b;  // l x n
  Eigen::BDCSVD<MatrixXd> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
  long keep = std::min(k, static_cast<long>(svd.singularValues().size()));
  ProductSvd out;
  out.u = q * svd.matrixU().leftCols(keep);
  out.s = svd.singularValues().head(keep);
  out.v = svd.matrixV().leftCols(keep);
  // Same gauge convention as svd_truncate.
  for (long j = 0; j < keep; ++j) {
    long imax = 0;
    out.u.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.u(imax, j) < 0) {
      out.u.col(j) *= -1.0;
      out.v.col(j) *= -1.0;
    }
  }
  return out;
}

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace pepsx
