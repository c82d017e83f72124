#include "pepsx/operator_basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pepsx {

namespace {

constexpr cplx kI{0.0, 1.0};

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("operator_basis: " + msg); }

double factorial(long n) {
  static const std::vector<double> table = [] {
    std::vector<double> t(31, 1.0);
    for (long i = 1; i <= 30; ++i) t[static_cast<size_t>(i)] = t[static_cast<size_t>(i - 1)] * static_cast<double>(i);
    return t;
  }();
  if (n < 0) return 0.0;
  return table.at(static_cast<size_t>(n));
}

long to_twice(double j) {
  long t = std::lround(2.0 * j);
  if (std::abs(2.0 * j - static_cast<double>(t)) > 1e-9) fail("clebsch_gordan: non half-integer spin");
  return t;
}

}  // namespace

MatrixXcd pauli_x() {
  MatrixXcd m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

MatrixXcd pauli_y() {
  MatrixXcd m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

MatrixXcd pauli_z() {
  MatrixXcd m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

SpinOps spin_operators(long d) {
  if (d < 2) fail("spin_operators: d >= 2");
  const double s = 0.5 * static_cast<double>(d - 1);
  MatrixXcd sz = MatrixXcd::Zero(d, d), sp = MatrixXcd::Zero(d, d);
  for (long k = 0; k < d; ++k) {
    double m = s - static_cast<double>(k);
    sz(k, k) = m;
    if (k > 0) sp(k - 1, k) = std::sqrt(s * (s + 1) - m * (m + 1));  // raises m -> m+1
  }
  MatrixXcd sm = sp.adjoint();
  SpinOps ops;
  ops.sz = sz;
  ops.sx = 0.5 * (sp + sm);
  ops.sy = -0.5 * kI * (sp - sm);
  return ops;
}

double clebsch_gordan(double j1, double m1, double j2, double m2, double J, double M) {
  long tj1 = to_twice(j1), tm1 = to_twice(m1), tj2 = to_twice(j2), tm2 = to_twice(m2), tJ = to_twice(J), tM = to_twice(M);
  if (tm1 + tm2 != tM) return 0.0;
  if (tJ > tj1 + tj2 || tJ < std::abs(tj1 - tj2)) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tM) > tJ) return 0.0;
  if ((tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tJ + tM) % 2 != 0) return 0.0;

  auto f = [](long twice) { return factorial(twice / 2); };
  double pref = std::sqrt((static_cast<double>(tJ) + 1.0) * f(tJ + tj1 - tj2) * f(tJ - tj1 + tj2) * f(tj1 + tj2 - tJ) /
                          f(tj1 + tj2 + tJ + 2));
  pref *= std::sqrt(f(tJ + tM) * f(tJ - tM) * f(tj1 - tm1) * f(tj1 + tm1) * f(tj2 - tm2) * f(tj2 + tm2));
  double sum = 0.0;
  long kmin = std::max({0L, (tj2 - tJ - tm1) / 2, (tj1 + tm2 - tJ) / 2});
  long kmax = std::min({(tj1 + tj2 - tJ) / 2, (tj1 - tm1) / 2, (tj2 + tm2) / 2});
  for (long k = kmin; k <= kmax; ++k) {
    double den = factorial(k) * f(tj1 + tj2 - tJ - 2 * k) * f(tj1 - tm1 - 2 * k) * f(tj2 + tm2 - 2 * k) *
                 f(tJ - tj2 + tm1 + 2 * k) * f(tJ - tj1 - tm2 + 2 * k);
    sum += ((k % 2 == 0) ? 1.0 : -1.0) / den;
  }
  return pref * sum;
}

std::vector<MatrixXcd> hermitian_site_matrices(long d) {
  if (d < 2) fail("hermitian_site_basis: d >= 2");
  std::vector<MatrixXcd> out;
  out.push_back(MatrixXcd::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  const double r = 1.0 / std::sqrt(2.0);
  for (long j = 0; j < d; ++j)
    for (long k = j + 1; k < d; ++k) {
      MatrixXcd m = MatrixXcd::Zero(d, d);
      m(j, k) = r;
      m(k, j) = r;
      out.push_back(m);
    }
  for (long j = 0; j < d; ++j)
    for (long k = j + 1; k < d; ++k) {
      MatrixXcd m = MatrixXcd::Zero(d, d);
      m(j, k) = -kI * r;
      m(k, j) = kI * r;
      out.push_back(m);
    }
  for (long l = 1; l < d; ++l) {
    MatrixXcd m = MatrixXcd::Zero(d, d);
    double norm = 1.0 / std::sqrt(static_cast<double>(l) * (static_cast<double>(l) + 1.0));
    for (long i = 0; i < l; ++i) m(i, i) = norm;
    m(l, l) = -static_cast<double>(l) * norm;
    out.push_back(m);
  }
  return out;
}

std::vector<std::string> hermitian_site_labels(long d) {
  std::vector<std::string> out;
  if (d == 2) return {"I", "X", "Y", "Z"};
  out.push_back("I");
  for (long j = 0; j < d; ++j)
    for (long k = j + 1; k < d; ++k) out.push_back("S" + std::to_string(j) + std::to_string(k));
  for (long j = 0; j < d; ++j)
    for (long k = j + 1; k < d; ++k) out.push_back("A" + std::to_string(j) + std::to_string(k));
  for (long l = 1; l < d; ++l) out.push_back("D" + std::to_string(l));
  return out;
}

OperatorBasis::OperatorBasis(SupportGeometry geometry, std::vector<MatrixXcd> site_elements,
                             std::vector<std::string> site_labels)
    : geom_(std::move(geometry)), site_elems_(std::move(site_elements)), site_labels_(std::move(site_labels)) {
  size_ = 1;
  for (long s = 0; s < geom_.sites(); ++s) size_ *= static_cast<long>(site_elems_.size());
}

OperatorBasis OperatorBasis::explicit_basis(SupportGeometry geometry, std::vector<MatrixXcd> elements,
                                            std::vector<std::string> labels) {
  OperatorBasis b(std::move(geometry), {}, {});
  b.explicit_ = true;
  b.elems_ = std::move(elements);
  b.labels_ = std::move(labels);
  b.size_ = static_cast<long>(b.elems_.size());
  return b;
}

std::vector<long> OperatorBasis::site_labels_of(long i) const {
  if (explicit_) fail("site_labels_of: not a product basis");
  const long nb = static_cast<long>(site_elems_.size());
  std::vector<long> lab(static_cast<size_t>(geom_.sites()));
  for (long s = geom_.sites() - 1; s >= 0; --s) {
    lab[static_cast<size_t>(s)] = i % nb;
    i /= nb;
  }
  return lab;
}

long OperatorBasis::index_of_site_labels(const std::vector<long>& labels) const {
  if (explicit_) fail("index_of_site_labels: not a product basis");
  const long nb = static_cast<long>(site_elems_.size());
  long i = 0;
  for (long s = 0; s < geom_.sites(); ++s) i = i * nb + labels.at(static_cast<size_t>(s));
  return i;
}

MatrixXcd OperatorBasis::element(long i) const {
  if (i < 0 || i >= size_) fail("element index out of range");
  if (explicit_) return elems_[static_cast<size_t>(i)];
  auto lab = site_labels_of(i);
  MatrixXcd m = site_elems_[static_cast<size_t>(lab[0])];
  for (long s = 1; s < geom_.sites(); ++s) m = kron(m, site_elems_[static_cast<size_t>(lab[static_cast<size_t>(s)])]);
  return m;
}

std::string OperatorBasis::label(long i) const {
  if (explicit_) return labels_.at(static_cast<size_t>(i));
  auto lab = site_labels_of(i);
  std::string out;
  for (size_t s = 0; s < lab.size(); ++s) {
    if (s) out += ".";
    out += site_labels_[static_cast<size_t>(lab[s])];
  }
  return out;
}

VectorXd OperatorBasis::expand(const MatrixXcd& op, double* residual) const {
  VectorXd c(size_);
  MatrixXcd rem = op;
  for (long i = 0; i < size_; ++i) {
    MatrixXcd e = element(i);
    cplx t = (e.adjoint() * op).trace();
    if (std::abs(t.imag()) > 1e-9) fail("expand: non-Hermitian projection");
    c(i) = t.real();
    rem -= c(i) * e;
  }
  if (residual) *residual = rem.cwiseAbs().maxCoeff();
  return c;
}

MatrixXcd OperatorBasis::materialize(const VectorXd& coeffs) const {
  if (coeffs.size() != size_) fail("materialize: coefficient length mismatch");
  MatrixXcd m = MatrixXcd::Zero(matrix_dim(), matrix_dim());
  for (long i = 0; i < size_; ++i)
    if (coeffs(i) != 0.0) m += coeffs(i) * element(i);
  return m;
}

OperatorBasis hermitian_site_basis(long d) {
  return OperatorBasis(SupportGeometry::site(d), hermitian_site_matrices(d), hermitian_site_labels(d));
}

OperatorBasis product_basis(const SupportGeometry& geometry) {
  return OperatorBasis(geometry, hermitian_site_matrices(geometry.phys_dim), hermitian_site_labels(geometry.phys_dim));
}

namespace {

// Orthonormal basis of the complement of v within R^n (deterministic).
std::vector<VectorXd> complement_basis(const VectorXd& v) {
  const long n = v.size();
  MatrixXd m(n, n);
  m.col(0) = v.normalized();
  m.rightCols(n - 1) = MatrixXd::Identity(n, n).rightCols(n - 1);
  Eigen::HouseholderQR<MatrixXd> qr(m);
  MatrixXd q = qr.householderQ();
  std::vector<VectorXd> out;
  for (long j = 1; j < n; ++j) out.push_back(q.col(j));
  return out;
}

double real_phase(const Momentum& q, const Offset& o) {
  cplx p = std::conj(q.phase(o));  // e^{-i q.o}
  if (std::abs(p.imag()) > 1e-12) fail("trivial_subspace: momentum with non-real phases is unsupported");
  return p.real();
}

}  // namespace

std::vector<VectorXd> trivial_subspace(const SupportGeometry& geometry, const Momentum& q) {
  const bool supported_q = (q == Momentum::zero()) || (q == Momentum::pi_pi()) || (q == Momentum::pi_zero());
  if (!supported_q) fail("trivial_subspace: unsupported momentum");
  if (!(geometry.is_site() || geometry.is_pair() || geometry.is_plaquette()))
    fail("trivial_subspace: unsupported geometry");

  const long d = geometry.phys_dim;
  const long nb = d * d;
  const long k = geometry.sites();
  OperatorBasis basis = product_basis(geometry);
  std::vector<VectorXd> out;

  VectorXd ident = VectorXd::Zero(basis.size());
  ident(basis.index_of_site_labels(std::vector<long>(static_cast<size_t>(k), 0))) = 1.0;
  out.push_back(ident);
  if (k == 1) return out;

  // Single-site placements: combinations of A at different support sites
  // whose momentum-weighted lattice sums coincide and cancel.
  VectorXd phases(k);
  for (long c = 0; c < k; ++c) phases(c) = real_phase(q, geometry.offsets[static_cast<size_t>(c)]);
  auto null_combos = complement_basis(phases);
  for (long j = 1; j < nb; ++j) {
    for (const auto& w : null_combos) {
      VectorXd v = VectorXd::Zero(basis.size());
      for (long c = 0; c < k; ++c) {
        std::vector<long> lab(static_cast<size_t>(k), 0);
        lab[static_cast<size_t>(c)] = j;
        v(basis.index_of_site_labels(lab)) = w(c);
      }
      out.push_back(v);
    }
  }

  // Two-site placements exist only on the plaquette: each nearest-neighbor
  // displacement appears twice, giving one cancelling combination per
  // ordered operator pair.
  if (geometry.is_plaquette()) {
    struct PairClass {
      long c1a, c2a, c1b, c2b;
    };
    auto idx_of = [&](Offset o) {
      for (long c = 0; c < k; ++c)
        if (geometry.offsets[static_cast<size_t>(c)] == o) return c;
      fail("internal: offset not found");
    };
    std::vector<PairClass> classes = {
        {idx_of({0, 0}), idx_of({1, 0}), idx_of({0, 1}), idx_of({1, 1})},   // horizontal pairs
        {idx_of({0, 0}), idx_of({0, 1}), idx_of({1, 0}), idx_of({1, 1})}};  // vertical pairs
    for (const auto& cl : classes) {
      double p1 = phases(cl.c1a), p2 = phases(cl.c1b);
      double nrm = std::sqrt(p1 * p1 + p2 * p2);
      for (long i = 1; i < nb; ++i)
        for (long j = 1; j < nb; ++j) {
          VectorXd v = VectorXd::Zero(basis.size());
          std::vector<long> lab(static_cast<size_t>(k), 0);
          lab[static_cast<size_t>(cl.c1a)] = i;
          lab[static_cast<size_t>(cl.c2a)] = j;
          v(basis.index_of_site_labels(lab)) = p2 / nrm;
          lab.assign(static_cast<size_t>(k), 0);
          lab[static_cast<size_t>(cl.c1b)] = i;
          lab[static_cast<size_t>(cl.c2b)] = j;
          v(basis.index_of_site_labels(lab)) = -p1 / nrm;
          out.push_back(v);
        }
    }
  }
  return out;
}

EmbeddedSolutions embed_smaller_support(const VectorXd& coeffs, const SupportGeometry& small_geom,
                                        const SupportGeometry& big_geom, const Momentum& q) {
  if (small_geom.phys_dim != big_geom.phys_dim) fail("embed: physical dimension mismatch");
  const long d = small_geom.phys_dim;
  OperatorBasis small_b = product_basis(small_geom);
  OperatorBasis big_b = product_basis(big_geom);
  if (coeffs.size() != small_b.size()) fail("embed: coefficient length mismatch");

  std::set<Offset> big_set(big_geom.offsets.begin(), big_geom.offsets.end());
  std::vector<Offset> placements;
  for (const auto& t0 : big_geom.offsets) {
    // candidate translation t = t0 - small[0] = t0
    bool ok = true;
    for (const auto& o : small_geom.offsets)
      if (!big_set.count(o + t0)) {
        ok = false;
        break;
      }
    if (ok) placements.push_back(t0);
  }
  if (placements.empty()) fail("embed: small support does not fit inside the big support");

  const double pad = std::pow(std::sqrt(static_cast<double>(d)),
                              static_cast<double>(big_geom.sites() - small_geom.sites()));
  EmbeddedSolutions res;
  MatrixXd span(big_b.size(), static_cast<long>(placements.size()));
  long col = 0;
  for (const auto& t : placements) {
    cplx ph = q.phase(t);  // e^{+i q.t}
    VectorXcd v = VectorXcd::Zero(big_b.size());
    for (long i = 0; i < small_b.size(); ++i) {
      if (coeffs(i) == 0.0) continue;
      auto lab_small = small_b.site_labels_of(i);
      std::vector<long> lab_big(static_cast<size_t>(big_geom.sites()), 0);
      for (long s = 0; s < small_geom.sites(); ++s) {
        Offset target = small_geom.offsets[static_cast<size_t>(s)] + t;
        long c = -1;
        for (long b = 0; b < big_geom.sites(); ++b)
          if (big_geom.offsets[static_cast<size_t>(b)] == target) c = b;
        lab_big[static_cast<size_t>(c)] = lab_small[static_cast<size_t>(s)];
      }
      v(big_b.index_of_site_labels(lab_big)) += ph * pad * coeffs(i);
    }
    res.raw.push_back(v);
    if ((v.imag().cwiseAbs().maxCoeff()) > 1e-12) fail("embed: complex-momentum span not supported");
    span.col(col++) = v.real();
  }
  // rank-revealing orthonormalization of the span
  Eigen::ColPivHouseholderQR<MatrixXd> qr(span);
  long rank = qr.rank();
  MatrixXd qfull = qr.householderQ() * MatrixXd::Identity(span.rows(), std::min(span.rows(), span.cols()));
  for (long j = 0; j < rank; ++j) res.orthonormal.push_back(qfull.col(j));
  return res;
}

namespace {

MatrixXcd place_ops(long nsites, const std::vector<std::pair<long, MatrixXcd>>& ops) {
  MatrixXcd m = MatrixXcd::Identity(1, 1);
  for (long s = 0; s < nsites; ++s) {
    const MatrixXcd* found = nullptr;
    for (const auto& [site, op] : ops)
      if (site == s) found = &op;
    m = found ? kron(m, *found) : kron(m, MatrixXcd::Identity(2, 2));
  }
  return m;
}

}  // namespace

OperatorBasis su2_reduced_plaquette_basis() {
  const char* axes = "xyz";
  SpinOps sp = spin_operators(2);
  std::vector<MatrixXcd> s = {sp.sx, sp.sy, sp.sz};
  // plaquette site order: (0,0),(1,0),(0,1),(1,1)
  struct Bond {
    long a, b;
    const char* name;
  };
  std::vector<Bond> nn_bonds = {{0, 1, "top"}, {1, 3, "right"}, {2, 3, "bottom"}, {0, 2, "left"}};
  std::vector<Bond> diag_bonds = {{0, 3, "main"}, {1, 2, "anti"}};

  std::vector<MatrixXcd> elems;
  std::vector<std::string> labels;
  for (const auto& b : nn_bonds)
    for (long a = 0; a < 3; ++a) {
      elems.push_back(place_ops(4, {{b.a, s[a]}, {b.b, s[a]}}));
      labels.push_back(std::string("nn:") + b.name + ":" + axes[a] + axes[a]);
    }
  for (const auto& b : diag_bonds)
    for (long a = 0; a < 3; ++a) {
      elems.push_back(place_ops(4, {{b.a, s[a]}, {b.b, s[a]}}));
      labels.push_back(std::string("diag:") + b.name + ":" + axes[a] + axes[a]);
    }
  // parallel bond products, distinct axes: (top,bottom) and (left,right)
  for (int orient = 0; orient < 2; ++orient)
    for (long a = 0; a < 3; ++a)
      for (long b = 0; b < 3; ++b) {
        if (a == b) continue;
        MatrixXcd m;
        if (orient == 0)
          m = 4.0 * place_ops(4, {{0, s[a]}, {1, s[a]}, {2, s[b]}, {3, s[b]}});
        else
          m = 4.0 * place_ops(4, {{0, s[a]}, {2, s[a]}, {1, s[b]}, {3, s[b]}});
        elems.push_back(m);
        labels.push_back(std::string("quad:") + (orient == 0 ? "tb" : "lr") + ":" + axes[a] + axes[b]);
      }
  // crossed diagonal products, distinct axes
  for (long a = 0; a < 3; ++a)
    for (long b = 0; b < 3; ++b) {
      if (a == b) continue;
      elems.push_back(4.0 * place_ops(4, {{0, s[a]}, {3, s[a]}, {1, s[b]}, {2, s[b]}}));
      labels.push_back(std::string("cross:") + axes[a] + axes[b]);
    }
  for (long a = 0; a < 3; ++a) {
    elems.push_back(4.0 * place_ops(4, {{0, s[a]}, {1, s[a]}, {2, s[a]}, {3, s[a]}}));
    labels.push_back(std::string("all:") + axes[a]);
  }
  return OperatorBasis::explicit_basis(SupportGeometry::plaquette(2), std::move(elems), std::move(labels));
}

Su2ClassIndex su2_class_index() {
  Su2ClassIndex idx;
  for (long i = 0; i < 12; ++i) idx.nn.push_back(i);
  for (long i = 12; i < 18; ++i) idx.diag.push_back(i);
  for (long i = 18; i < 30; ++i) idx.quad_parallel.push_back(i);
  for (long i = 30; i < 36; ++i) idx.quad_cross.push_back(i);
  for (long i = 36; i < 39; ++i) idx.all_same.push_back(i);
  return idx;
}

OperatorBasis medial_restricted_basis() {
  SupportGeometry geom = SupportGeometry::window_2x3(2);
  auto site = hermitian_site_matrices(2);
  auto site_lab = hermitian_site_labels(2);
  std::vector<MatrixXcd> elems;
  std::vector<std::string> labels;
  auto push_string = [&](const std::vector<long>& lab) {
    MatrixXcd m = site[static_cast<size_t>(lab[0])];
    std::string l = site_lab[static_cast<size_t>(lab[0])];
    for (size_t s = 1; s < lab.size(); ++s) {
      m = kron(m, site[static_cast<size_t>(lab[s])]);
      l += "." + site_lab[static_cast<size_t>(lab[s])];
    }
    elems.push_back(m);
    labels.push_back(l);
  };
  // window sites: (0,0),(1,0),(2,0),(0,1),(1,1),(2,1); left pattern acts as
  // identity on column 2, right pattern on column 0
  for (long a = 0; a < 4; ++a)
    for (long b = 0; b < 4; ++b)
      for (long c = 0; c < 4; ++c)
        for (long e = 0; e < 4; ++e) push_string({a, b, 0, c, e, 0});
  for (long a = 0; a < 4; ++a)
    for (long b = 0; b < 4; ++b)
      for (long c = 0; c < 4; ++c)
        for (long e = 0; e < 4; ++e) {
          if (a == 0 && c == 0) continue;  // middle-column strings already listed
          push_string({0, a, b, 0, c, e});
        }
  return OperatorBasis::explicit_basis(std::move(geom), std::move(elems), std::move(labels));
}

namespace {

// Single-edge Pauli products with phase bookkeeping.
void pauli_mul(char a, char b, cplx& phase, char& out) {
  if (a == 'I') {
    out = b;
    return;
  }
  if (b == 'I') {
    out = a;
    return;
  }
  if (a == b) {
    out = 'I';
    return;
  }
  auto third = [&](char p, char q) {
    for (char c : {'X', 'Y', 'Z'})
      if (c != p && c != q) return c;
    return 'I';
  };
  out = third(a, b);
  bool cyclic = (a == 'X' && b == 'Y') || (a == 'Y' && b == 'Z') || (a == 'Z' && b == 'X');
  phase *= cyclic ? kI : -kI;
}

void multiply_into(std::map<EdgeRef, char>& acc, cplx& coeff, const std::map<EdgeRef, char>& factor) {
  for (const auto& [e, p] : factor) {
    auto it = acc.find(e);
    if (it == acc.end()) {
      acc[e] = p;
    } else {
      char out;
      pauli_mul(it->second, p, coeff, out);
      if (out == 'I')
        acc.erase(it);
      else
        it->second = out;
    }
  }
}

std::map<EdgeRef, char> star_at(Offset v) {
  return {{EdgeRef{0, v.x, v.y}, 'X'},
          {EdgeRef{0, v.x - 1, v.y}, 'X'},
          {EdgeRef{1, v.x, v.y}, 'X'},
          {EdgeRef{1, v.x, v.y - 1}, 'X'}};
}

EdgeRef edge_between(Offset a, Offset b) {
  Offset d = b - a;
  if (d.x == 1 && d.y == 0) return {0, a.x, a.y};
  if (d.x == -1 && d.y == 0) return {0, b.x, b.y};
  if (d.x == 0 && d.y == 1) return {1, a.x, a.y};
  if (d.x == 0 && d.y == -1) return {1, b.x, b.y};
  fail("edge_between: not nearest neighbors");
}

}  // namespace

MatrixXcd plaquette_pauli_string(const std::string& s4) {
  if (s4.size() != 4) fail("plaquette string must have 4 letters");
  auto letter = [](char c) -> MatrixXcd {
    switch (c) {
      case 'I': return MatrixXcd::Identity(2, 2);
      case 'X': return pauli_x();
      case 'Y': return pauli_y();
      case 'Z': return pauli_z();
    }
    fail("unknown pauli letter");
  };
  MatrixXcd m = letter(s4[0]);
  for (int i = 1; i < 4; ++i) m = kron(m, letter(s4[static_cast<size_t>(i)]));
  return m;
}

EdgeOperator wegner_dual(const MatrixXcd& plaquette_term) {
  if (plaquette_term.rows() != 16 || plaquette_term.cols() != 16) fail("wegner_dual: expected a 16x16 plaquette term");
  const std::vector<Offset> corners = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  const char letters[4] = {'I', 'X', 'Y', 'Z'};
  EdgeOperator out;
  for (long code = 0; code < 256; ++code) {
    std::string s(4, 'I');
    long c = code;
    for (int i = 3; i >= 0; --i) {
      s[static_cast<size_t>(i)] = letters[c % 4];
      c /= 4;
    }
    MatrixXcd m = plaquette_pauli_string(s);
    cplx coeff = (m.adjoint() * plaquette_term).trace() / 16.0;
    if (std::abs(coeff) < 1e-13) continue;
    long zcount = static_cast<long>(std::count(s.begin(), s.end(), 'Z'));
    if (s.find('Y') != std::string::npos) fail("wegner_dual: Y content is not supported");
    if (zcount % 2 != 0) fail("wegner_dual: input does not commute with the global X flip");

    std::vector<Offset> xs, zs;
    for (int i = 0; i < 4; ++i) {
      if (s[static_cast<size_t>(i)] == 'X') xs.push_back(corners[static_cast<size_t>(i)]);
      if (s[static_cast<size_t>(i)] == 'Z') zs.push_back(corners[static_cast<size_t>(i)]);
    }
    std::sort(zs.begin(), zs.end());

    cplx phase = coeff;
    std::map<EdgeRef, char> acc;
    for (const auto& v : xs) multiply_into(acc, phase, star_at(v));
    for (size_t p = 0; p + 1 < zs.size(); p += 2) {
      Offset a = zs[p], b = zs[p + 1];
      Offset d = b - a;
      if (std::abs(d.x) + std::abs(d.y) == 1) {
        multiply_into(acc, phase, {{edge_between(a, b), 'Z'}});
      } else if (std::abs(d.x) == 1 && std::abs(d.y) == 1) {
        Offset m1{a.x, b.y}, m2{b.x, a.y};
        Offset via = m1;
        bool m1x = std::find(xs.begin(), xs.end(), m1) != xs.end();
        bool m2x = std::find(xs.begin(), xs.end(), m2) != xs.end();
        if (m1x && !m2x)
          via = m1;
        else if (m2x && !m1x)
          via = m2;
        else
          via = std::min(m1, m2);
        multiply_into(acc, phase, {{edge_between(a, via), 'Z'}});
        multiply_into(acc, phase, {{edge_between(via, b), 'Z'}});
      } else {
        fail("wegner_dual: unsupported Z pair separation");
      }
    }
    out.terms.push_back({phase, std::move(acc)});
  }
  return out;
}

}  // namespace pepsx
