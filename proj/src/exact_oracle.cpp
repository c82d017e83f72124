#include "pepsx/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace pepsx {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("exact_oracle: " + msg); }

long ipow(long b, long e) {
  long r = 1;
  while (e-- > 0) r *= b;
  return r;
}

constexpr long kMaxStateDim = 1L << 22;
constexpr long kMaxBlockEntries = 200'000'000;  // ~3 GB complex

// Column of the single-layer network: [phys (d^Ly), left (D^Ly), right (D^Ly)]
Tensor build_state_column(const PepsUnitCell& peps, const FiniteTorus& torus, long x) {
  const long ly = torus.ly;
  // start: site (x,0) as [u, p, l, r, d]
  Tensor acc = permuted(peps.site(x, 0), {2, 0, 1, 3, 4});
  for (long y = 1; y < ly; ++y) {
    const Tensor& s = peps.site(x, y);  // [p,l,u,r,d]
    long dleg = acc.rank() - 1;
    acc = contract(acc, s, {{dleg, 2}});
    // acc: [u, p..., l..., r..., p,l,r,d] -> regroup
    long r = acc.rank();
    std::vector<long> perm;
    perm.push_back(0);
    for (long k = 0; k < y; ++k) perm.push_back(1 + k);           // previous phys
    perm.push_back(r - 4);                                        // new phys
    for (long k = 0; k < y; ++k) perm.push_back(1 + y + k);       // previous l
    perm.push_back(r - 3);                                        // new l
    for (long k = 0; k < y; ++k) perm.push_back(1 + 2 * y + k);   // previous r
    perm.push_back(r - 2);                                        // new r
    perm.push_back(r - 1);                                        // new d
    acc = permuted(acc, perm);
  }
  acc = trace_pair(acc, 0, acc.rank() - 1);  // periodic vertical wrap
  const long d = peps.phys_dim, db = acc.extent(ly), p = ipow(d, ly), bd = ipow(db, ly);
  // [p...,l...,r...] with phys already leading
  return acc.reshaped({p, bd, bd});
}

}  // namespace

VectorXcd contract_torus_statevector(const PepsUnitCell& peps, const FiniteTorus& torus) {
  peps.validate();
  if (torus.phys_dim != peps.phys_dim) fail("statevector: physical dimension mismatch");
  const long d = peps.phys_dim, n = torus.sites();
  double logdim = static_cast<double>(n) * std::log2(static_cast<double>(d));
  if (logdim > 22.0) fail("statevector: memory budget exceeded");
  const long lx = torus.lx, ly = torus.ly;

  struct Block {
    Tensor t;  // [phys, left, right]
    std::vector<long> cols;
  };
  std::vector<Block> blocks;
  for (long x = 0; x < lx; ++x) blocks.push_back({build_state_column(peps, torus, x), {x}});

  auto merge = [&](const Block& a, const Block& b) {
    Tensor t = contract(a.t, b.t, {{2, 1}});  // [pa, la, pb, rb]
    t = permuted(t, {0, 2, 1, 3});
    long p = t.extent(0) * t.extent(1);
    if (p * t.extent(2) * t.extent(3) > kMaxBlockEntries) fail("statevector: memory budget exceeded");
    Block out;
    out.t = t.reshaped({p, t.extent(2), t.extent(3)});
    out.cols = a.cols;
    out.cols.insert(out.cols.end(), b.cols.begin(), b.cols.end());
    return out;
  };

  while (blocks.size() > 2) {
    std::vector<Block> next;
    for (size_t i = 0; i + 1 < blocks.size(); i += 2) next.push_back(merge(blocks[i], blocks[i + 1]));
    if (blocks.size() % 2) next.push_back(blocks.back());
    blocks = std::move(next);
  }

  Tensor psi;  // [phys] with column-grouped ordering
  if (blocks.size() == 1) {
    psi = trace_pair(blocks[0].t, 1, 2);
  } else {
    // trace the ring without materializing [left,right,pa,pb]
    const Tensor& a = blocks[0].t;  // [pa, l, m]
    Tensor b = permuted(blocks[1].t, {2, 1, 0});  // [pb, m, l] -> [l, m, pb]
    Tensor am = permuted(a, {1, 2, 0});            // [l, m, pa]
    long lm = am.extent(0) * am.extent(1);
    Tensor r = contract(am.reshaped({lm, a.extent(0)}), b.reshaped({lm, blocks[1].t.extent(0)}), {{0, 0}});
    psi = r.reshaped({a.extent(0) * blocks[1].t.extent(0)});
    blocks[0].cols.insert(blocks[0].cols.end(), blocks[1].cols.begin(), blocks[1].cols.end());
  }
  // reorder phys factors from (column x, then y) to row-major site order
  std::vector<long> ext(static_cast<size_t>(n), d);
  Tensor shaped = psi.reshaped(ext);
  std::vector<long> perm(static_cast<size_t>(n));
  const auto& cols = blocks[0].cols;
  std::vector<long> pos_of_col(static_cast<size_t>(lx));
  for (size_t i = 0; i < cols.size(); ++i) pos_of_col[static_cast<size_t>(cols[i])] = static_cast<long>(i);
  for (long y = 0; y < ly; ++y)
    for (long x = 0; x < lx; ++x) perm[static_cast<size_t>(y * lx + x)] = pos_of_col[static_cast<size_t>(x)] * ly + y;
  shaped = permuted(shaped, perm);
  VectorXcd out(shaped.size());
  for (long i = 0; i < shaped.size(); ++i) out(i) = shaped[i];
  return out;
}

// --- global operators ------------------------------------------------------

GlobalOperator GlobalOperator::at_sites(const MatrixXcd& op, const std::vector<long>& sites, long site_dim,
                                        long n_sites) {
  GlobalOperator g;
  g.site_dim_ = site_dim;
  g.n_sites_ = n_sites;
  g.dim_ = ipow(site_dim, n_sites);
  std::set<long> uniq(sites.begin(), sites.end());
  if (uniq.size() != sites.size()) fail("placement with repeated sites");
  g.placements_.push_back({sites, op, cplx(1.0)});
  return g;
}

GlobalOperator GlobalOperator::build_local(const MatrixXcd& local, const SupportGeometry& geom,
                                           const FiniteTorus& torus, const Momentum& q) {
  if (!q.commensurate_with(torus)) fail("momentum incommensurate with torus");
  GlobalOperator g;
  g.site_dim_ = geom.phys_dim;
  g.n_sites_ = torus.sites();
  double logdim = static_cast<double>(g.n_sites_) * std::log2(static_cast<double>(g.site_dim_));
  if (logdim > 22.0) fail("global operator dimension overflow");
  g.dim_ = ipow(g.site_dim_, g.n_sites_);
  for (long y = 0; y < torus.ly; ++y)
    for (long x = 0; x < torus.lx; ++x) {
      std::vector<long> sites;
      for (const auto& o : geom.offsets) sites.push_back(torus.site(x + o.x, y + o.y));
      std::set<long> uniq(sites.begin(), sites.end());
      if (uniq.size() != sites.size()) fail("support wraps onto itself; torus too small");
      g.placements_.push_back({sites, local, q.phase({x, y})});
    }
  return g;
}

GlobalOperator GlobalOperator::build(const VectorXd& coeffs, const OperatorBasis& basis, const FiniteTorus& torus,
                                     const Momentum& q) {
  if (coeffs.size() != basis.size()) fail("coefficient length does not match basis");
  return build_local(basis.materialize(coeffs), basis.geometry(), torus, q);
}

GlobalOperator GlobalOperator::build_edge(const EdgeOperator& term, const FiniteTorus& torus, const Momentum& q) {
  GlobalOperator g;
  g.site_dim_ = 2;
  g.n_sites_ = edge_count(torus);
  if (g.n_sites_ > 22) fail("global operator dimension overflow");
  g.dim_ = 1L << g.n_sites_;
  auto letter = [](char c) -> MatrixXcd {
    switch (c) {
      case 'X': return pauli_x();
      case 'Y': return pauli_y();
      case 'Z': return pauli_z();
    }
    fail("bad pauli letter");
  };
  for (long y = 0; y < torus.ly; ++y)
    for (long x = 0; x < torus.lx; ++x) {
      cplx ph = q.phase({x, y});
      for (const auto& t : term.terms) {
        if (t.paulis.empty()) {
          // identity term contributes a constant shift; keep it explicit
          g.placements_.push_back({{}, MatrixXcd::Identity(1, 1), ph * t.coeff});
          continue;
        }
        std::map<long, char> on_edges;
        for (const auto& [e, p] : t.paulis) {
          long idx = edge_index(torus, e.x + x, e.y + y, e.orient);
          if (on_edges.count(idx)) fail("edge term wraps onto itself; torus too small");
          on_edges[idx] = p;
        }
        std::vector<long> sites;
        MatrixXcd op = MatrixXcd::Identity(1, 1);
        for (const auto& [idx, p] : on_edges) {
          sites.push_back(idx);
          op = kron(op, letter(p));
        }
        g.placements_.push_back({sites, op, ph * t.coeff});
      }
    }
  return g;
}

bool GlobalOperator::is_real() const {
  for (const auto& pl : placements_) {
    if (std::abs(pl.weight.imag()) > 0) return false;
    if (pl.op.imag().cwiseAbs().maxCoeff() > 0) return false;
  }
  return true;
}

namespace {

template <typename Scalar, typename Vec>
void apply_placement(const GlobalOperator::Placement& pl, long site_dim, long n_sites, long dim, const Vec& v,
                     Vec& out, Scalar weight, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& op) {
  const long k = static_cast<long>(pl.sites.size());
  if (k == 0) {
    out += weight * op(0, 0) * v;
    return;
  }
  std::vector<long> stride(static_cast<size_t>(k));
  for (long j = 0; j < k; ++j) stride[static_cast<size_t>(j)] = ipow(site_dim, n_sites - 1 - pl.sites[static_cast<size_t>(j)]);
  const long dk = ipow(site_dim, k);
  // enumerate configurations of the support; for each, scatter the matrix row
  std::vector<long> offs(static_cast<size_t>(dk), 0);
  for (long c = 0; c < dk; ++c) {
    long rem = c, off = 0;
    for (long j = k - 1; j >= 0; --j) {
      off += (rem % site_dim) * stride[static_cast<size_t>(j)];
      rem /= site_dim;
    }
    offs[static_cast<size_t>(c)] = off;
  }
  // iterate bases of the non-support sites by walking all indices whose
  // support digits are zero
  std::vector<long> sorted_strides = stride;
  std::sort(sorted_strides.begin(), sorted_strides.end(), std::greater<long>());
  std::vector<long> rest;
  rest.reserve(static_cast<size_t>(dim / dk));
  for (long i = 0; i < dim; ++i) {
    bool zero_support = true;
    for (long j = 0; j < k; ++j)
      if ((i / stride[static_cast<size_t>(j)]) % site_dim != 0) {
        zero_support = false;
        break;
      }
    if (zero_support) rest.push_back(i);
  }
  for (long base : rest)
    for (long r = 0; r < dk; ++r) {
      Scalar acc{};
      for (long c = 0; c < dk; ++c) acc += op(r, c) * v(base + offs[static_cast<size_t>(c)]);
      out(base + offs[static_cast<size_t>(r)]) += weight * acc;
    }
}

}  // namespace

VectorXcd GlobalOperator::apply(const VectorXcd& v) const {
  if (v.size() != dim_) fail("apply: dimension mismatch");
  VectorXcd out = VectorXcd::Zero(dim_);
  for (const auto& pl : placements_) apply_placement<cplx>(pl, site_dim_, n_sites_, dim_, v, out, pl.weight, pl.op);
  return out;
}

VectorXd GlobalOperator::apply_real(const VectorXd& v) const {
  if (v.size() != dim_) fail("apply: dimension mismatch");
  VectorXd out = VectorXd::Zero(dim_);
  for (const auto& pl : placements_) {
    MatrixXd op = pl.op.real();
    apply_placement<double>(pl, site_dim_, n_sites_, dim_, v, out, pl.weight.real(), op);
  }
  return out;
}

MatrixXcd GlobalOperator::dense() const {
  if (dim_ > 4200) fail("dense: dimension too large");
  MatrixXcd h = MatrixXcd::Zero(dim_, dim_);
  VectorXcd e = VectorXcd::Zero(dim_);
  for (long j = 0; j < dim_; ++j) {
    e.setZero();
    e(j) = 1.0;
    h.col(j) = apply(e);
  }
  return h;
}

double GlobalOperator::hermiticity_deviation() const {
  MatrixXcd h = dense();
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

EnergyVariance expectation_and_variance(const GlobalOperator& h, const VectorXcd& state, long n_sites) {
  double nrm2 = state.squaredNorm();
  if (nrm2 <= 0) fail("expectation: zero state");
  VectorXcd hv = h.apply(state);
  cplx e = state.dot(hv) / nrm2;
  double h2 = hv.squaredNorm() / nrm2;
  double n = static_cast<double>(n_sites);
  return {e.real() / n, (h2 - std::norm(e)) / n};
}

SpectrumResult full_spectrum(const GlobalOperator& h, double zero_threshold, bool want_vectors) {
  MatrixXcd hd = h.dense();
  double herm = (hd - hd.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-9) fail("full_spectrum: non-Hermitian operator");
  SpectrumResult res;
  if (h.is_real()) {
    MatrixXd hr = 0.5 * (hd.real() + hd.real().transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(hr, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    res.eigenvalues = es.eigenvalues();
    if (want_vectors) res.eigenvectors = es.eigenvectors();
  } else {
    MatrixXcd hc = 0.5 * (hd + hd.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hc, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    res.eigenvalues = es.eigenvalues();
  }
  for (long i = 0; i < res.eigenvalues.size(); ++i)
    if (std::abs(res.eigenvalues(i)) < zero_threshold) ++res.zero_modes;
  return res;
}

SpectrumResult lowest_eigenpair(const GlobalOperator& h, long max_iter, double tol) {
  const long n = h.dim();
  const bool real = h.is_real();
  const long m = std::min<long>(n, 120);  // Krylov block per restart
  VectorXd v = VectorXd::Ones(n);
  v.normalize();
  SpectrumResult res;
  res.converged = false;
  double theta = 0.0;
  long iters = 0;
  VectorXd best = v;
  for (int restart = 0; restart < 64 && iters < max_iter; ++restart) {
    MatrixXd q(n, m);
    VectorXd alpha = VectorXd::Zero(m), beta = VectorXd::Zero(m);
    q.col(0) = v;
    long built = 0;
    for (long j = 0; j < m && iters < max_iter; ++j, ++iters) {
      VectorXd w;
      if (real) {
        w = h.apply_real(q.col(j));
      } else {
        VectorXcd wc = h.apply(q.col(j).cast<cplx>());
        w = wc.real();
      }
      alpha(j) = q.col(j).dot(w);
      w -= alpha(j) * q.col(j);
      if (j > 0) w -= beta(j - 1) * q.col(j - 1);
      // full reorthogonalization for numerical safety
      w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
      built = j + 1;
      double nb = w.norm();
      if (j + 1 < m) {
        if (nb < 1e-12) {
          // invariant subspace; continue with a deterministic fresh direction
          beta(j) = 0.0;
          bool found = false;
          for (long cand = 0; cand < n && !found; ++cand) {
            VectorXd f = VectorXd::Unit(n, cand);
            f -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * f);
            if (f.norm() > 1e-6) {
              q.col(j + 1) = f.normalized();
              found = true;
            }
          }
          if (!found) {
            built = j + 1;
            break;
          }
        } else {
          beta(j) = nb;
          q.col(j + 1) = w / nb;
        }
      }
    }
    MatrixXd t = MatrixXd::Zero(built, built);
    for (long j = 0; j < built; ++j) {
      t(j, j) = alpha(j);
      if (j + 1 < built) t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
    theta = es.eigenvalues()(0);
    best = q.leftCols(built) * es.eigenvectors().col(0);
    best.normalize();
    VectorXd hb = real ? h.apply_real(best) : h.apply(best.cast<cplx>()).real();
    res.residual = (hb - theta * best).norm();
    if (res.residual < tol * std::max(1.0, std::abs(theta))) {
      res.converged = true;
      break;
    }
    v = best;
  }
  res.eigenvalues = VectorXd::Constant(1, theta);
  MatrixXd vecs(n, 1);
  vecs.col(0) = best;
  res.eigenvectors = vecs;
  return res;
}

// --- double-layer ring contraction ----------------------------------------

namespace {

// Double-layer column with open physical legs at the provided rows.
// Result: [left (D^2)^Ly, right (D^2)^Ly, (bra,ket) per open row in y order]
Tensor build_double_column(const PepsUnitCell& peps, const FiniteTorus& torus, long x, const std::vector<long>& open_rows) {
  const long ly = torus.ly;
  auto is_open = [&](long y) { return std::find(open_rows.begin(), open_rows.end(), y) != open_rows.end(); };

  auto site_double = [&](long y) {
    const Tensor& t = peps.site(x, y);  // [p,l,u,r,d]
    Tensor tc = t.conjugated();
    if (is_open(y)) {
      Tensor e = contract(tc, t, {});  // [p',l',u',r',d', p,l,u,r,d]
      e = permuted(e, {0, 5, 1, 6, 2, 7, 3, 8, 4, 9});  // [p',p,(l'l),(u'u),(r'r),(d'd)]
      long D1 = t.extent(1), D2 = t.extent(2), D3 = t.extent(3), D4 = t.extent(4), d = t.extent(0);
      return e.reshaped({d, d, D1 * D1, D2 * D2, D3 * D3, D4 * D4});  // [p',p,l,u,r,d]
    }
    Tensor e = contract(tc, t, {{0, 0}});  // [l',u',r',d', l,u,r,d]
    e = permuted(e, {0, 4, 1, 5, 2, 6, 3, 7});
    long D1 = t.extent(1), D2 = t.extent(2), D3 = t.extent(3), D4 = t.extent(4);
    return e.reshaped({D1 * D1, D2 * D2, D3 * D3, D4 * D4});  // [l,u,r,d]
  };

  // stack downward, keeping u of the first site open until the wrap
  // acc layout: [u, opens..., l0..ly, r0..ry, d]
  Tensor acc;
  long nopen = 0;
  {
    Tensor s = site_double(0);
    if (s.rank() == 6) {
      acc = permuted(s, {3, 0, 1, 2, 4, 5});  // [u,p',p,l,r,d]
      nopen = 1;
    } else {
      acc = permuted(s, {1, 0, 2, 3});  // [u,l,r,d]
    }
  }
  long nl = 1;
  for (long y = 1; y < ly; ++y) {
    Tensor s = site_double(y);
    bool open = s.rank() == 6;
    long uleg = open ? 3 : 1;
    acc = contract(acc, s, {{acc.rank() - 1, uleg}});
    // acc now: [u, opens(2*nopen), l..(nl), r..(nl), s-legs...]
    long r = acc.rank();
    std::vector<long> perm;
    perm.push_back(0);
    for (long k = 0; k < 2 * nopen; ++k) perm.push_back(1 + k);
    long base = 1 + 2 * nopen;
    long sbase = base + 2 * nl;  // start of new site legs within acc
    if (open) {
      perm.push_back(sbase);      // new p'
      perm.push_back(sbase + 1);  // new p
    }
    for (long k = 0; k < nl; ++k) perm.push_back(base + k);  // old l's
    perm.push_back(open ? sbase + 2 : sbase);                // new l
    for (long k = 0; k < nl; ++k) perm.push_back(base + nl + k);  // old r's
    perm.push_back(open ? sbase + 3 : sbase + 1);                 // new r
    perm.push_back(r - 1);                                        // new d
    acc = permuted(acc, perm);
    if (open) ++nopen;
    ++nl;
  }
  acc = trace_pair(acc, 0, acc.rank() - 1);
  // [opens..., l0..l_{ly-1}, r0..r_{ly-1}]
  long db = peps.site(x, 0).extent(1);
  long bl = ipow(db * db, ly);
  std::vector<long> ext;
  long dphys = peps.phys_dim;
  long od = ipow(dphys * dphys, nopen);
  Tensor shaped = acc.reshaped([&] {
    std::vector<long> e;
    e.push_back(od);
    e.push_back(bl);
    e.push_back(bl);
    return e;
  }());
  // reorder to [l, r, opens]
  return permuted(shaped, {1, 2, 0});
}

struct RingResult {
  Tensor open_tensor;             // [opens...] flattened per open site (bra,ket)
  std::vector<long> open_sites;   // site ids in factor order of open_tensor
  cplx norm;                      // closed-ring value
};

// Contract a periodic row of column transfer matrices with open physical
// legs at the given sites.
RingResult contract_double_ring(const PepsUnitCell& peps, const FiniteTorus& torus, const std::vector<long>& sites) {
  const long lx = torus.lx, ly = torus.ly, d = peps.phys_dim;
  std::map<long, std::vector<long>> rows_by_col;
  for (long s : sites) {
    Offset c = torus.coords(s);
    rows_by_col[c.x].push_back(c.y);
  }
  for (auto& [cx, rows] : rows_by_col) std::sort(rows.begin(), rows.end());

  long db = peps.site_tensors.front().extent(1);
  long chi = ipow(db * db, ly);
  double entries = static_cast<double>(chi) * chi;
  for (const auto& [cx, rows] : rows_by_col) entries *= std::pow(static_cast<double>(d * d), static_cast<double>(rows.size()));
  if (entries > static_cast<double>(kMaxBlockEntries)) fail("rdm: support too large");

  // closed columns cached per cell-column class (peps cell may be 1x1)
  std::map<long, Tensor> closed_cache;
  auto closed_col = [&](long x) -> const Tensor& {
    long key = ((x % peps.cell_w) + peps.cell_w) % peps.cell_w;
    auto it = closed_cache.find(key);
    if (it == closed_cache.end()) it = closed_cache.emplace(key, build_double_column(peps, torus, x, {})).first;
    return it->second;
  };

  // running tensor [l, r, opens...]
  Tensor acc;
  std::vector<long> open_sites;
  bool started = false;
  for (long x = 0; x < lx; ++x) {
    Tensor col;
    auto it = rows_by_col.find(x);
    if (it != rows_by_col.end()) {
      col = build_double_column(peps, torus, x, it->second);
      for (long y : it->second) open_sites.push_back(torus.site(x, y));
    } else {
      col = closed_col(x);
      if (col.rank() == 2) col = col.reshaped({col.extent(0), col.extent(1), 1});
    }
    if (col.rank() == 2) col = col.reshaped({col.extent(0), col.extent(1), 1});
    if (!started) {
      acc = col;
      started = true;
    } else {
      // acc [l, r, oa], col [r, r2, ob] -> [l, r2, oa, ob]
      Tensor merged = contract(acc, col, {{1, 0}});  // [l, oa, r2, ob]
      merged = permuted(merged, {0, 2, 1, 3});
      acc = merged.reshaped({merged.extent(0), merged.extent(1), merged.extent(2) * merged.extent(3)});
    }
  }
  Tensor closed = trace_pair(acc, 0, 1);  // [opens]
  RingResult res;
  res.open_sites = open_sites;
  // separate the all-identity component as the norm
  if (sites.empty()) {
    res.norm = closed[0];
    res.open_tensor = closed;
    return res;
  }
  res.open_tensor = closed;
  // norm from a dedicated closed ring
  RingResult nr = contract_double_ring(peps, torus, {});
  res.norm = nr.norm;
  return res;
}

}  // namespace

MatrixXcd rdm_on_support(const PepsUnitCell& peps, const FiniteTorus& torus, const std::vector<long>& sites) {
  peps.validate();
  if (sites.empty()) fail("rdm: empty support");
  std::set<long> uniq(sites.begin(), sites.end());
  if (uniq.size() != sites.size()) fail("rdm: repeated sites");
  const long d = peps.phys_dim;

  RingResult ring = contract_double_ring(peps, torus, sites);
  const long k = static_cast<long>(sites.size());
  // ring.open_tensor: flattened (bra,ket) pairs in ring.open_sites order
  std::vector<long> ext(static_cast<size_t>(2 * k));
  for (long i = 0; i < k; ++i) {
    ext[static_cast<size_t>(2 * i)] = d;
    ext[static_cast<size_t>(2 * i + 1)] = d;
  }
  Tensor t = ring.open_tensor.reshaped(ext);
  // current order: (bra,ket) interleaved in ring order; want all bra (in the
  // caller's site order) then all ket
  std::vector<long> perm;
  for (long j = 0; j < k; ++j) {
    long pos = -1;
    for (long i = 0; i < k; ++i)
      if (ring.open_sites[static_cast<size_t>(i)] == sites[static_cast<size_t>(j)]) pos = i;
    perm.push_back(2 * pos);
  }
  for (long j = 0; j < k; ++j) {
    long pos = -1;
    for (long i = 0; i < k; ++i)
      if (ring.open_sites[static_cast<size_t>(i)] == sites[static_cast<size_t>(j)]) pos = i;
    perm.push_back(2 * pos + 1);
  }
  t = permuted(t, perm);
  long dm = ipow(d, k);
  MatrixXcd rho(dm, dm);
  for (long i = 0; i < dm; ++i)
    for (long j = 0; j < dm; ++j) rho(i, j) = t[i * dm + j];
  rho /= ring.norm;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return rho;
}

// --- structure factor ------------------------------------------------------

namespace {

struct SupportPlacement {
  std::vector<long> sites;  // torus sites of the support, in geometry order
};

SupportPlacement place_support(const SupportGeometry& g, const FiniteTorus& t, long x, long y) {
  SupportPlacement p;
  for (const auto& o : g.offsets) p.sites.push_back(t.site(x + o.x, y + o.y));
  std::set<long> uniq(p.sites.begin(), p.sites.end());
  if (uniq.size() != p.sites.size()) fail("structure factor: support wraps onto itself; torus too small");
  return p;
}

// Embed a support operator into the merged-site ordering as a dense matrix.
MatrixXcd embed_operator(const MatrixXcd& op, const std::vector<long>& supp, const std::vector<long>& merged, long d) {
  const long km = static_cast<long>(merged.size());
  const long dm = ipow(d, km);
  std::vector<long> pos;
  for (long s : supp) {
    long p = -1;
    for (long i = 0; i < km; ++i)
      if (merged[static_cast<size_t>(i)] == s) p = i;
    pos.push_back(p);
  }
  MatrixXcd out = MatrixXcd::Zero(dm, dm);
  const long ks = static_cast<long>(supp.size());
  const long ds = ipow(d, ks);
  std::vector<long> stride(static_cast<size_t>(ks));
  for (long j = 0; j < ks; ++j) stride[static_cast<size_t>(j)] = ipow(d, km - 1 - pos[static_cast<size_t>(j)]);
  // enumerate the rest (identity factors)
  for (long i = 0; i < dm; ++i) {
    bool zero_support = true;
    for (long j = 0; j < ks; ++j)
      if ((i / stride[static_cast<size_t>(j)]) % d != 0) {
        zero_support = false;
        break;
      }
    if (!zero_support) continue;
    for (long r = 0; r < ds; ++r) {
      long roff = 0, rem = r;
      for (long j = ks - 1; j >= 0; --j) {
        roff += (rem % d) * stride[static_cast<size_t>(j)];
        rem /= d;
      }
      for (long c = 0; c < ds; ++c) {
        if (op(r, c) == cplx(0.0)) continue;
        long coff = 0, rem2 = c;
        for (long j = ks - 1; j >= 0; --j) {
          coff += (rem2 % d) * stride[static_cast<size_t>(j)];
          rem2 /= d;
        }
        out(i + roff, i + coff) = op(r, c);
      }
    }
  }
  return out;
}

MatrixXcd pairings_from_rho(const MatrixXcd& rho, const OperatorBasis& basis, const std::vector<long>& supp_a,
                            const std::vector<long>& supp_b, const std::vector<long>& merged, long d) {
  const long nb = basis.size();
  const long km = static_cast<long>(merged.size());
  const long dm = ipow(d, km);
  bool disjoint = true;
  for (long s : supp_a)
    if (std::find(supp_b.begin(), supp_b.end(), s) != supp_b.end()) disjoint = false;

  MatrixXcd p(nb, nb);
  if (disjoint && km == static_cast<long>(supp_a.size() + supp_b.size())) {
    // Tr[rho (A (x) B)] as VA^T R VB with R a rearrangement of rho
    const long ka = static_cast<long>(supp_a.size());
    const long ds = basis.matrix_dim();
    // rho tensor [bra merged..., ket merged...]; build R[(c_a,r_a),(c_b,r_b)]
    std::vector<long> ext(static_cast<size_t>(2 * km), d);
    Tensor rt(ext, false);
    for (long i = 0; i < dm; ++i)
      for (long j = 0; j < dm; ++j) rt[i * dm + j] = rho(i, j);
    rt.refresh_real_flag();
    std::vector<long> pos_a, pos_b;
    for (long s : supp_a)
      for (long i = 0; i < km; ++i)
        if (merged[static_cast<size_t>(i)] == s) pos_a.push_back(i);
    for (long s : supp_b)
      for (long i = 0; i < km; ++i)
        if (merged[static_cast<size_t>(i)] == s) pos_b.push_back(i);
    std::vector<long> perm;
    for (long q : pos_a) perm.push_back(km + q);  // c_a (ket)
    for (long q : pos_a) perm.push_back(q);       // r_a (bra)
    for (long q : pos_b) perm.push_back(km + q);
    for (long q : pos_b) perm.push_back(q);
    Tensor r = permuted(rt, perm);
    long da = ipow(d, ka);
    long dbm = dm / da;
    Tensor rm = r.reshaped({da * da, dbm * dbm});
    // VA[(c,r), alpha] = A_alpha(c, r)  (so that sum R*A*B = trace pairing)
    MatrixXcd va(da * da, nb), vb(dbm * dbm, nb);
    for (long a = 0; a < nb; ++a) {
      MatrixXcd e = basis.element(a);
      (void)ds;
      for (long c = 0; c < da; ++c)
        for (long rr = 0; rr < da; ++rr) va(c * da + rr, a) = e(c, rr);
      for (long c = 0; c < dbm; ++c)
        for (long rr = 0; rr < dbm; ++rr) vb(c * dbm + rr, a) = e(c, rr);
    }
    MatrixXcd rmat(da * da, dbm * dbm);
    for (long i = 0; i < da * da; ++i)
      for (long j = 0; j < dbm * dbm; ++j) rmat(i, j) = rm[i * (dbm * dbm) + j];
    p = va.transpose() * rmat * vb;
  } else {
    // overlapping supports: multiply embedded operators on the merged space
    std::vector<MatrixXcd> xa(static_cast<size_t>(nb));
    for (long a = 0; a < nb; ++a) xa[static_cast<size_t>(a)] = rho * embed_operator(basis.element(a), supp_a, merged, d);
    for (long b = 0; b < nb; ++b) {
      MatrixXcd eb = embed_operator(basis.element(b), supp_b, merged, d);
      for (long a = 0; a < nb; ++a) p(a, b) = (xa[static_cast<size_t>(a)] * eb).trace();
    }
  }
  return p;
}

}  // namespace

ExactSfResult exact_structure_factor(const PepsUnitCell& peps, const FiniteTorus& torus, const OperatorBasis& basis,
                                     const Momentum& q, OraclePath path) {
  if (!q.commensurate_with(torus)) fail("structure factor: momentum incommensurate with torus");
  if (path == OraclePath::statevector) {
    VectorXcd psi = contract_torus_statevector(peps, torus);
    return statevector_structure_factor(psi, torus, basis, q);
  }
  const SupportGeometry& geom = basis.geometry();
  const long d = geom.phys_dim;
  const long nb = basis.size();

  SupportPlacement s0 = place_support(geom, torus, 0, 0);
  MatrixXcd rho0 = rdm_on_support(peps, torus, s0.sites);
  VectorXd evs(nb);
  for (long a = 0; a < nb; ++a) {
    cplx t = (rho0 * basis.element(a)).trace();
    evs(a) = t.real();
  }

  MatrixXcd s = MatrixXcd::Zero(nb, nb);
  for (long y = 0; y < torus.ly; ++y)
    for (long x = 0; x < torus.lx; ++x) {
      SupportPlacement sx = place_support(geom, torus, x, y);
      std::vector<long> merged;
      for (long m : sx.sites) merged.push_back(m);
      for (long m : s0.sites)
        if (std::find(merged.begin(), merged.end(), m) == merged.end()) merged.push_back(m);
      std::sort(merged.begin(), merged.end());
      MatrixXcd rho = rdm_on_support(peps, torus, merged);
      MatrixXcd p = pairings_from_rho(rho, basis, sx.sites, s0.sites, merged, d);
      cplx ph = std::conj(q.phase({x, y}));
      s += ph * (p - (evs * evs.transpose()).cast<cplx>());
    }
  // Overlapping displacements contribute commutator terms that are purely
  // imaginary and antisymmetric; they cancel in (S + S^T)/2. Only the
  // symmetric imaginary part signals an actual defect.
  ExactSfResult res;
  res.max_imag = (0.5 * (s.imag() + s.imag().transpose())).cwiseAbs().maxCoeff();
  res.s_raw = s.real();
  res.max_asym = (res.s_raw - res.s_raw.transpose()).cwiseAbs().maxCoeff();
  return res;
}

ExactSfResult statevector_structure_factor(const VectorXcd& psi, const FiniteTorus& torus, const OperatorBasis& basis,
                                           const Momentum& q) {
  if (!q.commensurate_with(torus)) fail("structure factor: momentum incommensurate with torus");
  const SupportGeometry& geom = basis.geometry();
  const long nb = basis.size();
  const long dim = psi.size();
  if (dim != ipow(geom.phys_dim, torus.sites())) fail("structure factor: state dimension mismatch");
  double nrm2 = psi.squaredNorm();

  MatrixXcd w(dim, nb);
  SupportPlacement s0 = place_support(geom, torus, 0, 0);
  for (long b = 0; b < nb; ++b) {
    GlobalOperator g = GlobalOperator::at_sites(basis.element(b), s0.sites, geom.phys_dim, torus.sites());
    w.col(b) = g.apply(psi);
  }
  VectorXcd evc = (w.adjoint() * psi) / nrm2;
  for (long b = 0; b < nb; ++b)
    if (std::abs(evc(b).imag()) > 1e-9) fail("structure factor: non-real expectation");

  MatrixXcd s = MatrixXcd::Zero(nb, nb);
  MatrixXcd v(dim, nb);
  for (long y = 0; y < torus.ly; ++y)
    for (long x = 0; x < torus.lx; ++x) {
      SupportPlacement sx = place_support(geom, torus, x, y);
      for (long a = 0; a < nb; ++a) {
        GlobalOperator g = GlobalOperator::at_sites(basis.element(a), sx.sites, geom.phys_dim, torus.sites());
        v.col(a) = g.apply(psi);
      }
      MatrixXcd p = (v.adjoint() * w) / nrm2;  // <psi| o^a_x o^b_0 |psi>
      cplx ph = std::conj(q.phase({x, y}));
      s += ph * (p - evc * evc.transpose());
    }
  ExactSfResult res;
  res.max_imag = (0.5 * (s.imag() + s.imag().transpose())).cwiseAbs().maxCoeff();
  res.s_raw = s.real();
  res.max_asym = (res.s_raw - res.s_raw.transpose()).cwiseAbs().maxCoeff();
  return res;
}

}  // namespace pepsx
