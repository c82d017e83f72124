#include "pepsx/models.hpp"

#include <cmath>

namespace pepsx {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("models: " + msg); }

// Absorb bond matrices into the right and down legs of a vertex tensor with
// index order (phys, l, u, r, d).
Tensor absorb_right_down(const Tensor& vertex, const MatrixXd& bond_h, const MatrixXd& bond_v) {
  Tensor bh = Tensor::from_matrix(bond_h);
  Tensor bv = Tensor::from_matrix(bond_v);
  Tensor t = contract(vertex, bh, {{3, 0}});  // (p,l,u,d,r')
  t = contract(t, bv, {{3, 0}});              // (p,l,u,r',d')
  return t;
}

}  // namespace

void PepsUnitCell::validate() const {
  if (cell_w <= 0 || cell_h <= 0) fail("empty cell");
  if (static_cast<long>(site_tensors.size()) != cell_w * cell_h) fail("cell size mismatch");
  for (const auto& t : site_tensors) {
    if (t.rank() != 5) fail("site tensor must have 5 indices (p,l,u,r,d)");
    if (t.extent(0) != phys_dim) fail("physical dimension mismatch");
    t.check_finite("unit cell validation");
  }
  for (long y = 0; y < cell_h; ++y)
    for (long x = 0; x < cell_w; ++x) {
      const Tensor& s = site(x, y);
      if (s.extent(3) != site(x + 1, y).extent(1)) fail("horizontal bond mismatch");
      if (s.extent(4) != site(x, y + 1).extent(2)) fail("vertical bond mismatch");
    }
}

Tensor aklt_vertex_tensor() {
  Tensor t({5, 2, 2, 2, 2});
  auto half = [](long v) { return 0.5 - static_cast<double>(v); };  // 0 -> +1/2, 1 -> -1/2
  for (long i = 0; i < 5; ++i) {
    double mi = 2.0 - static_cast<double>(i);
    for (long l = 0; l < 2; ++l)
      for (long u = 0; u < 2; ++u)
        for (long r = 0; r < 2; ++r)
          for (long d = 0; d < 2; ++d) {
            double mj = half(l) + half(r);
            double mk = half(u) + half(d);
            double val = clebsch_gordan(1, mj, 1, mk, 2, mi) * clebsch_gordan(0.5, half(l), 0.5, half(r), 1, mj) *
                         clebsch_gordan(0.5, half(u), 0.5, half(d), 1, mk);
            t.at({i, l, u, r, d}) = val;
          }
  }
  return t;
}

PepsUnitCell build_aklt_peps() {
  MatrixXd singlet(2, 2);
  singlet << 0, 1, -1, 0;
  PepsUnitCell cell;
  cell.cell_w = cell.cell_h = 1;
  cell.phys_dim = 5;
  cell.site_tensors = {absorb_right_down(aklt_vertex_tensor(), singlet, singlet)};
  cell.hint = InjectivityHint::injective;
  cell.validate();
  return cell;
}

Tensor rvb_vertex_tensor() {
  // virtual: 0 = empty, 1 = up, 2 = down; physical: 0 = up, 1 = down
  Tensor t({2, 3, 3, 3, 3});
  for (long s = 0; s < 2; ++s)
    for (long leg = 0; leg < 4; ++leg) {
      std::vector<long> idx(5, 0);
      idx[0] = s;
      idx[static_cast<size_t>(1 + leg)] = s + 1;
      t.at(idx) = 1.0;
    }
  return t;
}

PepsUnitCell build_rvb_peps() {
  // bond: empty-empty plus the spin singlet
  MatrixXd bond = MatrixXd::Zero(3, 3);
  bond(0, 0) = 1.0;
  bond(1, 2) = 1.0;
  bond(2, 1) = -1.0;
  PepsUnitCell cell;
  cell.cell_w = cell.cell_h = 1;
  cell.phys_dim = 2;
  cell.site_tensors = {absorb_right_down(rvb_vertex_tensor(), bond, bond)};
  cell.hint = InjectivityHint::topological;
  cell.validate();
  return cell;
}

double ising_beta_critical() { return 0.5 * std::log(1.0 + std::sqrt(2.0)); }

PepsUnitCell build_ising_peps(double beta) {
  if (!std::isfinite(beta)) fail("ising: beta must be finite");
  // copy tensor at the site; bond weight exp(beta/2 z z') absorbed into the
  // right/down legs reproduces amplitudes exp(beta/2 sum_zz)
  MatrixXd w(2, 2);
  double p = std::exp(0.5 * beta), m = std::exp(-0.5 * beta);
  w << p, m, m, p;
  Tensor vertex({2, 2, 2, 2, 2});
  for (long i = 0; i < 2; ++i) vertex.at({i, i, i, i, i}) = 1.0;
  PepsUnitCell cell;
  cell.cell_w = cell.cell_h = 1;
  cell.phys_dim = 2;
  cell.site_tensors = {absorb_right_down(vertex, w, w)};
  cell.hint = beta > ising_beta_critical() ? InjectivityHint::symmetry_broken_cat : InjectivityHint::injective;
  cell.virtual_symmetry = pauli_x();
  cell.validate();
  return cell;
}

long edge_count(const FiniteTorus& t) { return 2 * t.sites(); }

long edge_index(const FiniteTorus& t, long x, long y, int orient) {
  return 2 * t.site(x, y) + orient;
}

VectorXd build_deformed_tc_state(double beta, const FiniteTorus& torus) {
  const long ne = edge_count(torus);
  if (ne > 24) fail("deformed toric code state: torus too large");
  const long dim = 1L << ne;
  VectorXd psi = VectorXd::Zero(dim);
  psi(0) = 1.0;  // all edges Z=+1
  auto bit_of = [&](long e) { return ne - 1 - e; };
  for (long y = 0; y < torus.ly; ++y)
    for (long x = 0; x < torus.lx; ++x) {
      long mask = (1L << bit_of(edge_index(torus, x, y, 0))) | (1L << bit_of(edge_index(torus, x - 1, y, 0))) |
                  (1L << bit_of(edge_index(torus, x, y, 1))) | (1L << bit_of(edge_index(torus, x, y - 1, 1)));
      VectorXd flipped(dim);
      for (long i = 0; i < dim; ++i) flipped(i ^ mask) = psi(i);
      psi += flipped;
    }
  if (beta != 0.0) {
    for (long i = 0; i < dim; ++i) {
      long ones = __builtin_popcountll(static_cast<unsigned long long>(i));
      double zsum = static_cast<double>(ne - 2 * ones);  // bit 0 means Z=+1
      psi(i) *= std::exp(0.5 * beta * zsum);
    }
  }
  return psi;
}

}  // namespace pepsx
