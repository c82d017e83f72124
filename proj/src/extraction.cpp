#include "pepsx/extraction.hpp"

#include <algorithm>
#include <cmath>

namespace pepsx {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("extraction: " + msg); }

}  // namespace

StructureFactorMatrix assemble_raw(const MatrixXd& s_raw, const Momentum& q, const std::string& provenance,
                                   double max_imag, double psd_floor) {
  StructureFactorMatrix out;
  out.raw = s_raw;
  out.sym = 0.5 * (s_raw + s_raw.transpose());
  out.q = q;
  out.provenance = provenance;
  out.max_imag = max_imag;
  out.max_asym = (s_raw - s_raw.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(out.sym, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues()(0);
  out.psd_flagged = out.min_eigenvalue < psd_floor;
  return out;
}

StructureFactorMatrix assemble(const ExactSfResult& sf, const Momentum& q, const std::string& provenance,
                               double imag_tol, double psd_floor) {
  if (sf.max_imag > imag_tol) fail("assemble: imaginary parts above tolerance");
  return assemble_raw(sf.s_raw, q, provenance, sf.max_imag, psd_floor);
}

DeflatedMatrix deflate(const StructureFactorMatrix& s, const std::vector<std::vector<VectorXd>>& subspaces,
                       double sentinel) {
  const long n = s.sym.rows();
  long total = 0;
  for (const auto& set : subspaces) total += static_cast<long>(set.size());
  DeflatedMatrix out;
  out.record.requested_vectors = total;
  out.record.sentinel = sentinel;
  out.sym = s.sym;
  if (total == 0) {
    out.m = s.sym;
    out.basis = MatrixXd::Zero(n, 0);
    out.complement = MatrixXd::Identity(n, n);
    return out;
  }
  MatrixXd v(n, total);
  long c = 0;
  for (const auto& set : subspaces)
    for (const auto& vec : set) {
      if (vec.size() != n) fail("deflate: vector length mismatch");
      v.col(c++) = vec;
    }
  // rank-revealing orthonormalization (repeated directions are fine)
  Eigen::ColPivHouseholderQR<MatrixXd> qr(v);
  qr.setThreshold(1e-10);
  long rank = qr.rank();
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, std::min(n, total));
  MatrixXd basis = q.leftCols(rank);
  Eigen::HouseholderQR<MatrixXd> qr2(basis);
  MatrixXd full = qr2.householderQ();
  out.complement = full.rightCols(n - rank);
  MatrixXd proj = MatrixXd::Identity(n, n) - basis * basis.transpose();
  out.m = proj * s.sym * proj + sentinel * (basis * basis.transpose());
  out.m = 0.5 * (out.m + out.m.transpose()).eval();
  out.basis = basis;
  out.record.rank = rank;
  return out;
}

std::vector<ConservedOperatorSolution> solve(const DeflatedMatrix& dm, const OperatorBasis& basis, long count,
                                             const Momentum& q, double degeneracy_gap) {
  const long n = dm.m.rows();
  if (basis.size() != n) fail("solve: basis size mismatch");
  // diagonalize within the deflated complement so the sentinel scale never
  // touches the physical eigenvalues
  EighResult eig;
  {
    MatrixXd small = dm.complement.transpose() * dm.sym * dm.complement;
    auto es = eigh_sym(MatrixXd(0.5 * (small + small.transpose())));
    eig.eigenvalues = es.eigenvalues;
    eig.eigenvectors = dm.complement * es.eigenvectors;
  }
  const long nfree = eig.eigenvalues.size();
  count = std::min(count, nfree);

  // cluster nearly degenerate eigenvalues
  std::vector<long> block_id(static_cast<size_t>(nfree), 0);
  long blocks = 0;
  for (long i = 1; i < nfree; ++i) {
    if (eig.eigenvalues(i) - eig.eigenvalues(i - 1) > degeneracy_gap) ++blocks;
    block_id[static_cast<size_t>(i)] = blocks;
  }
  std::vector<long> block_start(static_cast<size_t>(blocks + 2), nfree);
  for (long i = nfree - 1; i >= 0; --i) block_start[static_cast<size_t>(block_id[static_cast<size_t>(i)])] = i;
  block_start[static_cast<size_t>(blocks + 1)] = nfree;

  std::vector<ConservedOperatorSolution> out;
  for (long i = 0; i < count; ++i) {
    long b = block_id[static_cast<size_t>(i)];
    long lo = block_start[static_cast<size_t>(b)];
    long hi = lo;
    while (hi < nfree && block_id[static_cast<size_t>(hi)] == b) ++hi;
    long bs = hi - lo;

    VectorXd vec;
    if (bs == 1) {
      vec = eig.eigenvectors.col(i);
    } else {
      // canonical orientation inside the degenerate span: project coordinate
      // axes in index order and orthonormalize
      MatrixXd span = eig.eigenvectors.middleCols(lo, bs);
      MatrixXd chosen(n, bs);
      long got = 0;
      for (long axis = 0; axis < n && got < bs; ++axis) {
        VectorXd cand = span * (span.transpose() * VectorXd::Unit(n, axis));
        for (long k = 0; k < got; ++k) cand -= chosen.col(k).dot(cand) * chosen.col(k);
        double nrm = cand.norm();
        if (nrm > 1e-8) {
          chosen.col(got++) = cand / nrm;
        }
      }
      if (got < bs) fail("solve: canonical block orientation failed");
      vec = chosen.col(i - lo);
    }
    // sign fix: largest-magnitude coefficient positive
    long imax = 0;
    vec.cwiseAbs().maxCoeff(&imax);
    if (vec(imax) < 0) vec = -vec;

    ConservedOperatorSolution sol;
    sol.eigenvalue = eig.eigenvalues(i);
    sol.coefficients = vec;
    sol.local_term = basis.materialize(vec);
    sol.q = q;
    sol.block = b;
    sol.block_size = bs;
    out.push_back(std::move(sol));
  }
  return out;
}

RvbAnsatzCoefficients rvb_coefficients(const ConservedOperatorSolution& sol) {
  if (sol.coefficients.size() != 39) fail("rvb_coefficients: expected the 39-string basis");
  auto idx = su2_class_index();
  auto mean_over = [&](const std::vector<long>& is) {
    double s = 0;
    for (long i : is) s += sol.coefficients(i);
    return s / static_cast<double>(is.size());
  };
  auto spread_over = [&](const std::vector<long>& is, double mean) {
    double w = 0;
    for (long i : is) w = std::max(w, std::abs(sol.coefficients(i) - mean));
    return w;
  };
  RvbAnsatzCoefficients out{};
  out.jt1 = mean_over(idx.nn);
  out.jt2 = mean_over(idx.diag);
  out.qt1 = mean_over(idx.quad_parallel);
  out.qt2 = mean_over(idx.quad_cross);
  if (std::abs(out.jt1) < 1e-8) fail("rvb_coefficients: vanishing nearest-neighbor coupling");
  out.class_spread = std::max({spread_over(idx.nn, out.jt1), spread_over(idx.diag, out.jt2),
                               spread_over(idx.quad_parallel, out.qt1), spread_over(idx.quad_cross, out.qt2)});
  // the three all-axis strings carry 2*qt1 + qt2 of the plaquette products
  double allsame_expect = 2.0 * out.qt1 + out.qt2;
  out.all_axis_residual = spread_over(idx.all_same, allsame_expect);
  out.j1 = 1.0;
  out.j2 = out.jt2 / (2.0 * out.jt1);
  out.q1 = 4.0 * out.qt1 / (2.0 * out.jt1);
  out.q2 = 4.0 * out.qt2 / (2.0 * out.jt1);
  out.variance_per_site = sol.eigenvalue / (4.0 * out.jt1 * out.jt1);
  return out;
}

GlobalOperator rvb_model_hamiltonian(double j2, double q1, double q2, const FiniteTorus& torus) {
  SpinOps sp = spin_operators(2);
  std::vector<MatrixXcd> s = {sp.sx, sp.sy, sp.sz};
  auto dot = [&](long a, long b) {
    MatrixXcd m = MatrixXcd::Zero(16, 16);
    for (long ax = 0; ax < 3; ++ax) {
      MatrixXcd t = MatrixXcd::Identity(1, 1);
      for (long site = 0; site < 4; ++site)
        t = kron(t, site == a || site == b ? s[static_cast<size_t>(ax)] : MatrixXcd::Identity(2, 2));
      m += t;
    }
    return m;
  };
  // plaquette sites (0,0),(1,0),(0,1),(1,1); each lattice bond is shared by
  // two plaquettes, so nearest-neighbor terms enter with weight 1/2
  MatrixXcd local = MatrixXcd::Zero(16, 16);
  local += 0.5 * (dot(0, 1) + dot(2, 3) + dot(0, 2) + dot(1, 3));
  local += j2 * (dot(0, 3) + dot(1, 2));
  local += q1 * (dot(0, 1) * dot(2, 3) + dot(0, 2) * dot(1, 3));
  local += q2 * (dot(0, 3) * dot(1, 2));
  return GlobalOperator::build_local(local, SupportGeometry::plaquette(2), torus, Momentum::zero());
}

MatrixXcd aklt_pair_coupling_unitary() {
  MatrixXcd u = MatrixXcd::Zero(25, 25);
  long col = 0;
  for (long s = 0; s <= 4; ++s)
    for (long mi = 0; mi <= 2 * s; ++mi) {
      double m = static_cast<double>(s) - mi;
      for (long a = 0; a < 5; ++a)
        for (long b = 0; b < 5; ++b) {
          double m1 = 2.0 - a, m2 = 2.0 - b;
          u(a * 5 + b, col) = clebsch_gordan(2, m1, 2, m2, static_cast<double>(s), m);
        }
      ++col;
    }
  return u;
}

AkltFamilyReport aklt_family_membership(const ConservedOperatorSolution& sol, double tolerance) {
  if (sol.local_term.rows() != 25) fail("aklt_family_membership: expected a d=5 pair term");
  static const MatrixXcd u = aklt_pair_coupling_unitary();
  MatrixXcd b = u.adjoint() * sol.local_term * u;
  // channels S=0..3 occupy the first 16 coupled states, S=4 the last 9
  double alpha = b.topLeftCorner(16, 16).trace().real() / 16.0;
  double resid = (b.topLeftCorner(16, 16) - alpha * MatrixXcd::Identity(16, 16)).cwiseAbs().maxCoeff();
  resid = std::max(resid, b.topRightCorner(16, 9).cwiseAbs().maxCoeff());
  resid = std::max(resid, b.bottomLeftCorner(9, 16).cwiseAbs().maxCoeff());
  AkltFamilyReport rep;
  rep.alpha = alpha;
  rep.residual = resid;
  rep.in_family = resid < tolerance;
  return rep;
}

VectorXd ising_conserved_plaquette_coeffs() {
  OperatorBasis basis = product_basis(SupportGeometry::plaquette(2));
  // site order (0,0),(1,0),(0,1),(1,1); labels I=0, X=1, Y=2, Z=3
  VectorXd v = VectorXd::Zero(basis.size());
  auto set = [&](long a, long b, long c, long d, double w) { v(basis.index_of_site_labels({a, b, c, d})) = w; };
  set(3, 0, 0, 3, 2.0);   // Z..Z on the main diagonal
  set(0, 3, 3, 0, -2.0);  // Z..Z on the anti diagonal
  set(3, 1, 0, 3, -1.0);  // Z X . Z
  set(3, 0, 1, 3, -1.0);  // Z . X Z
  set(1, 3, 3, 0, 1.0);   // X Z Z .
  set(0, 3, 3, 1, 1.0);   // . Z Z X
  v.normalize();
  return v;
}

SupportGeometry ising_vertex_geometry() {
  return SupportGeometry({{0, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, 0}}, 2);
}

MatrixXcd ising_conserved_vertex_term() {
  // sites ordered (center, up, right, down, left); P- = I - X at the center
  auto letter = [](char c) -> MatrixXcd {
    switch (c) {
      case 'I': return MatrixXcd::Identity(2, 2);
      case 'X': return pauli_x();
      case 'Z': return pauli_z();
      case 'P': return MatrixXcd::Identity(2, 2) - pauli_x();
    }
    throw std::invalid_argument("bad letter");
  };
  auto str5 = [&](const char* s) {
    MatrixXcd m = letter(s[0]);
    for (int i = 1; i < 5; ++i) m = kron(m, letter(s[i]));
    return m;
  };
  MatrixXcd h = MatrixXcd::Zero(32, 32);
  h += str5("PZZII");  // Z up, Z right
  h += str5("PIIZZ");  // Z down, Z left
  h -= str5("PIZZI");  // Z right, Z down
  h -= str5("PZIIZ");  // Z up, Z left
  return h;
}

}  // namespace pepsx
