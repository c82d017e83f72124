#include <doctest.h>

#include <complex>
#include <random>

#include "pepsx/tensor.hpp"

using namespace pepsx;

namespace {

Tensor random_tensor(std::vector<long> ext, unsigned seed, bool real = true) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(ext, real);
  for (long i = 0; i < t.size(); ++i) t[i] = real ? cplx(u(rng), 0.0) : cplx(u(rng), u(rng));
  return t;
}

// Independent oracle: direct nested-loop index summation.
Tensor naive_contract(const Tensor& a, const Tensor& b, const std::vector<std::pair<long, long>>& pairs) {
  std::vector<bool> ca(a.rank(), false), cb(b.rank(), false);
  for (auto [i, j] : pairs) {
    ca[i] = true;
    cb[j] = true;
  }
  std::vector<long> free_a, free_b, out_ext;
  for (long i = 0; i < a.rank(); ++i)
    if (!ca[i]) {
      free_a.push_back(i);
      out_ext.push_back(a.extent(i));
    }
  for (long i = 0; i < b.rank(); ++i)
    if (!cb[i]) {
      free_b.push_back(i);
      out_ext.push_back(b.extent(i));
    }
  Tensor out(out_ext.empty() ? std::vector<long>{} : out_ext, a.is_real() && b.is_real());
  long ksz = 1;
  for (auto [i, j] : pairs) ksz *= a.extent(i);
  std::vector<long> ia(a.rank(), 0), ib(b.rank(), 0), io(out.rank(), 0);
  long nout = out.size();
  for (long flat = 0; flat < nout; ++flat) {
    long rem = flat;
    for (long k = out.rank() - 1; k >= 0; --k) {
      io[k] = rem % out.extent(k);
      rem /= out.extent(k);
    }
    for (size_t k = 0; k < free_a.size(); ++k) ia[free_a[k]] = io[k];
    for (size_t k = 0; k < free_b.size(); ++k) ib[free_b[k]] = io[free_a.size() + k];
    cplx acc = 0.0;
    for (long kk = 0; kk < ksz; ++kk) {
      long rem2 = kk;
      for (long p = static_cast<long>(pairs.size()) - 1; p >= 0; --p) {
        long e = a.extent(pairs[p].first);
        ia[pairs[p].first] = rem2 % e;
        ib[pairs[p].second] = rem2 % e;
        rem2 /= e;
      }
      acc += a.at(ia) * b.at(ib);
    }
    out[flat] = acc;
  }
  return out;
}

double max_diff(const Tensor& x, const Tensor& y) {
  REQUIRE(x.extents() == y.extents());
  double m = 0;
  for (long i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("2x2 matrix product with permutation") {
  Tensor a({2, 2}), b({2, 2});
  a[0] = 1;
  a[1] = 2;
  a[2] = 3;
  a[3] = 4;
  b[0] = 0;
  b[1] = 1;
  b[2] = 1;
  b[3] = 0;
  Tensor c = contract(a, b, {{1, 0}});
  CHECK(c.at({0, 0}) == cplx(2.0));
  CHECK(c.at({0, 1}) == cplx(1.0));
  CHECK(c.at({1, 0}) == cplx(4.0));
  CHECK(c.at({1, 1}) == cplx(3.0));
}

TEST_CASE("contraction with identity reorders indices only") {
  Tensor t = random_tensor({3, 4, 5}, 7);
  Tensor id = Tensor::identity_matrix(4);
  Tensor r = contract(t, id, {{1, 0}});  // result [3,5,4]
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 4; ++j)
      for (long k = 0; k < 5; ++k) CHECK(r.at({i, k, j}) == t.at({i, j, k}));
}

TEST_CASE("associativity against the nested-loop oracle") {
  Tensor a = random_tensor({3, 4, 2}, 1);
  Tensor b = random_tensor({4, 5, 3}, 2);
  Tensor c = random_tensor({5, 2, 3}, 3);
  // (A.B).C over a chain of shared indices, vs the oracle on each step
  Tensor ab = contract(a, b, {{1, 0}});
  Tensor ab_o = naive_contract(a, b, {{1, 0}});
  CHECK(max_diff(ab, ab_o) < 1e-12);
  Tensor abc = contract(ab, c, {{2, 0}, {1, 1}});
  Tensor abc_o = naive_contract(ab_o, c, {{2, 0}, {1, 1}});
  CHECK(max_diff(abc, abc_o) < 1e-12);
  // associativity: contract b with c first
  Tensor bc = naive_contract(b, c, {{1, 0}});
  Tensor a_bc = naive_contract(a, bc, {{1, 0}, {2, 2}});
  // a_bc indices: [a0, b2, c1]; abc indices: [a0, b2, c1]
  CHECK(max_diff(abc, a_bc) < 1e-12);
}

TEST_CASE("complex path agrees with real path within 1e-13") {
  Tensor a = random_tensor({6, 7}, 11);
  Tensor b = random_tensor({7, 5}, 12);
  Tensor ac = a, bc = b;
  ac.mark_complex();
  bc.mark_complex();
  Tensor r1 = contract(a, b, {{1, 0}});
  Tensor r2 = contract(ac, bc, {{1, 0}});
  CHECK(r1.is_real());
  CHECK_FALSE(r2.is_real());
  CHECK(max_diff(r1, r2) < 1e-13);
}

TEST_CASE("bilinearity in the first argument") {
  Tensor a = random_tensor({4, 3}, 21);
  Tensor b = random_tensor({3, 4}, 22);
  Tensor lhs = contract(2.5 * a, b, {{1, 0}});
  Tensor rhs = 2.5 * contract(a, b, {{1, 0}});
  CHECK(max_diff(lhs, rhs) < 1e-13);
}

TEST_CASE("contract errors") {
  Tensor a({2, 3}), b({4, 2});
  CHECK_THROWS(contract(a, b, {{1, 0}}));            // extent mismatch
  CHECK_THROWS(contract(a, b, {{5, 0}}));            // out of range
  CHECK_THROWS(contract(a, b, {{0, 1}, {0, 1}}));    // repeated
}

TEST_CASE("svd of rank-1 outer product") {
  VectorXd u(3), v(4);
  u << 0.6, 0.8, 0.0;
  v << 0.5, 0.5, 0.5, 0.5;
  Tensor t({3, 4});
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 4; ++j) t.at({i, j}) = u(i) * v(j);
  auto res = svd_truncate(t, {0}, {1}, 4, 0.0);
  CHECK(res.s.size() >= 1);
  CHECK(res.s[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 1; i < res.s.size(); ++i) CHECK(res.s[i] < 1e-13);
  CHECK(res.discarded_weight == doctest::Approx(0.0));
}

TEST_CASE("svd of identity keeps the degenerate multiplet") {
  Tensor t = Tensor::identity_matrix(4);
  auto res = svd_truncate(t, {0}, {1}, 4, 0.0);
  REQUIRE(res.s.size() == 4);
  for (double s : res.s) CHECK(s == doctest::Approx(1.0));
  CHECK(res.discarded_weight == doctest::Approx(0.0));

  // truncating inside the multiplet: allowed to overshoot up to rank+4
  auto res2 = svd_truncate(t, {0}, {1}, 2, 0.0);
  CHECK(res2.kept == 4);
  CHECK_FALSE(res2.degeneracy_split);
}

TEST_CASE("svd reconstruction of a random 8x8 matrix") {
  Tensor t = random_tensor({8, 8}, 5);
  auto res = svd_truncate(t, {0}, {1}, 8, 0.0);
  Tensor sv = res.v;
  for (long i = 0; i < static_cast<long>(res.s.size()); ++i)
    for (long j = 0; j < 8; ++j) sv[i * 8 + j] *= res.s[i];
  Tensor rec = contract(res.u, sv, {{1, 0}});
  CHECK(max_diff(rec, t) < 1e-12);
}

TEST_CASE("svd reconstruction across a 3-1 index split") {
  Tensor t = random_tensor({2, 3, 2, 4}, 9);
  auto res = svd_truncate(t, {0, 2, 3}, {1}, 16, 0.0);
  Tensor sv = res.v;
  long n = 3;
  for (long i = 0; i < static_cast<long>(res.s.size()); ++i)
    for (long j = 0; j < n; ++j) sv[i * n + j] *= res.s[i];
  Tensor rec = contract(res.u, sv, {{3, 0}});  // [2,2,4,3]
  Tensor ref = permuted(t, {0, 2, 3, 1});
  CHECK(max_diff(rec, ref) < 1e-12);
}

TEST_CASE("svd gauge fixing is reproducible") {
  Tensor t = random_tensor({6, 6}, 33);
  auto r1 = svd_truncate(t, {0}, {1}, 6, 0.0);
  auto r2 = svd_truncate(t, {0}, {1}, 6, 0.0);
  CHECK(max_diff(r1.u, r2.u) == 0.0);
  // largest-magnitude entry of each left vector is real positive
  for (long j = 0; j < r1.kept; ++j) {
    double amax = 0;
    cplx best = 0;
    for (long i = 0; i < 6; ++i) {
      cplx x = r1.u[i * r1.kept + j];
      if (std::abs(x) > amax) {
        amax = std::abs(x);
        best = x;
      }
    }
    CHECK(best.real() > 0);
    CHECK(std::abs(best.imag()) < 1e-14);
  }
}

TEST_CASE("svd error cases") {
  Tensor t = random_tensor({3, 3}, 2);
  CHECK_THROWS(svd_truncate(t, {}, {0, 1}, 2, 0.0));
  Tensor bad({2, 2});
  bad[0] = cplx(std::nan(""), 0);
  CHECK_THROWS(svd_truncate(bad, {0}, {1}, 2, 0.0));
}

TEST_CASE("eigh of diag(3,1,2)") {
  MatrixXd m = MatrixXd::Zero(3, 3);
  m(0, 0) = 3;
  m(1, 1) = 1;
  m(2, 2) = 2;
  auto r = eigh_sym(m);
  CHECK(r.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(r.eigenvalues(1) == doctest::Approx(2.0));
  CHECK(r.eigenvalues(2) == doctest::Approx(3.0));
}

TEST_CASE("eigh of pauli z") {
  MatrixXd z(2, 2);
  z << 1, 0, 0, -1;
  auto r = eigh_sym(z);
  CHECK(r.eigenvalues(0) == doctest::Approx(-1.0));
  CHECK(r.eigenvalues(1) == doctest::Approx(1.0));
}

TEST_CASE("eigh reconstruction, orthonormality, permutation invariance") {
  const long n = 50;
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  MatrixXd a(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) a(i, j) = u(rng);
  MatrixXd s = 0.5 * (a + a.transpose());
  auto r = eigh_sym(s);
  MatrixXd rec = r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose();
  CHECK((rec - s).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((r.eigenvectors.transpose() * r.eigenvectors - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);

  // simultaneous row/column permutation leaves the spectrum unchanged
  std::vector<int> perm(n);
  for (long i = 0; i < n; ++i) perm[i] = static_cast<int>((i * 7 + 3) % n);
  MatrixXd p = MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
  auto r2 = eigh_sym(MatrixXd(p * s * p.transpose()));
  CHECK((r2.eigenvalues - r.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eigh rejects asymmetric and non-square input") {
  MatrixXd m(2, 2);
  m << 0, 1, 0, 0;
  CHECK_THROWS(eigh_sym(m));
  Tensor t({2, 3});
  CHECK_THROWS(eigh_sym(t));
}

TEST_CASE("randomized product svd matches dense svd on decaying spectrum") {
  const long n = 120;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  MatrixXd q1(n, n), q2(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      q1(i, j) = u(rng);
      q2(i, j) = u(rng);
    }
  Eigen::HouseholderQR<MatrixXd> qa(q1), qb(q2);
  MatrixXd qa_m = qa.householderQ(), qb_m = qb.householderQ();
  VectorXd sp(n);
  for (long i = 0; i < n; ++i) sp(i) = std::pow(0.7, i);
  MatrixXd m = qa_m * sp.asDiagonal() * qb_m.transpose();
  MatrixXd idm = MatrixXd::Identity(n, n);
  auto rs = randomized_product_svd(m, idm, 20);
  Eigen::BDCSVD<MatrixXd> svd(m);
  for (long i = 0; i < 20; ++i) CHECK(rs.s(i) == doctest::Approx(svd.singularValues()(i)).epsilon(1e-8));
  MatrixXd approx = rs.u * rs.s.asDiagonal() * rs.v.transpose();
  // error bounded by the first dropped singular value (with slack)
  CHECK((approx - m).cwiseAbs().maxCoeff() < 10 * svd.singularValues()(20));
}

TEST_SUITE_END();
