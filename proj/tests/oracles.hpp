#ifndef PEPSX_TEST_ORACLES_HPP
#define PEPSX_TEST_ORACLES_HPP

// Test-only reference computations, independent of the library paths they
// validate.

#include <cmath>
#include <vector>

#include "pepsx/exact_oracle.hpp"
#include "pepsx/lattice.hpp"

namespace pepsx::testing {

// exp(beta/2 sum_<ij> z_i z_j) amplitudes by direct bond enumeration.
inline VectorXd ising_amplitudes(double beta, const FiniteTorus& t) {
  const long n = t.sites();
  VectorXd amps(1L << n);
  for (long idx = 0; idx < (1L << n); ++idx) {
    double e = 0.0;
    for (long y = 0; y < t.ly; ++y)
      for (long x = 0; x < t.lx; ++x) {
        long s = t.site(x, y);
        long zr = t.site(x + 1, y), zd = t.site(x, y + 1);
        auto z = [&](long site) { return ((idx >> (n - 1 - site)) & 1) ? -1.0 : 1.0; };
        e += z(s) * z(zr) + z(s) * z(zd);
      }
    amps(idx) = std::exp(0.5 * beta * e);
  }
  return amps;
}

// All nearest-neighbor dimer coverings of a small torus with singlet signs,
// enumerated directly (edges oriented site -> right/down neighbor).
inline VectorXd rvb_amplitudes_by_dimers(const FiniteTorus& t) {
  const long n = t.sites();
  struct Edge {
    long from, to;
  };
  std::vector<Edge> edges;
  for (long y = 0; y < t.ly; ++y)
    for (long x = 0; x < t.lx; ++x) {
      edges.push_back({t.site(x, y), t.site(x + 1, y)});
      edges.push_back({t.site(x, y), t.site(x, y + 1)});
    }
  VectorXd psi = VectorXd::Zero(1L << n);
  std::vector<long> chosen;
  std::function<void(size_t, long)> rec = [&](size_t e, long covered) {
    if (covered == (1L << n) - 1) {
      // one covering: add sum over spin assignments
      for (long idx = 0; idx < (1L << n); ++idx) {
        double w = 1.0;
        for (long ei : chosen) {
          long zf = (idx >> (n - 1 - edges[static_cast<size_t>(ei)].from)) & 1;
          long zt = (idx >> (n - 1 - edges[static_cast<size_t>(ei)].to)) & 1;
          if (zf == 0 && zt == 1)
            w *= 1.0;  // up-down
          else if (zf == 1 && zt == 0)
            w *= -1.0;  // down-up
          else {
            w = 0.0;
            break;
          }
        }
        psi(idx) += w;
      }
      return;
    }
    if (e >= edges.size()) return;
    rec(e + 1, covered);
    const Edge& ed = edges[e];
    if (ed.from != ed.to && !((covered >> ed.from) & 1) && !((covered >> ed.to) & 1)) {
      chosen.push_back(static_cast<long>(e));
      rec(e + 1, covered | (1L << ed.from) | (1L << ed.to));
      chosen.pop_back();
    }
  };
  rec(0, 0);
  return psi;
}

// Classical square-lattice Ising observables on a torus via the column
// transfer matrix (weights exp(beta sum zz) = squared PEPS amplitudes).
class ClassicalIsingTm {
 public:
  ClassicalIsingTm(double beta, const FiniteTorus& t) : t_(t), nc_(1L << t.ly) {
    tm_.resize(nc_, nc_);
    for (long c = 0; c < nc_; ++c)
      for (long cp = 0; cp < nc_; ++cp) {
        double e = 0.0;
        for (long y = 0; y < t.ly; ++y) {
          e += z(c, y) * z(c, (y + 1) % t.ly);  // vertical bonds of column c
          e += z(c, y) * z(cp, y);              // horizontal bonds to the next column
        }
        tm_(c, cp) = std::exp(beta * e);
      }
  }

  double partition() const { return power_trace({}); }

  // correlation <Z_(x1,y1) Z_(x2,y2)>
  double zz(long x1, long y1, long x2, long y2) const {
    std::vector<std::pair<long, long>> ins = {{x1, y1}, {x2, y2}};
    return power_trace(ins) / partition();
  }

  double site_z(long x, long y) const { return power_trace({{x, y}}) / partition(); }

 private:
  static double zval(long bit) { return bit ? -1.0 : 1.0; }
  double z(long c, long y) const { return zval((c >> (t_.ly - 1 - y)) & 1); }

  double power_trace(std::vector<std::pair<long, long>> ins) const {
    MatrixXd acc = MatrixXd::Identity(nc_, nc_);
    for (long x = 0; x < t_.lx; ++x) {
      MatrixXd col = MatrixXd::Identity(nc_, nc_);
      for (const auto& [ix, iy] : ins)
        if ((ix % t_.lx + t_.lx) % t_.lx == x)
          for (long c = 0; c < nc_; ++c) col(c, c) *= z(c, iy);
      acc = acc * col * tm_;
    }
    return acc.trace();
  }

  FiniteTorus t_;
  long nc_;
  MatrixXd tm_;
};

inline double ising_magnetization_exact(double beta) {
  double s = std::sinh(2.0 * beta);
  double v = 1.0 - 1.0 / (s * s * s * s);
  return v <= 0 ? 0.0 : std::pow(v, 0.125);
}

}  // namespace pepsx::testing

#endif
