#ifndef PEPSX_LATTICE_HPP
#define PEPSX_LATTICE_HPP

#include <complex>
#include <stdexcept>
#include <vector>

namespace pepsx {

// 2D integer offset; x grows rightward, y grows downward.
struct Offset {
  long x = 0;
  long y = 0;
  friend bool operator==(const Offset& a, const Offset& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator<(const Offset& a, const Offset& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; }
  Offset operator+(const Offset& o) const { return {x + o.x, y + o.y}; }
  Offset operator-(const Offset& o) const { return {x - o.x, y - o.y}; }
};

// Periodic Lx x Ly torus; site index = y*Lx + x (row-major, x fastest).
struct FiniteTorus {
  long lx = 0;
  long ly = 0;
  long phys_dim = 2;

  FiniteTorus(long lx_, long ly_, long d_ = 2) : lx(lx_), ly(ly_), phys_dim(d_) {
    if (lx <= 0 || ly <= 0 || phys_dim < 2) throw std::invalid_argument("torus: bad dimensions");
  }
  long sites() const { return lx * ly; }
  long wrap_x(long x) const { return ((x % lx) + lx) % lx; }
  long wrap_y(long y) const { return ((y % ly) + ly) % ly; }
  long site(long x, long y) const { return wrap_y(y) * lx + wrap_x(x); }
  Offset coords(long s) const { return {s % lx, s / lx}; }
};

// Commensurate momentum q = (2*pi*n/Lx, 2*pi*m/Ly).
struct Momentum {
  long n = 0, m = 0, lx = 1, ly = 1;

  Momentum() = default;
  Momentum(long n_, long m_, long lx_, long ly_) : n(n_), m(m_), lx(lx_), ly(ly_) {
    if (lx <= 0 || ly <= 0 || n < 0 || n >= lx || m < 0 || m >= ly) throw std::invalid_argument("momentum: out of range");
    auto gcd = [](long a, long b) {
      while (b) {
        long t = a % b;
        a = b;
        b = t;
      }
      return a;
    };
    if (n != 0 && gcd(n, lx) != 1) throw std::invalid_argument("momentum: gcd(n,Lx) != 1");
    if (m != 0 && gcd(m, ly) != 1) throw std::invalid_argument("momentum: gcd(m,Ly) != 1");
  }
  static Momentum zero() { return Momentum(0, 0, 1, 1); }
  static Momentum pi_pi() { return Momentum(1, 1, 2, 2); }
  static Momentum pi_zero() { return Momentum(1, 0, 2, 1); }

  double qx() const { return 2.0 * 3.14159265358979323846 * static_cast<double>(n) / static_cast<double>(lx); }
  double qy() const { return 2.0 * 3.14159265358979323846 * static_cast<double>(m) / static_cast<double>(ly); }
  bool is_zero() const { return n == 0 && m == 0; }
  // e^{i q.r} for an integer offset; exact +-1 at the momenta used here.
  std::complex<double> phase(const Offset& r) const {
    long a = ((n * r.x) % lx + lx) % lx;
    long b = ((m * r.y) % ly + ly) % ly;
    if (2 * a % lx == 0 && 2 * b % ly == 0) {
      double sign = 1.0;
      if (lx % 2 == 0 && a == lx / 2) sign = -sign;
      if (ly % 2 == 0 && b == ly / 2) sign = -sign;
      return {sign, 0.0};
    }
    double t = 2.0 * 3.14159265358979323846 * (static_cast<double>(a) / lx + static_cast<double>(b) / ly);
    return {std::cos(t), std::sin(t)};
  }
  bool commensurate_with(const FiniteTorus& t) const { return t.lx % lx == 0 && t.ly % ly == 0; }
  friend bool operator==(const Momentum& a, const Momentum& b) {
    return a.n == b.n && a.m == b.m && a.lx == b.lx && a.ly == b.ly;
  }
};

// Geometry of a k-site operator support: distinct offsets, first is (0,0).
struct SupportGeometry {
  std::vector<Offset> offsets;
  long phys_dim = 2;

  SupportGeometry(std::vector<Offset> offs, long d) : offsets(std::move(offs)), phys_dim(d) {
    if (offsets.empty() || !(offsets[0] == Offset{0, 0})) throw std::invalid_argument("geometry: first offset must be origin");
    for (size_t i = 0; i < offsets.size(); ++i)
      for (size_t j = i + 1; j < offsets.size(); ++j)
        if (offsets[i] == offsets[j]) throw std::invalid_argument("geometry: duplicate offsets");
    if (d < 2) throw std::invalid_argument("geometry: d must be >= 2");
  }
  long sites() const { return static_cast<long>(offsets.size()); }
  long dim() const {
    long p = 1;
    for (long i = 0; i < sites(); ++i) p *= phys_dim;
    return p;
  }

  static SupportGeometry site(long d) { return SupportGeometry({{0, 0}}, d); }
  static SupportGeometry pair(long d) { return SupportGeometry({{0, 0}, {1, 0}}, d); }
  static SupportGeometry plaquette(long d) { return SupportGeometry({{0, 0}, {1, 0}, {0, 1}, {1, 1}}, d); }
  static SupportGeometry window_2x3(long d) {
    return SupportGeometry({{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}}, d);
  }
  bool is_site() const { return sites() == 1; }
  bool is_pair() const { return offsets == std::vector<Offset>{{0, 0}, {1, 0}}; }
  bool is_plaquette() const { return offsets == std::vector<Offset>{{0, 0}, {1, 0}, {0, 1}, {1, 1}}; }
};

}  // namespace pepsx

#endif
