#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "spinlab/lattice.hpp"

// Certified summation toolkit. Every infinite sum is returned as an
// Enclosure (value, err) with |true - value| <= err; the error terms come
// from midpoint-rule integral comparison with explicit second-derivative
// constants evaluated in double precision.

namespace spinlab {

// Neumaier compensated accumulator.
struct CompensatedSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

inline double pairwise_sum(const double* a, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

struct Enclosure {
  double value = 0.0;
  double err = 0.0;

  Enclosure& operator+=(const Enclosure& o) {
    value += o.value;
    err += o.err;
    return *this;
  }
  Enclosure& operator+=(double v) {
    value += v;
    return *this;
  }
  Enclosure scaled(double c) const { return {value * c, err * std::abs(c)}; }
  double lo() const { return value - err; }
  double hi() const { return value + err; }
};

inline Enclosure operator+(Enclosure a, const Enclosure& b) { return a += b; }

namespace detail {

inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double eps, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double eps = 1e-12) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, eps, 40);
}

// sum_{m > M} m^{-s}, midpoint integral plus certified correction.
inline Enclosure pow_sum_tail(long M, double s) {
  if (s <= 1.0) throw std::invalid_argument("pow_sum_tail needs s > 1");
  if (M < 1) throw std::invalid_argument("pow_sum_tail needs M >= 1");
  double md = static_cast<double>(M);
  double integral = std::pow(md + 0.5, 1.0 - s) / (s - 1.0);
  double corr = (s * (s + 1.0) / 24.0) *
                (std::pow(md + 0.5, -s - 2.0) +
                 std::pow(md + 0.5, -s - 1.0) / (s + 1.0));
  return {integral, corr + 1e-15 * integral};
}

// sum_{m > M} (m^2 + c^2)^{-s/2}; c >= 0 real.
inline Enclosure radial_m_tail(long M, double c, double s) {
  if (s <= 1.0) throw std::invalid_argument("radial_m_tail needs s > 1");
  long M2 = M;
  long want = static_cast<long>(std::ceil(8.0 * c)) + 64;
  if (want > M2) M2 = want;
  CompensatedSum direct;
  for (long m = M + 1; m <= M2; ++m)
    direct.add(std::pow(static_cast<double>(m) * m + c * c, -0.5 * s));
  Enclosure t = pow_sum_tail(M2, s);
  double f_lo = std::pow(1.0 + (c / static_cast<double>(M2)) * (c / M2), -0.5 * s);
  double lo = f_lo * t.lo(), hi = t.hi();
  return {direct.value() + 0.5 * (lo + hi), 0.5 * (hi - lo) + 1e-15 * direct.value()};
}

// sum_{z in Z^k} (m^2 + |z|^2)^{-s/2} for k = 0, 1, 2; m > 0 real.
inline Enclosure radial_zsum(int k, double m, double s) {
  if (m <= 0.0) throw std::invalid_argument("radial_zsum needs m > 0");
  if (k == 0) return {std::pow(m, -s), 0.0};
  if (k == 1) {
    if (s <= 1.0) throw std::invalid_argument("radial_zsum(1) needs s > 1");
    long Z0 = static_cast<long>(std::ceil(8.0 * m)) + 64;
    CompensatedSum acc;
    acc.add(std::pow(m, -s));
    for (long z = 1; z <= Z0; ++z)
      acc.add(2.0 * std::pow(static_cast<double>(z) * z + m * m, -0.5 * s));
    Enclosure tail = radial_m_tail(Z0, m, s);
    return {acc.value() + 2.0 * tail.value, 2.0 * tail.err + 1e-15 * acc.value()};
  }
  if (k == 2) {
    if (s <= 2.0) throw std::invalid_argument("radial_zsum(2) needs s > 2");
    long Z1 = static_cast<long>(std::ceil(8.0 * m)) + 64;
    Enclosure acc = radial_zsum(1, m, s);
    for (long z = 1; z <= Z1; ++z) {
      Enclosure line = radial_zsum(1, std::sqrt(m * m + static_cast<double>(z) * z), s);
      acc += line.scaled(2.0);
    }
    double C1 = 1.0 + 2.0 * (1.0 + 1.0 / (s - 2.0));
    Enclosure tb = radial_m_tail(Z1, m, s - 1.0);
    double tail_hi = 2.0 * C1 * tb.hi();
    return {acc.value + 0.5 * tail_hi, acc.err + 0.5 * tail_hi};
  }
  throw std::invalid_argument("radial_zsum supports k <= 2");
}

// J_k(s) = int_{[-1,1]^k} (1 + |u|^2)^{-s/2} du, k = 0, 1, 2.
inline Enclosure transverse_profile_integral(int k, double s) {
  if (k == 0) return {1.0, 0.0};
  if (k == 1) {
    double v = 2.0 * adaptive_simpson(
                         [s](double u) { return std::pow(1.0 + u * u, -0.5 * s); },
                         0.0, 1.0, 1e-13);
    return {v, 1e-11 * v + 1e-15};
  }
  if (k == 2) {
    auto inner = [s](double u) {
      return adaptive_simpson(
          [s, u](double v) { return std::pow(1.0 + u * u + v * v, -0.5 * s); },
          0.0, 1.0, 1e-13);
    };
    double v = 4.0 * adaptive_simpson(inner, 0.0, 1.0, 1e-11);
    return {v, 1e-9 * v + 1e-14};
  }
  throw std::invalid_argument("transverse_profile_integral supports k <= 2");
}

// int_{R^k} (1 + |u|^2)^{-s/2} du, full space.
inline Enclosure full_profile_integral(int k, double s) {
  if (k == 0) return {1.0, 0.0};
  if (s <= k) throw std::invalid_argument("full_profile_integral needs s > k");
  if (k == 1) {
    double v = std::sqrt(M_PI) * std::tgamma(0.5 * (s - 1.0)) / std::tgamma(0.5 * s);
    return {v, 1e-13 * v};
  }
  if (k == 2) {
    double v = 2.0 * M_PI / (s - 2.0);
    return {v, 1e-15 * v};
  }
  throw std::invalid_argument("full_profile_integral supports k <= 2");
}

// Large-m form of sum_{z in Z^k} (m^2+|z|^2)^{-s/2}: the midpoint rule ties
// the sum to m^{k-s} int (1+|u|^2)^{-s/2} du with a second-derivative error
// of order m^{k-s-2}, certified for m >= 2.
inline Enclosure radial_zsum_asympt(int k, double m, double s) {
  if (m < 2.0) throw std::invalid_argument("radial_zsum_asympt needs m >= 2");
  Enclosure j = full_profile_integral(k, s);
  Enclosure j2 = full_profile_integral(k, s + 2.0);
  double value = j.value * std::pow(m, k - s);
  double coeff = (s * (k + s + 2.0) / 24.0) * std::pow(6.0, 0.5 * (s + 2.0));
  double err = coeff * j2.hi() * std::pow(m, k - s - 2.0) +
               j.err * std::pow(m, k - s) + 1e-15 * value;
  return {value, err};
}

// int_{|t|_inf > A} |t|_2^{-s} dt = 2d J_{d-1}(s) A^{d-s} / (s-d).
inline Enclosure outside_box_integral(int d, double s, double A) {
  if (s <= d) throw std::invalid_argument("outside_box_integral needs s > d");
  Enclosure J = transverse_profile_integral(d - 1, s);
  double factor = 2.0 * d * std::pow(A, d - s) / (s - d);
  return J.scaled(factor);
}

// alpha with shell_count(d, k) <= alpha * k^{d-1} for k >= 1.
inline double shell_sites_coeff(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 8.0;
    case 3: return 26.0;
    default: throw std::invalid_argument("shell_sites_coeff supports d <= 3");
  }
}

// Upper bound for sum_{k >= m} alpha k^{d-1} * k^{-s}.
inline double shell_power_tail_bound(int d, double s, long m, double alpha) {
  if (s <= d) throw std::invalid_argument("shell_power_tail_bound needs s > d");
  double md = static_cast<double>(m);
  return alpha * (std::pow(md, d - 1 - s) + std::pow(md, d - s) / (s - d));
}

// sum_{z in Z^d \ {0}} |z|_2^{-s}, tight enclosure.
inline Enclosure power_lattice_total(int d, double s) {
  if (d < 1 || d > 3) throw std::invalid_argument("power_lattice_total supports d <= 3");
  if (s <= d) throw std::invalid_argument("power_lattice_total needs s > d");
  long R;
  switch (d) {
    case 1: R = 20000; break;
    case 2: R = 400; break;
    default: R = 60; break;
  }
  CompensatedSum direct;
  if (d == 1) {
    for (long z = 1; z <= R; ++z) direct.add(2.0 * std::pow(static_cast<double>(z), -s));
  } else if (d == 2) {
    for (long x = -R; x <= R; ++x)
      for (long y = -R; y <= R; ++y) {
        if (x == 0 && y == 0) continue;
        direct.add(std::pow(static_cast<double>(x) * x + static_cast<double>(y) * y, -0.5 * s));
      }
  } else {
    for (long x = -R; x <= R; ++x)
      for (long y = -R; y <= R; ++y)
        for (long z = -R; z <= R; ++z) {
          if (x == 0 && y == 0 && z == 0) continue;
          double q = static_cast<double>(x) * x + static_cast<double>(y) * y +
                     static_cast<double>(z) * z;
          direct.add(std::pow(q, -0.5 * s));
        }
  }
  Enclosure integral = outside_box_integral(d, s, static_cast<double>(R) + 0.5);

  // Midpoint-rule cell correction over the tail region.
  double cH = s * (s + 1.0) * (d / 24.0 + d * (d - 1) / 32.0);
  double rd = std::sqrt(static_cast<double>(d)) / 2.0;
  CompensatedSum corr;
  long Kx = R + 2000;
  for (long k = R + 1; k <= Kx; ++k)
    corr.add(static_cast<double>(shell_count(d, k)) *
             std::pow(static_cast<double>(k) - rd, -s - 2.0));
  double alpha = shell_sites_coeff(d);
  double gamma = std::pow(1.0 - rd / static_cast<double>(Kx), -s - 2.0);
  double rem = alpha * gamma *
               (std::pow(static_cast<double>(Kx), d - 3.0 - s) +
                std::pow(static_cast<double>(Kx), d - 2.0 - s) / (s + 2.0 - d));
  double cell_err = cH * (corr.value() + rem);

  double value = direct.value() + integral.value;
  return {value, integral.err + cell_err + 1e-14 * value};
}

// Cache: these get reused per (d, s) across a grid run.
inline Enclosure power_lattice_total_cached(int d, double s) {
  static std::mutex mu;
  static std::map<std::pair<int, double>, Enclosure> cache;
  auto key = std::make_pair(d, s);
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  Enclosure e = power_lattice_total(d, s);
  std::lock_guard<std::mutex> lk(mu);
  cache.emplace(key, e);
  return e;
}

}  // namespace spinlab
