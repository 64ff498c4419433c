#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Lattice geometry: centered boxes [-N,N]^d, sup-norm shells, and the
// wedge reflection used to fold pair sums into a fundamental domain.

namespace spinlab {

inline constexpr int kMaxDim = 6;

struct Site {
  int d = 0;
  std::array<int, kMaxDim> c{};

  int& operator[](int i) { return c[i]; }
  int operator[](int i) const { return c[i]; }
  bool operator==(const Site& o) const {
    if (d != o.d) return false;
    for (int i = 0; i < d; ++i)
      if (c[i] != o.c[i]) return false;
    return true;
  }
};

inline Site make_site(std::initializer_list<int> xs) {
  if (xs.size() == 0 || xs.size() > kMaxDim)
    throw std::invalid_argument("site dimension out of range");
  Site s;
  s.d = static_cast<int>(xs.size());
  int i = 0;
  for (int v : xs) s.c[i++] = v;
  return s;
}

inline Site zero_site(int d) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("bad dimension");
  Site s;
  s.d = d;
  return s;
}

inline Site sub(const Site& a, const Site& b) {
  Site r = a;
  for (int i = 0; i < a.d; ++i) r.c[i] = a.c[i] - b.c[i];
  return r;
}

inline Site add(const Site& a, const Site& b) {
  Site r = a;
  for (int i = 0; i < a.d; ++i) r.c[i] = a.c[i] + b.c[i];
  return r;
}

inline long linf_norm(const Site& x) {
  long m = 0;
  for (int i = 0; i < x.d; ++i) {
    long v = std::labs(static_cast<long>(x.c[i]));
    if (v > m) m = v;
  }
  return m;
}

inline long long l2_norm_sq(const Site& x) {
  long long s = 0;
  for (int i = 0; i < x.d; ++i)
    s += static_cast<long long>(x.c[i]) * x.c[i];
  return s;
}

inline double l2_norm(const Site& x) {
  return std::sqrt(static_cast<double>(l2_norm_sq(x)));
}

// Lambda_L = [-L,L]^d. Sites are enumerated with coordinate 0 fastest.
struct Box {
  int d = 1;
  long half = 0;

  Box() = default;
  Box(int dim, long h) : d(dim), half(h) {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("bad dimension");
    if (h < 0) throw std::invalid_argument("negative box half-side");
  }

  long side() const { return 2 * half + 1; }

  long long site_count() const {
    long long n = 1;
    for (int i = 0; i < d; ++i) n *= side();
    return n;
  }

  bool contains(const Site& x) const {
    for (int i = 0; i < x.d; ++i)
      if (x.c[i] < -half || x.c[i] > half) return false;
    return true;
  }

  long long index_of(const Site& x) const {
    long long idx = 0, stride = 1;
    for (int i = 0; i < d; ++i) {
      idx += (static_cast<long long>(x.c[i]) + half) * stride;
      stride *= side();
    }
    return idx;
  }

  Site site_at(long long idx) const {
    Site s = zero_site(d);
    for (int i = 0; i < d; ++i) {
      s.c[i] = static_cast<int>(idx % side()) - static_cast<int>(half);
      idx /= side();
    }
    return s;
  }
};

template <typename F>
inline void for_each_site(const Box& b, F&& fn) {
  const long long n = b.site_count();
  for (long long i = 0; i < n; ++i) fn(b.site_at(i));
}

// Number of sites on the sup-norm shell |x|_inf = m.
inline long long shell_count(int d, long m) {
  if (m == 0) return 1;
  auto p = [&](long h) {
    long long n = 1;
    for (int i = 0; i < d; ++i) n *= 2 * h + 1;
    return n;
  };
  return p(m) - p(m - 1);
}

// Sup-norm distance from x to the complement of Lambda_L (0 if x is outside).
inline long linf_dist_to_complement(const Site& x, long L) {
  long m = linf_norm(x);
  if (m > L) return 0;
  return L + 1 - m;
}

inline int sign_pos(long long v) { return v < 0 ? -1 : 1; }  // sign(0) := +1

// Smallest index attaining max_k |x_k|.
inline int argmax_abs(const Site& x) {
  int best = 0;
  long bv = std::labs(static_cast<long>(x.c[0]));
  for (int i = 1; i < x.d; ++i) {
    long v = std::labs(static_cast<long>(x.c[i]));
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  return best;
}

// Fold y into the wedge of x: the image keeps |y|_inf (and hence any
// shell-dependent profile value) while never increasing the distance to x.
inline Site wedge_map(const Site& x, const Site& y) {
  if (x.d != y.d) throw std::invalid_argument("dimension mismatch");
  const int i = argmax_abs(x);
  const int j = argmax_abs(y);
  Site t = y;
  if (i == j) {
    t.c[i] = sign_pos(x.c[i]) * std::abs(y.c[i]);
  } else {
    t.c[i] = sign_pos(x.c[i]) * std::abs(y.c[j]);
    t.c[j] = sign_pos(y.c[j]) * std::abs(y.c[i]);
  }
  return t;
}

inline int wedge_preimage_bound(int d) { return 2 * d; }

}  // namespace spinlab
