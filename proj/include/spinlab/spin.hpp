#pragma once

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "spinlab/lattice.hpp"
#include "spinlab/rng.hpp"

// Spin configurations on centered boxes and the two-parameter deformation
// profile: angle pi deep inside Lambda_{L-a}, zero outside Lambda_L, linear
// ramp (in the sup-norm shell) across the annulus.

namespace spinlab {

class SpinConfig {
 public:
  SpinConfig(const Box& box, int n)
      : box_(box), n_(n), data_(static_cast<std::size_t>(box.site_count()) * n, 0.0) {
    if (n < 2) throw std::invalid_argument("spin dimension n must be >= 2");
    // default: all spins e1
    const long long V = box.site_count();
    for (long long i = 0; i < V; ++i) data_[static_cast<std::size_t>(i) * n_] = 1.0;
  }

  const Box& box() const { return box_; }
  int n() const { return n_; }
  long long sites() const { return box_.site_count(); }

  double* spin(long long idx) { return data_.data() + static_cast<std::size_t>(idx) * n_; }
  const double* spin(long long idx) const {
    return data_.data() + static_cast<std::size_t>(idx) * n_;
  }
  double* spin_at(const Site& x) { return spin(box_.index_of(x)); }
  const double* spin_at(const Site& x) const { return spin(box_.index_of(x)); }

  void set_all(const double* v) {
    const long long V = sites();
    for (long long i = 0; i < V; ++i) std::memcpy(spin(i), v, sizeof(double) * n_);
  }

  // Max |1 - |sigma_x|| over the box.
  double norm_drift() const {
    double worst = 0.0;
    const long long V = sites();
    for (long long i = 0; i < V; ++i) {
      const double* s = spin(i);
      double q = 0.0;
      for (int k = 0; k < n_; ++k) q += s[k] * s[k];
      double dr = std::abs(std::sqrt(q) - 1.0);
      if (dr > worst) worst = dr;
    }
    return worst;
  }

  void renormalize() {
    const long long V = sites();
    for (long long i = 0; i < V; ++i) {
      double* s = spin(i);
      double q = 0.0;
      for (int k = 0; k < n_; ++k) q += s[k] * s[k];
      double inv = 1.0 / std::sqrt(q);
      for (int k = 0; k < n_; ++k) s[k] *= inv;
    }
  }

 private:
  Box box_;
  int n_;
  std::vector<double> data_;
};

inline void random_unit_spin(int n, CounterRng& rng, double* out) {
  for (;;) {
    double q = 0.0;
    for (int k = 0; k < n; ++k) {
      out[k] = rng.normal();
      q += out[k] * out[k];
    }
    if (q > 1e-24) {
      double inv = 1.0 / std::sqrt(q);
      for (int k = 0; k < n; ++k) out[k] *= inv;
      return;
    }
  }
}

inline SpinConfig random_config(const Box& box, int n, CounterRng& rng) {
  SpinConfig cfg(box, n);
  const long long V = cfg.sites();
  for (long long i = 0; i < V; ++i) random_unit_spin(n, rng, cfg.spin(i));
  return cfg;
}

struct DeformationProfile {
  int d = 1;
  long L = 2;
  long a = 1;

  DeformationProfile(int dim, long Lv, long av) : d(dim), L(Lv), a(av) {
    if (!(Lv > av && av >= 1)) throw std::invalid_argument("profile needs L > a >= 1");
  }

  // Angle as a function of the sup-norm shell m = |x|_inf.
  double theta_shell(long m) const {
    if (m > L) return 0.0;
    if (m <= L - a) return M_PI;
    return M_PI * static_cast<double>(L + 1 - m) / static_cast<double>(a);
  }

  double theta(const Site& x) const { return theta_shell(linf_norm(x)); }

  bool in_interior(long m) const { return m <= L - a; }
  bool in_annulus(long m) const { return m > L - a && m <= L; }
  bool outside(long m) const { return m > L; }
};

// Row convention: (R^t v)_1 = cos t v1 + sin t v2, (R^t v)_2 = -sin t v1 + cos t v2.
inline void rotate12(double* v, double cos_t, double sin_t) {
  double v1 = v[0], v2 = v[1];
  v[0] = cos_t * v1 + sin_t * v2;
  v[1] = -sin_t * v1 + cos_t * v2;
}

// Full n x n matrix form; only used by tests and diagnostics.
struct RotationFamily {
  int n;
  double angle;
  RotationFamily(int nn, double t) : n(nn), angle(t) {
    if (nn < 2) throw std::invalid_argument("rotation needs n >= 2");
  }
  std::vector<double> matrix() const {
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] = 1.0;
    double c = std::cos(angle), s = std::sin(angle);
    m[0] = c;
    m[1] = s;
    m[static_cast<std::size_t>(n)] = -s;
    m[static_cast<std::size_t>(n) + 1] = c;
    return m;
  }
  void apply(const double* v, double* out) const {
    std::vector<double> m = matrix();
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += m[static_cast<std::size_t>(i) * n + j] * v[j];
      out[i] = acc;
    }
  }
};

// (R^{sign * theta_x} sigma)_x over the whole box; pure, returns a copy.
inline SpinConfig apply_inhomogeneous_rotation(const SpinConfig& cfg,
                                               const DeformationProfile& prof,
                                               int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +-1");
  if (cfg.box().d != prof.d) throw std::invalid_argument("dimension mismatch");
  SpinConfig out = cfg;
  const Box& b = cfg.box();
  const long long V = b.site_count();
  for (long long i = 0; i < V; ++i) {
    double t = prof.theta(b.site_at(i)) * sign;
    if (t == 0.0) continue;
    rotate12(out.spin(i), std::cos(t), std::sin(t));
  }
  return out;
}

// Global rotation in the (i, j) coordinate plane, i < j; used by symmetry tests.
inline void apply_global_plane_rotation(SpinConfig& cfg, int i, int j, double t) {
  if (i < 0 || j <= i || j >= cfg.n()) throw std::invalid_argument("bad plane");
  double c = std::cos(t), s = std::sin(t);
  const long long V = cfg.sites();
  for (long long k = 0; k < V; ++k) {
    double* v = cfg.spin(k);
    double vi = v[i], vj = v[j];
    v[i] = c * vi + s * vj;
    v[j] = -s * vi + c * vj;
  }
}

inline void p12_project(const double* v, int n, double* out) {
  out[0] = v[0];
  out[1] = v[1];
  for (int k = 2; k < n; ++k) out[k] = 0.0;
}

}  // namespace spinlab
