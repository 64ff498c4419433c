#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spinlab/lattice.hpp"
#include "spinlab/rng.hpp"
#include "spinlab/spin.hpp"
#include "spinlab/summation.hpp"

// Model assembly: finite-range potential, long-range pair kernel, and the
// finite-volume energy
//   H_N(sigma) = sum_{x in Lambda_{N+r}} Phi(tau_x sigma)
//              + lambda * sum_{unordered {x,y}, {x,y} meets Lambda_N} K0(y-x) sigma_x . sigma_y
// with free boundary: translates whose stencil leaves the storage box are
// dropped, pairs are clipped to the storage box.

namespace spinlab {

enum class PotentialKind { zero, nn };

struct ShortRangePotential {
  PotentialKind kind = PotentialKind::zero;
  int r = 0;                    // interaction range (sup-norm radius of the stencil)
  double J = 0.0;               // nn coupling
  double phi2_norm_bound = 0.0; // declared curvature bound, enters the uniform bound

  std::string name() const { return kind == PotentialKind::zero ? "zero" : "nn"; }

  // nn stencil is {0, e_1, ..., e_d}: forward bonds only, so each bond is
  // counted once by the translate sum.
  bool stencil_inside(const Box& b, const Site& x) const {
    if (kind == PotentialKind::zero) return true;
    if (!b.contains(x)) return false;
    for (int i = 0; i < b.d; ++i) {
      Site y = x;
      y.c[i] += 1;
      if (!b.contains(y)) return false;
    }
    return true;
  }

  // Phi(tau_x sigma); requires stencil_inside(box, x).
  double evaluate(const SpinConfig& cfg, const Site& x) const {
    if (kind == PotentialKind::zero) return 0.0;
    const int n = cfg.n();
    const double* sx = cfg.spin_at(x);
    double acc = 0.0;
    for (int i = 0; i < cfg.box().d; ++i) {
      Site y = x;
      y.c[i] += 1;
      const double* sy = cfg.spin_at(y);
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += sx[k] * sy[k];
      acc += dot;
    }
    return -J * acc;
  }
};

inline ShortRangePotential zero_potential() { return {}; }

inline ShortRangePotential nn_potential(double J, int d) {
  ShortRangePotential p;
  p.kind = PotentialKind::nn;
  p.r = 1;
  p.J = J;
  p.phi2_norm_bound = 4.0 * d * std::abs(J);
  return p;
}

struct LongRangeKernel {
  double s = 0.0;          // decay exponent, s > d required
  double envelope_C = 1.0; // K0(z) <= envelope_C * |z|_2^{-s}
  double asympt_lo = 1.0;  // declared bracket for |z|_2^s K0(z) at large |z|
  double asympt_hi = 1.0;
  bool pure_power = true;
  std::function<double(const Site&)> eval;
  std::string name = "power";
};

inline LongRangeKernel power_law_kernel(double s) {
  LongRangeKernel k;
  k.s = s;
  k.eval = [s](const Site& z) {
    return std::pow(static_cast<double>(l2_norm_sq(z)), -0.5 * s);
  };
  return k;
}

struct ModelSpec {
  int d = 1;
  int n = 2;
  double lambda = 0.0;
  double beta = 1.0;
  ShortRangePotential pot;
  LongRangeKernel ker;

  void validate() const {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("d out of range");
    if (n < 2) throw std::invalid_argument("n must be >= 2");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
    if (lambda > 0.0 && !(ker.s > d)) throw std::invalid_argument("kernel needs s > d");
  }
};

// Kernel values tabulated over a displacement box Lambda_R; K(0) := 0.
class KernelTable {
 public:
  KernelTable() = default;
  KernelTable(const LongRangeKernel& ker, int d, long R) : box_(d, R) {
    v_.resize(static_cast<std::size_t>(box_.site_count()), 0.0);
    for_each_site(box_, [&](const Site& z) {
      if (linf_norm(z) == 0) return;
      v_[static_cast<std::size_t>(box_.index_of(z))] = ker.eval(z);
    });
  }

  long radius() const { return box_.half; }

  double at(const Site& z) const {
    return v_[static_cast<std::size_t>(box_.index_of(z))];
  }

 private:
  Box box_;
  std::vector<double> v_;
};

// Energy of the window Lambda_N around `center`.  N may exceed the storage
// box; everything is clipped to the box (free boundary), so the value is
// constant in N once Lambda_N covers the box.
inline double hamiltonian(const SpinConfig& cfg, long N, const ModelSpec& spec,
                          const KernelTable* ktab = nullptr,
                          const Site* center = nullptr) {
  if (N < 0) throw std::invalid_argument("N must be >= 0");
  const Box& b = cfg.box();
  const int n = cfg.n();
  Site c0 = center ? *center : zero_site(b.d);

  CompensatedSum sr;
  if (spec.pot.kind != PotentialKind::zero) {
    const long reach = std::min(N + spec.pot.r, b.half + linf_norm(c0));
    Box win(b.d, reach);
    for_each_site(win, [&](const Site& u) {
      Site x = add(u, c0);
      if (!spec.pot.stencil_inside(b, x)) return;
      sr.add(spec.pot.evaluate(cfg, x));
    });
  }

  CompensatedSum lr;
  if (spec.lambda != 0.0) {
    const long long V = b.site_count();
    for (long long i = 0; i < V; ++i) {
      Site x = b.site_at(i);
      bool x_in = linf_norm(sub(x, c0)) <= N;
      const double* sx = cfg.spin(i);
      for (long long j = i + 1; j < V; ++j) {
        Site y = b.site_at(j);
        if (!x_in && linf_norm(sub(y, c0)) > N) continue;
        const double* sy = cfg.spin(j);
        double dot = 0.0;
        for (int k = 0; k < n; ++k) dot += sx[k] * sy[k];
        double kv = ktab ? ktab->at(sub(y, x)) : spec.ker.eval(sub(y, x));
        lr.add(kv * dot);
      }
    }
  }
  return sr.value() + spec.lambda * lr.value();
}

// Energy change of the box-total Hamiltonian when the spin at site index idx
// is replaced by new_spin.  O(V) per call.
inline double local_energy_delta(const SpinConfig& cfg, long long idx,
                                 const double* new_spin, const ModelSpec& spec,
                                 const KernelTable& ktab) {
  const Box& b = cfg.box();
  const int n = cfg.n();
  const double* old_spin = cfg.spin(idx);
  Site x = b.site_at(idx);

  double diff[16];
  for (int k = 0; k < n; ++k) diff[k] = new_spin[k] - old_spin[k];

  CompensatedSum lr;
  if (spec.lambda != 0.0) {
    const long long V = b.site_count();
    for (long long j = 0; j < V; ++j) {
      if (j == idx) continue;
      const double* sy = cfg.spin(j);
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += diff[k] * sy[k];
      lr.add(ktab.at(sub(b.site_at(j), x)) * dot);
    }
  }

  // The flipped site appears in the translate at x (forward bonds) and in the
  // translates at x - e_i (their forward bond into x); a bond exists only if
  // its translate's whole stencil fits in the box.
  double sr = 0.0;
  if (spec.pot.kind == PotentialKind::nn) {
    if (spec.pot.stencil_inside(b, x)) {
      for (int i = 0; i < b.d; ++i) {
        Site y = x;
        y.c[i] += 1;
        const double* sy = cfg.spin_at(y);
        double dot = 0.0;
        for (int k = 0; k < n; ++k) dot += diff[k] * sy[k];
        sr += -spec.pot.J * dot;
      }
    }
    for (int i = 0; i < b.d; ++i) {
      Site y = x;
      y.c[i] -= 1;
      if (!spec.pot.stencil_inside(b, y)) continue;
      const double* sy = cfg.spin_at(y);
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += diff[k] * sy[k];
      sr += -spec.pot.J * dot;
    }
  }
  return sr + spec.lambda * lr.value();
}

inline double local_energy_delta(const SpinConfig& cfg, const Site& x,
                                 const double* new_spin, const ModelSpec& spec,
                                 const KernelTable& ktab) {
  return local_energy_delta(cfg, cfg.box().index_of(x), new_spin, spec, ktab);
}

struct TailCertificate {
  long r_cut = 0;
  double bound = 0.0;  // certified upper bound on everything beyond the cut
};

struct SummandEnvelope {
  double C = 1.0;           // |f(z)| <= C |z|_2^{-s}
  double s = 2.0;           // decay exponent, > d
  double shell_coeff = 0.0; // nonzero sites per shell k <= shell_coeff * k^{d-1}; 0 = full lattice
};

// Windowed sum of f over Lambda_{R_cut} \ {0} plus a certified tail bound.
inline std::pair<double, TailCertificate> truncated_lattice_sum(
    const std::function<double(const Site&)>& f, int d, long R_cut,
    const SummandEnvelope& env) {
  if (env.s <= d) throw std::invalid_argument("envelope exponent must exceed d");
  Box win(d, R_cut);
  CompensatedSum acc;
  for_each_site(win, [&](const Site& z) {
    if (linf_norm(z) == 0) return;
    acc.add(f(z));
  });
  double alpha = env.shell_coeff > 0.0 ? env.shell_coeff : shell_sites_coeff(d);
  TailCertificate cert{R_cut, env.C * shell_power_tail_bound(d, env.s, R_cut + 1, alpha)};
  return {acc.value(), cert};
}

// Total kernel sum over Z^d \ {0}; tight for the pure power law, envelope
// based otherwise.
inline Enclosure kernel_total_sum(const LongRangeKernel& ker, int d, long R_dir = 2000) {
  if (ker.pure_power) return power_lattice_total_cached(d, ker.s);
  auto [v, cert] = truncated_lattice_sum(ker.eval, d, R_dir,
                                         SummandEnvelope{ker.envelope_C, ker.s, 0.0});
  return {v + 0.5 * cert.bound, 0.5 * cert.bound};
}

// Max |second derivative| of Phi along joint single-plane rotation flows with
// random unit weights: a Monte Carlo lower estimate of the curvature norm.
inline double phi2_norm_probe(const ShortRangePotential& pot, int d, int n,
                              int trials, CounterRng& rng) {
  if (pot.kind == PotentialKind::zero) return 0.0;
  Box win(d, pot.r);
  const long long W = win.site_count();
  double worst = 0.0;
  const double h = 1e-4;
  for (int t = 0; t < trials; ++t) {
    SpinConfig cfg = random_config(win, n, rng);
    std::vector<double> w(static_cast<std::size_t>(W));
    double q = 0.0;
    for (auto& wi : w) {
      wi = rng.normal();
      q += wi * wi;
    }
    double inv = 1.0 / std::sqrt(q);
    for (auto& wi : w) wi *= inv;

    auto eval_at = [&](double phi) {
      SpinConfig rot = cfg;
      for (long long i = 0; i < W; ++i) {
        double ang = phi * w[static_cast<std::size_t>(i)];
        rotate12(rot.spin(i), std::cos(ang), std::sin(ang));
      }
      return pot.evaluate(rot, zero_site(d));
    };
    double second = (eval_at(h) - 2.0 * eval_at(0.0) + eval_at(-h)) / (h * h);
    if (!std::isfinite(second))
      throw std::runtime_error("phi2_norm_probe: non-finite second difference");
    if (std::abs(second) > worst) worst = std::abs(second);
  }
  return worst;
}

}  // namespace spinlab
