#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "spinlab/fft_conv.hpp"
#include "spinlab/lattice.hpp"
#include "spinlab/model.hpp"
#include "spinlab/spin.hpp"
#include "spinlab/summation.hpp"

// Energy defect of the inhomogeneous counter-rotations, its uniform bound,
// and the decomposition of the quadratic angle sum into pair classes.

namespace spinlab {

// Closed form 4 sin^2((tx-ty)/2) (sx . P12 sy); only the first two spin
// components enter.
inline double pair_defect(const double* sx, const double* sy, double tx, double ty) {
  double h = std::sin(0.5 * (tx - ty));
  return 4.0 * h * h * (sx[0] * sy[0] + sx[1] * sy[1]);
}

// Reference evaluation 2 sx.sy - (R+sx).(R+sy) - (R-sx).(R-sy), rotations in
// the (1,2) plane by the per-site angles.
inline double pair_defect_three_term(const double* sx, const double* sy, int n,
                                     double tx, double ty) {
  double ax[2] = {sx[0], sx[1]}, ay[2] = {sy[0], sy[1]};
  double bx[2] = {sx[0], sx[1]}, by[2] = {sy[0], sy[1]};
  rotate12(ax, std::cos(tx), std::sin(tx));
  rotate12(ay, std::cos(ty), std::sin(ty));
  rotate12(bx, std::cos(-tx), std::sin(-tx));
  rotate12(by, std::cos(-ty), std::sin(-ty));
  double rest = 0.0;
  for (int k = 2; k < n; ++k) rest += sx[k] * sy[k];
  double d0 = sx[0] * sy[0] + sx[1] * sy[1] + rest;
  double dp = ax[0] * ay[0] + ax[1] * ay[1] + rest;
  double dm = bx[0] * by[0] + bx[1] * by[1] + rest;
  return 2.0 * d0 - dp - dm;
}

inline double ktilde(const LongRangeKernel& ker, double tx, double ty, const Site& z) {
  if (linf_norm(z) == 0) throw std::invalid_argument("ktilde needs displacement != 0");
  double h = std::sin(0.5 * (tx - ty));
  return 4.0 * h * h * ker.eval(z);
}

enum class PairClass { P1, P2, P3, P4, Null };

// Ordered-pair classes: interior = Lambda_{L-a}, annulus = Lambda_L minus
// interior, exterior = complement of Lambda_L.
inline PairClass classify_pair(const Site& x, const Site& y, long L, long a) {
  long mx = linf_norm(x), my = linf_norm(y);
  bool xi = mx <= L - a, yi = my <= L - a;
  bool xa = !xi && mx <= L, ya = !yi && my <= L;
  if (xi && ya) return PairClass::P1;
  if (xi && my > L) return PairClass::P2;
  if (xa && ya && mx < my) return PairClass::P3;
  if (xa && my > L) return PairClass::P4;
  return PairClass::Null;
}

// Q+ = sum_x sum_{y in Lambda_r} (theta(x+y) - theta(x))^2; the differences
// vanish outside Lambda_{L+r}, so the sum is finite and exact.
inline double q_plus(const DeformationProfile& prof, int r) {
  if (r < 1) throw std::invalid_argument("q_plus needs r >= 1");
  Box outer(prof.d, prof.L + r);
  Box win(prof.d, r);
  CompensatedSum acc;
  for_each_site(outer, [&](const Site& x) {
    double tx = prof.theta(x);
    for_each_site(win, [&](const Site& y) {
      double dt = prof.theta_shell(linf_norm(add(x, y))) - tx;
      acc.add(dt * dt);
    });
  });
  return acc.value();
}

// B(x) = sum over the field box of kernel(y - x), for every x in the out box.
inline std::vector<double> box_kernel_sums(int d, const LongRangeKernel& ker,
                                           long field_half, long out_half) {
  Box fb(d, field_half), ob(d, out_half);
  double cost = static_cast<double>(fb.site_count()) * static_cast<double>(ob.site_count());
  if (d == 1 || cost <= 3e7) {
    KernelTable tab(ker, d, field_half + out_half);
    std::vector<double> b(static_cast<std::size_t>(ob.site_count()));
    for (long long i = 0; i < ob.site_count(); ++i) {
      Site x = ob.site_at(i);
      CompensatedSum acc;
      for_each_site(fb, [&](const Site& y) { acc.add(tab.at(sub(y, x))); });
      b[static_cast<std::size_t>(i)] = acc.value();
    }
    return b;
  }
  Convolver conv(d, field_half, out_half, ker.eval);
  return conv.box_kernel_sums();
}

struct QMinusParts {
  std::array<double, 4> part{};  // Q1-..Q4-, ordered-pair normalization
  double err = 0.0;              // enclosure halfwidth of the infinite pieces
  long window = -1;              // -1 = extended to all of Z^d
  double value() const { return part[0] + part[1] + part[2] + part[3]; }
};

// The four class sums, each pair weighted 2 K0 (theta_x - theta_y)^2.
// window > 0 truncates the exterior at Lambda_window (matched-window mode);
// window <= 0 extends it to the full lattice with a certified enclosure.
inline QMinusParts q_minus_parts(const DeformationProfile& prof,
                                 const LongRangeKernel& ker, long window) {
  const int d = prof.d;
  const long L = prof.L, a = prof.a;
  if (window > 0 && window < L) throw std::invalid_argument("window must cover Lambda_L");
  QMinusParts out;
  out.window = window > 0 ? window : -1;

  Box ball(d, L);
  std::vector<double> theta(static_cast<std::size_t>(ball.site_count()));
  std::vector<long long> ann_idx;
  for (long long i = 0; i < ball.site_count(); ++i) {
    Site x = ball.site_at(i);
    theta[static_cast<std::size_t>(i)] = prof.theta(x);
    if (linf_norm(x) > L - a) ann_idx.push_back(i);
  }

  // Q1 via interior mass seen from each annulus site.
  {
    std::vector<double> b_int = box_kernel_sums(d, ker, L - a, L);
    CompensatedSum q1;
    for (long long i : ann_idx) {
      double dt = M_PI - theta[static_cast<std::size_t>(i)];
      q1.add(2.0 * dt * dt * b_int[static_cast<std::size_t>(i)]);
    }
    out.part[0] = q1.value();
  }

  // Q3: annulus pairs across distinct shells, enumerated directly.
  {
    KernelTable tab(ker, d, 2 * L);
    CompensatedSum q3;
    for (std::size_t p = 0; p < ann_idx.size(); ++p) {
      Site x = ball.site_at(ann_idx[p]);
      long mx = linf_norm(x);
      double tx = theta[static_cast<std::size_t>(ann_idx[p])];
      for (std::size_t q = p + 1; q < ann_idx.size(); ++q) {
        Site y = ball.site_at(ann_idx[q]);
        if (linf_norm(y) == mx) continue;
        double dt = theta[static_cast<std::size_t>(ann_idx[q])] - tx;
        q3.add(2.0 * dt * dt * tab.at(sub(y, x)));
      }
    }
    out.part[2] = q3.value();
  }

  // Q2/Q4: exterior mass = (window or full-lattice total) minus Lambda_L mass.
  std::vector<double> b_big = box_kernel_sums(d, ker, L, L);
  CompensatedSum q2, q4;
  if (window > 0) {
    std::vector<double> b_win = box_kernel_sums(d, ker, window, L);
    for (long long i = 0; i < ball.site_count(); ++i) {
      double t = theta[static_cast<std::size_t>(i)];
      double ext = b_win[static_cast<std::size_t>(i)] - b_big[static_cast<std::size_t>(i)];
      if (linf_norm(ball.site_at(i)) <= L - a)
        q2.add(2.0 * M_PI * M_PI * ext);
      else
        q4.add(2.0 * t * t * ext);
    }
  } else {
    Enclosure ctot = kernel_total_sum(ker, d);
    CompensatedSum err;
    for (long long i = 0; i < ball.site_count(); ++i) {
      double t = theta[static_cast<std::size_t>(i)];
      double ext = ctot.value - b_big[static_cast<std::size_t>(i)];
      if (linf_norm(ball.site_at(i)) <= L - a) {
        q2.add(2.0 * M_PI * M_PI * ext);
        err.add(2.0 * M_PI * M_PI * ctot.err);
      } else {
        q4.add(2.0 * t * t * ext);
        err.add(2.0 * t * t * ctot.err);
      }
    }
    out.err = err.value();
  }
  out.part[1] = q2.value();
  out.part[3] = q4.value();
  return out;
}

// Brute-force oracle: ordered pairs x != y inside Lambda_window.
inline double q_minus_direct(const DeformationProfile& prof,
                             const LongRangeKernel& ker, long window) {
  Box b(prof.d, window);
  KernelTable tab(ker, prof.d, 2 * window);
  const long long V = b.site_count();
  std::vector<double> theta(static_cast<std::size_t>(V));
  for (long long i = 0; i < V; ++i)
    theta[static_cast<std::size_t>(i)] = prof.theta(b.site_at(i));
  CompensatedSum acc;
  for (long long i = 0; i < V; ++i) {
    double ti = theta[static_cast<std::size_t>(i)];
    for (long long j = i + 1; j < V; ++j) {
      double dt = theta[static_cast<std::size_t>(j)] - ti;
      if (dt == 0.0) continue;
      acc.add(2.0 * dt * dt * tab.at(sub(b.site_at(j), b.site_at(i))));
    }
  }
  return acc.value();
}

struct UniformBound {
  double value = 0.0;
  double q_plus = 0.0;
  QMinusParts parts;
  double err = 0.0;
};

inline UniformBound uniform_bound(const DeformationProfile& prof,
                                  const ModelSpec& spec, long window) {
  UniformBound u;
  u.q_plus = spec.pot.r >= 1 ? q_plus(prof, spec.pot.r) : 0.0;
  if (spec.lambda != 0.0) {
    u.parts = q_minus_parts(prof, spec.ker, window);
    u.err = spec.lambda * u.parts.err;
  }
  u.value = spec.pot.phi2_norm_bound * u.q_plus + spec.lambda * u.parts.value();
  return u;
}

// Per-sample defect evaluator over a fixed box.  The reference path takes
// Hamiltonian differences; the fast path sums pair defects, by direct pair
// loops in d=1 and by FFT quadratic forms otherwise.
class DefectEngine {
 public:
  DefectEngine(const Box& box, const DeformationProfile& prof, const ModelSpec& spec)
      : box_(box), prof_(prof), spec_(spec) {
    if (box.d != prof.d) throw std::invalid_argument("dimension mismatch");
    if (box.half < prof.L + spec.pot.r)
      throw std::invalid_argument("box too small for the deformation");
    const long long V = box_.site_count();
    theta_.resize(static_cast<std::size_t>(V));
    cos_t_.resize(static_cast<std::size_t>(V));
    sin_t_.resize(static_cast<std::size_t>(V));
    for (long long i = 0; i < V; ++i) {
      double t = prof.theta(box_.site_at(i));
      theta_[static_cast<std::size_t>(i)] = t;
      cos_t_[static_cast<std::size_t>(i)] = std::cos(t);
      sin_t_[static_cast<std::size_t>(i)] = std::sin(t);
    }
    use_fft_ = spec.lambda != 0.0 && box_.d >= 2 &&
               static_cast<double>(V) * static_cast<double>(V) > 2e7;
    if (spec.lambda != 0.0) {
      if (use_fft_)
        conv_ = std::make_unique<Convolver>(box_.d, box_.half, box_.half, spec.ker.eval);
      else
        ktab_ = KernelTable(spec.ker, box_.d, 2 * box_.half);
      ref_ktab_ = KernelTable(spec.ker, box_.d, 2 * box_.half);
    }
  }

  const Box& box() const { return box_; }
  const DeformationProfile& profile() const { return prof_; }
  const ModelSpec& model() const { return spec_; }

  double energy_defect(const SpinConfig& cfg) {
    if (cfg.box().d != box_.d || cfg.box().half != box_.half)
      throw std::invalid_argument("config box mismatch");
    double sr = short_range_defect(cfg);
    double lr = 0.0;
    if (spec_.lambda != 0.0)
      lr = use_fft_ ? long_range_defect_fft(cfg) : long_range_defect_direct(cfg);
    return sr + spec_.lambda * lr;
  }

  // 2 H_N(s) - H_N(R+ s) - H_N(R- s), straight from the Hamiltonian.
  double energy_defect_reference(const SpinConfig& cfg, long N) const {
    SpinConfig up = apply_inhomogeneous_rotation(cfg, prof_, +1);
    SpinConfig dn = apply_inhomogeneous_rotation(cfg, prof_, -1);
    double h0 = hamiltonian(cfg, N, spec_, &ref_ktab_);
    double hp = hamiltonian(up, N, spec_, &ref_ktab_);
    double hm = hamiltonian(dn, N, spec_, &ref_ktab_);
    return 2.0 * h0 - hp - hm;
  }

 private:
  double short_range_defect(const SpinConfig& cfg) const {
    if (spec_.pot.kind == PotentialKind::zero) return 0.0;
    SpinConfig up = apply_inhomogeneous_rotation(cfg, prof_, +1);
    SpinConfig dn = apply_inhomogeneous_rotation(cfg, prof_, -1);
    Box win(box_.d, prof_.L + spec_.pot.r);
    CompensatedSum acc;
    for_each_site(win, [&](const Site& x) {
      if (!spec_.pot.stencil_inside(box_, x)) return;
      acc.add(2.0 * spec_.pot.evaluate(cfg, x) - spec_.pot.evaluate(up, x) -
              spec_.pot.evaluate(dn, x));
    });
    return acc.value();
  }

  double long_range_defect_direct(const SpinConfig& cfg) const {
    const long long V = box_.site_count();
    CompensatedSum acc;
    for (long long i = 0; i < V; ++i) {
      const double ci = cos_t_[static_cast<std::size_t>(i)];
      const double si = sin_t_[static_cast<std::size_t>(i)];
      const bool zi = theta_[static_cast<std::size_t>(i)] == 0.0;
      const double* sx = cfg.spin(i);
      Site x = box_.site_at(i);
      for (long long j = i + 1; j < V; ++j) {
        if (zi && theta_[static_cast<std::size_t>(j)] == 0.0) continue;
        const double* sy = cfg.spin(j);
        double cdt = ci * cos_t_[static_cast<std::size_t>(j)] +
                     si * sin_t_[static_cast<std::size_t>(j)];
        double w = 2.0 - 2.0 * cdt;  // 4 sin^2(dt/2)
        double p12 = sx[0] * sy[0] + sx[1] * sy[1];
        acc.add(w * p12 * ktab_.at(sub(box_.site_at(j), x)));
      }
    }
    return acc.value();
  }

  double long_range_defect_fft(const SpinConfig& cfg) {
    const long long V = box_.site_count();
    std::vector<std::complex<double>> p0 = pack_plane_field(cfg);
    std::vector<std::complex<double>> pp(p0.size()), pm(p0.size());
    for (long long i = 0; i < V; ++i) {
      std::complex<double> rot{cos_t_[static_cast<std::size_t>(i)],
                               -sin_t_[static_cast<std::size_t>(i)]};
      pp[static_cast<std::size_t>(i)] = rot * p0[static_cast<std::size_t>(i)];
      pm[static_cast<std::size_t>(i)] = std::conj(rot) * p0[static_cast<std::size_t>(i)];
    }
    double f0 = conv_->quadratic_form(p0);
    double fp = conv_->quadratic_form(pp);
    double fm = conv_->quadratic_form(pm);
    return 0.5 * (2.0 * f0 - fp - fm);
  }

  Box box_;
  DeformationProfile prof_;
  ModelSpec spec_;
  std::vector<double> theta_, cos_t_, sin_t_;
  bool use_fft_ = false;
  std::unique_ptr<Convolver> conv_;
  KernelTable ktab_;
  KernelTable ref_ktab_;
};

inline std::array<double, 2> block_magnetization(const SpinConfig& cfg,
                                                 const Site& center, long ell) {
  Box blk(cfg.box().d, ell);
  double m0 = 0.0, m1 = 0.0;
  for_each_site(blk, [&](const Site& u) {
    const double* s = cfg.spin_at(add(center, u));
    m0 += s[0];
    m1 += s[1];
  });
  double inv = 1.0 / static_cast<double>(blk.site_count());
  return {m0 * inv, m1 * inv};
}

struct SmoothingCheck {
  double lhs = 0.0;        // |sum K Delta_xy - m1.m2 sum Ktilde|
  double rhs_scale = 0.0;  // sum Ktilde
};

inline SmoothingCheck smoothing_check(const SpinConfig& cfg,
                                      const DeformationProfile& prof,
                                      const LongRangeKernel& ker, const Site& c1,
                                      const Site& c2, long ell) {
  if (linf_norm(sub(c1, c2)) <= 2 * ell) throw std::invalid_argument("blocks overlap");
  std::array<double, 2> m1 = block_magnetization(cfg, c1, ell);
  std::array<double, 2> m2 = block_magnetization(cfg, c2, ell);
  Box blk(cfg.box().d, ell);
  CompensatedSum kd, kt;
  for_each_site(blk, [&](const Site& u) {
    Site x = add(c1, u);
    double tx = prof.theta(x);
    const double* sx = cfg.spin_at(x);
    for_each_site(blk, [&](const Site& v) {
      Site y = add(c2, v);
      double ty = prof.theta(y);
      Site z = sub(y, x);
      double kv = ker.eval(z);
      kd.add(kv * pair_defect(sx, cfg.spin_at(y), tx, ty));
      kt.add(ktilde(ker, tx, ty, z));
    });
  });
  double mm = m1[0] * m2[0] + m1[1] * m2[1];
  SmoothingCheck out;
  out.rhs_scale = kt.value();
  out.lhs = std::abs(kd.value() - mm * out.rhs_scale);
  return out;
}

}  // namespace spinlab
