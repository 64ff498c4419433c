#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spinlab/summation.hpp"

// Model sums q1..q4, the benchmark scale I_{L,a}, regime classification,
// divergence schedules, and log-log slope fitting.

namespace spinlab {

enum class Regime { SUB, CRIT1, MID, TOP };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::SUB: return "SUB";
    case Regime::CRIT1: return "CRIT1";
    case Regime::MID: return "MID";
    default: return "TOP";
  }
}

inline Regime classify_regime(int d, double s) {
  double dd = static_cast<double>(d);
  if (!(s > dd) || s > dd + 2.0)
    throw std::out_of_range("regime needs s in (d, d+2]");
  if (s == dd + 1.0) return Regime::CRIT1;
  if (s < dd + 1.0) return Regime::SUB;
  if (s == dd + 2.0) return Regime::TOP;
  return Regime::MID;
}

inline double benchmark_scale(int d, double s, long L, long a) {
  if (d < 1) throw std::invalid_argument("benchmark_scale needs d >= 1");
  if (!(L > a && a >= 2)) throw std::invalid_argument("benchmark_scale needs L > a >= 2");
  Regime r = classify_regime(d, s);
  double Ld = static_cast<double>(L), ad = static_cast<double>(a);
  double v = 0.0;
  switch (r) {
    case Regime::SUB: v = std::pow(Ld, d + 1.0 - s); break;
    case Regime::CRIT1: v = std::log(Ld / ad); break;
    case Regime::MID: v = std::pow(ad, d + 1.0 - s); break;
    case Regime::TOP: v = std::log(ad) / ad; break;
  }
  return std::pow(Ld, d - 1.0) * v;
}

// Exact finite-slab transverse sum: z in R_N = {z in Z^{d-1} \ {0}, |z_i| <= N/2}.
// d=1 keeps the unit-weight convention.
inline double slab_zsum(int k, long m, double s, long N) {
  double m2 = static_cast<double>(m) * static_cast<double>(m);
  if (k == 0) return std::pow(static_cast<double>(m), -s);
  long Z = N / 2;
  if (k == 1) {
    CompensatedSum acc;
    for (long z = Z; z >= 1; --z)
      acc.add(2.0 * std::pow(m2 + static_cast<double>(z) * z, -0.5 * s));
    return acc.value();
  }
  if (k == 2) {
    CompensatedSum acc;
    for (long z1 = -Z; z1 <= Z; ++z1)
      for (long z2 = -Z; z2 <= Z; ++z2) {
        if (z1 == 0 && z2 == 0) continue;
        double r2 = m2 + static_cast<double>(z1) * z1 + static_cast<double>(z2) * z2;
        acc.add(std::pow(r2, -0.5 * s));
      }
    return acc.value();
  }
  throw std::invalid_argument("slab_zsum supports d <= 3");
}

inline double lattice_sum_ratio(long m, int d, double s, long N) {
  if (m < 1) throw std::invalid_argument("lattice_sum_ratio needs m >= 1");
  if (d == 1) return 1.0;
  double denom = std::pow(static_cast<double>(m), d - 1.0 - s);
  return slab_zsum(d - 1, m, s, N) / denom;
}

// Tables of the transverse z-sums and their m-suffix sums.  Entries up to
// m_direct come from the certified lattice summation; beyond that the
// midpoint asymptotic takes over.
class ZsumTables {
 public:
  ZsumTables(int d, double s, long m_direct) : k_(d - 1), s_(s), M_(m_direct) {
    if (d < 1 || d > 3) throw std::invalid_argument("ZsumTables supports d <= 3");
    if (s <= static_cast<double>(d)) throw std::invalid_argument("ZsumTables needs s > d");
    if (M_ < 4) M_ = 4;
    sf_.resize(static_cast<std::size_t>(M_) + 1);
    for (long m = 1; m <= M_; ++m)
      sf_[static_cast<std::size_t>(m)] =
          k_ == 0 ? Enclosure{std::pow(static_cast<double>(m), -s_), 0.0}
                  : radial_zsum(k_, static_cast<double>(m), s_);
    psuf_.resize(static_cast<std::size_t>(M_) + 2);
    psuf_[static_cast<std::size_t>(M_) + 1] = pow_sum_tail(M_, s_);
    for (long m = M_; m >= 1; --m)
      psuf_[static_cast<std::size_t>(m)] =
          psuf_[static_cast<std::size_t>(m) + 1] +
          Enclosure{std::pow(static_cast<double>(m), -s_), 0.0};
    suf_.resize(static_cast<std::size_t>(M_) + 2);
    suf_[static_cast<std::size_t>(M_) + 1] = suffix_beyond(M_ + 1);
    for (long m = M_; m >= 1; --m)
      suf_[static_cast<std::size_t>(m)] =
          suf_[static_cast<std::size_t>(m) + 1] + sf_[static_cast<std::size_t>(m)];
  }

  long direct_limit() const { return M_; }

  // sum_{z in Z^{d-1}} (m^2+|z|^2)^{-s/2}
  Enclosure s_full(long m) const {
    if (m <= M_) return sf_[static_cast<std::size_t>(m)];
    return radial_zsum_asympt(k_, static_cast<double>(m), s_);
  }

  // sum_{m' >= m} s_full(m')
  Enclosure suf_full(long m) const {
    if (m <= M_ + 1) return suf_[static_cast<std::size_t>(m)];
    return suffix_beyond(m);
  }

  // sum_{m' >= m} m'^{-s}
  Enclosure suf_pow(long m) const {
    if (m <= M_ + 1) return psuf_[static_cast<std::size_t>(m)];
    return pow_sum_tail(m - 1, s_);
  }

  // z = 0 removed
  Enclosure s_rinf(long m) const {
    if (k_ == 0) return {std::pow(static_cast<double>(m), -s_), 0.0};
    Enclosure f = s_full(m);
    return {f.value - std::pow(static_cast<double>(m), -s_), f.err};
  }

  Enclosure suf_rinf(long m) const {
    if (k_ == 0) return suf_pow(m);
    Enclosure f = suf_full(m), p = suf_pow(m);
    return {f.value - p.value, f.err + p.err};
  }

 private:
  Enclosure suffix_beyond(long m) const {
    if (k_ == 0) return suf_pow(m);
    Enclosure j = full_profile_integral(k_, s_);
    Enclosure j2 = full_profile_integral(k_, s_ + 2.0);
    double coeff = (s_ * (k_ + s_ + 2.0) / 24.0) * std::pow(6.0, 0.5 * (s_ + 2.0));
    Enclosure pows = pow_sum_tail(m - 1, s_ - k_);
    Enclosure pows2 = pow_sum_tail(m - 1, s_ - k_ + 2.0);
    double value = j.value * pows.value;
    double err = j.value * pows.err + j.err * pows.hi() +
                 coeff * j2.hi() * pows2.hi() + 1e-15 * std::abs(value);
    return {value, err};
  }

  int k_;
  double s_;
  long M_;
  std::vector<Enclosure> sf_, suf_, psuf_;
};

struct ModelSums {
  Enclosure q1, q2, q3, q4;
  long slab = 0;  // half-width N of the transverse slab; 0 = infinite
};

inline ModelSums model_sums_with_tables(const ZsumTables& tab, int d, double s,
                                        long L, long a, long N) {
  if (a < 1 || L < a) throw std::invalid_argument("model_sums needs L >= a >= 1");
  ModelSums out;
  out.slab = N > 0 ? N : 0;
  double inv_a2 = 1.0 / (static_cast<double>(a) * static_cast<double>(a));

  {
    Enclosure q1;
    for (long u = 0; u <= L; ++u)
      for (long t = 1; t <= a; ++t) {
        double w = static_cast<double>(t) * static_cast<double>(t) * inv_a2;
        q1 += tab.s_full(u + t).scaled(w);
      }
    out.q1 = q1;
  }

  if (N > 0) {
    // finite slab: exact transverse sums, suffix tables built on the spot
    long top = L + a + 1;
    std::vector<Enclosure> suf(static_cast<std::size_t>(top) + 2);
    if (d == 1) {
      suf[static_cast<std::size_t>(top) + 1] = tab.suf_pow(top + 1);
    } else {
      double slab_size = std::pow(2.0 * static_cast<double>(N / 2) + 1.0, d - 1.0) - 1.0;
      double cap = std::min(tab.suf_rinf(top + 1).hi(),
                            slab_size * pow_sum_tail(top, s).hi());
      suf[static_cast<std::size_t>(top) + 1] = {0.5 * cap, 0.5 * cap};
    }
    for (long m = top; m >= 1; --m)
      suf[static_cast<std::size_t>(m)] =
          suf[static_cast<std::size_t>(m) + 1] +
          Enclosure{slab_zsum(d - 1, m, s, N), 0.0};
    Enclosure q2;
    for (long u = 0; u <= L; ++u) q2 += suf[static_cast<std::size_t>(u + a + 1)];
    out.q2 = q2;
    Enclosure q3;
    for (long m = 1; m <= a; ++m) {
      double w = static_cast<double>(a - m + 1) * static_cast<double>(m) *
                 static_cast<double>(m) * inv_a2;
      q3 += Enclosure{slab_zsum(d - 1, m, s, N), 0.0}.scaled(w);
    }
    out.q3 = q3;
  } else {
    Enclosure q2;
    for (long u = 0; u <= L; ++u) q2 += tab.suf_rinf(u + a + 1);
    out.q2 = q2;
    Enclosure q3;
    for (long m = 1; m <= a; ++m) {
      double w = static_cast<double>(a - m + 1) * static_cast<double>(m) *
                 static_cast<double>(m) * inv_a2;
      q3 += tab.s_rinf(m).scaled(w);
    }
    out.q3 = q3;
  }

  {
    Enclosure q4;
    for (long u = 1; u <= a; ++u) {
      double w = static_cast<double>(u) * static_cast<double>(u) * inv_a2;
      q4 += tab.suf_full(u).scaled(w);
    }
    out.q4 = q4;
  }
  return out;
}

inline long zsum_direct_limit(int d, long L, long a) {
  long base = d == 3 ? 256 : 1024;
  return std::min(L + a + 2, base);
}

inline ModelSums model_sums(int d, double s, long L, long a, long N = 0) {
  if (!(s > static_cast<double>(d))) throw std::invalid_argument("model_sums needs s > d");
  ZsumTables tab(d, s, zsum_direct_limit(d, L, a));
  return model_sums_with_tables(tab, d, s, L, a, N);
}

struct ScalingPoint {
  int d = 1;
  double s = 0.0;
  long L = 0, a = 0;
  Enclosure q1, q2_L, q2_inf, q3_L, q3_inf, q4;
  double i_value = 0.0;
  Regime regime = Regime::SUB;
};

inline ScalingPoint scaling_point(int d, double s, long L, long a) {
  ScalingPoint p;
  p.d = d;
  p.s = s;
  p.L = L;
  p.a = a;
  ZsumTables tab(d, s, zsum_direct_limit(d, L, a));
  ModelSums fin = model_sums_with_tables(tab, d, s, L, a, L);
  ModelSums inf = model_sums_with_tables(tab, d, s, L, a, 0);
  p.q1 = inf.q1;
  p.q2_L = fin.q2;
  p.q2_inf = inf.q2;
  p.q3_L = fin.q3;
  p.q3_inf = inf.q3;
  p.q4 = inf.q4;
  p.i_value = benchmark_scale(d, s, L, a);
  p.regime = classify_regime(d, s);
  return p;
}

struct DivergenceSchedule {
  std::vector<std::pair<long, long>> points;  // (L_k, a_k)
};

inline std::optional<DivergenceSchedule> divergence_schedule(int d, double s, int count) {
  if (count < 1 || count > 18) throw std::invalid_argument("count must be in [1, 18]");
  bool covered = (d >= 2 && s > d && s <= d + 2.0) || (d == 1 && s > 1.0 && s <= 2.0);
  if (!covered) return std::nullopt;
  Regime r = classify_regime(d, s);
  bool fast_L = (r == Regime::MID || r == Regime::TOP);
  DivergenceSchedule sched;
  double prev = -1.0;
  for (int k = 1; k <= count; ++k) {
    long a = 1L << k;
    long L = fast_L ? (1L << (3 * k)) : (1L << (2 * k));
    sched.points.emplace_back(L, a);
    double I = benchmark_scale(d, s, L, a);
    if (I <= prev) throw std::logic_error("schedule failed to increase I");
    prev = I;
  }
  return sched;
}

// Schedules with a -> infinity, L -> infinity and I_{L,a} bounded.  Only the
// d=1 window s in [2,3] admits one inside the geometry a <= L/2; in d=2 at
// s=4 the scale I = (L/a) ln a >= 2 ln a diverges for every admissible a.
inline std::optional<DivergenceSchedule> bounded_scale_schedule(int d, double s) {
  if (d != 1 || s < 2.0 || s > 3.0) return std::nullopt;
  DivergenceSchedule sched;
  for (int k = 3; k <= 10; ++k) {
    long L = 1L << (k + 2);
    long a = s == 2.0 ? L / 2
                      : static_cast<long>(std::ceil(std::sqrt(static_cast<double>(L))));
    sched.points.emplace_back(L, a);
  }
  return sched;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms in log space
};

inline FitResult fit_loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) throw std::invalid_argument("fit needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> lx(pts.size()), ly(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].first <= 0.0 || pts[i].second <= 0.0)
      throw std::invalid_argument("fit needs positive points");
    lx[i] = std::log(pts[i].first);
    ly[i] = std::log(pts[i].second);
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double n = static_cast<double>(pts.size());
  double denom = n * sxx - sx * sx;
  if (std::abs(denom) <= 1e-12 * std::max(1.0, n * sxx))
    throw std::invalid_argument("fit needs distinct scales");
  FitResult f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double r = ly[i] - (f.slope * lx[i] + f.intercept);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

}  // namespace spinlab
