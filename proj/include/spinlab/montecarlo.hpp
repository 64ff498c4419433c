#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinlab/defect.hpp"
#include "spinlab/model.hpp"
#include "spinlab/rng.hpp"
#include "spinlab/spin.hpp"
#include "spinlab/summation.hpp"

// Metropolis chain for the finite-box Gibbs density, observable series,
// inequality diagnostics, and the independent-spin oracle.

namespace spinlab {

inline constexpr const char* kSnapshotMagic = "SPINLAB-SNAP-1";

class Chain {
 public:
  Chain(const Box& box, const ModelSpec& spec, std::uint64_t seed, std::uint64_t stream)
      : box_(box), spec_(spec), cfg_(box, spec.n), rng_(seed, stream),
        seed_(seed), stream_(stream) {
    spec_.validate();
    if (box.d != spec.d) throw std::invalid_argument("box dimension mismatch");
    if (spec_.lambda != 0.0) ktab_ = KernelTable(spec_.ker, box_.d, 2 * box_.half);
    align();
  }

  void align() {
    double e1[16] = {0};
    e1[0] = 1.0;
    cfg_.set_all(e1);
    energy_ = total_energy();
  }

  void randomize() {
    cfg_ = random_config(box_, spec_.n, rng_);
    energy_ = total_energy();
  }

  const Box& box() const { return box_; }
  const ModelSpec& model() const { return spec_; }
  const SpinConfig& config() const { return cfg_; }
  SpinConfig& config() { return cfg_; }
  const KernelTable& kernel_table() const { return ktab_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  long sweeps() const { return sweeps_; }
  double energy() const { return energy_; }

  double total_energy() const {
    return hamiltonian(cfg_, box_.half, spec_, spec_.lambda != 0.0 ? &ktab_ : nullptr);
  }

  // Relative bookkeeping drift, then resync.
  double resync_energy() {
    double fresh = total_energy();
    double drift = std::abs(fresh - energy_) / std::max(1.0, std::abs(fresh));
    energy_ = fresh;
    return drift;
  }

  void sweep(long count = 1) {
    const long long V = box_.site_count();
    const int n = spec_.n;
    double prop[16];
    for (long c = 0; c < count; ++c) {
      for (long long idx = 0; idx < V; ++idx) {
        random_unit_spin(n, rng_, prop);
        double de = local_energy_delta(cfg_, idx, prop, spec_, ktab_);
        ++proposed_;
        bool accept = de <= 0.0;
        if (!accept) accept = rng_.uniform01() < std::exp(-spec_.beta * de);
        if (accept) {
          ++accepted_;
          double* s = cfg_.spin(idx);
          for (int k = 0; k < n; ++k) s[k] = prop[k];
          energy_ += de;
        }
      }
      ++sweeps_;
    }
  }

  double acceptance_rate() const {
    return proposed_ ? static_cast<double>(accepted_) / static_cast<double>(proposed_)
                     : 0.0;
  }

  void reset_acceptance() { proposed_ = accepted_ = 0; }

  void save_snapshot(std::ostream& os) const {
    char buf[64];
    os << kSnapshotMagic << "\n";
    os << "dims " << box_.d << " " << box_.half << " " << spec_.n << "\n";
    os << "rng " << seed_ << " " << stream_ << " " << rng_.counter() << "\n";
    os << "progress " << sweeps_ << " " << proposed_ << " " << accepted_ << "\n";
    std::snprintf(buf, sizeof buf, "%a", energy_);
    os << "energy " << buf << "\n";
    os << "spins\n";
    const long long V = box_.site_count();
    for (long long i = 0; i < V; ++i) {
      const double* s = cfg_.spin(i);
      for (int k = 0; k < spec_.n; ++k) {
        std::snprintf(buf, sizeof buf, "%a", s[k]);
        os << (k ? " " : "") << buf;
      }
      os << "\n";
    }
  }

  void save_snapshot_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write snapshot '" + path + "'");
    save_snapshot(os);
  }

  static Chain load_snapshot(std::istream& is, const ModelSpec& spec) {
    std::string magic;
    if (!std::getline(is, magic) || magic != kSnapshotMagic)
      throw std::runtime_error("bad snapshot magic");
    std::string tag;
    int d, n;
    long half;
    is >> tag >> d >> half >> n;
    if (tag != "dims" || d != spec.d || n != spec.n)
      throw std::runtime_error("snapshot does not match the model");
    std::uint64_t seed, stream, counter;
    is >> tag >> seed >> stream >> counter;
    if (tag != "rng") throw std::runtime_error("bad snapshot rng line");
    Chain chain(Box(d, half), spec, seed, stream);
    unsigned long long proposed, accepted;
    is >> tag >> chain.sweeps_ >> proposed >> accepted;
    if (tag != "progress") throw std::runtime_error("bad snapshot progress line");
    chain.proposed_ = proposed;
    chain.accepted_ = accepted;
    std::string word;
    is >> tag >> word;
    if (tag != "energy") throw std::runtime_error("bad snapshot energy line");
    chain.energy_ = std::strtod(word.c_str(), nullptr);
    is >> tag;
    if (tag != "spins") throw std::runtime_error("bad snapshot spins line");
    const long long V = chain.box_.site_count();
    for (long long i = 0; i < V; ++i) {
      double* s = chain.cfg_.spin(i);
      for (int k = 0; k < n; ++k) {
        if (!(is >> word)) throw std::runtime_error("snapshot truncated");
        s[k] = std::strtod(word.c_str(), nullptr);
      }
    }
    chain.rng_.set_counter(counter);
    return chain;
  }

  static Chain load_snapshot_file(const std::string& path, const ModelSpec& spec) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read snapshot '" + path + "'");
    return load_snapshot(is, spec);
  }

 private:
  Box box_;
  ModelSpec spec_;
  SpinConfig cfg_;
  CounterRng rng_;
  std::uint64_t seed_, stream_;
  KernelTable ktab_;
  double energy_ = 0.0;
  long sweeps_ = 0;
  unsigned long long proposed_ = 0, accepted_ = 0;
};

inline void metropolis_sweep(Chain& chain) { chain.sweep(1); }

struct ObservableSeries {
  long burn_in = 0;
  long cadence = 0;
  int n = 0;
  long block_ell = 0;
  std::vector<long> sweep_index;
  std::vector<std::vector<double>> magnetization;  // per measurement, n components
  std::vector<std::array<double, 2>> p12;
  std::vector<double> energy;
  std::vector<double> defect;      // filled when an engine is attached
  std::vector<double> block_abs;   // mean |P12 block average| over a tiling grid
};

inline double block_grid_abs_mean(const SpinConfig& cfg, long ell) {
  const Box& b = cfg.box();
  long step = 2 * ell + 1;
  std::vector<long> centers;
  for (long c = -b.half + ell; c + ell <= b.half; c += step) centers.push_back(c);
  if (centers.empty()) return 0.0;
  double acc = 0.0;
  long cnt = 0;
  Site ctr = zero_site(b.d);
  // d nested loops over the center grid, flattened
  std::vector<std::size_t> ix(static_cast<std::size_t>(b.d), 0);
  while (true) {
    for (int k = 0; k < b.d; ++k) ctr.c[k] = centers[ix[static_cast<std::size_t>(k)]];
    std::array<double, 2> m = block_magnetization(cfg, ctr, ell);
    acc += std::sqrt(m[0] * m[0] + m[1] * m[1]);
    ++cnt;
    int k = 0;
    while (k < b.d && ++ix[static_cast<std::size_t>(k)] == centers.size()) {
      ix[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == b.d) break;
  }
  return acc / static_cast<double>(cnt);
}

inline ObservableSeries run_chain(Chain& chain, DefectEngine* engine, long burn_in,
                                  long cadence, long measurements, long block_ell = 0) {
  if (cadence < 1) throw std::invalid_argument("cadence must be >= 1");
  ObservableSeries out;
  out.burn_in = burn_in;
  out.cadence = cadence;
  out.n = chain.model().n;
  out.block_ell = block_ell;
  chain.sweep(burn_in);
  const long long V = chain.box().site_count();
  for (long m = 0; m < measurements; ++m) {
    chain.sweep(cadence);
    const SpinConfig& cfg = chain.config();
    std::vector<double> mag(static_cast<std::size_t>(out.n), 0.0);
    for (long long i = 0; i < V; ++i) {
      const double* s = cfg.spin(i);
      for (int k = 0; k < out.n; ++k) mag[static_cast<std::size_t>(k)] += s[k];
    }
    for (int k = 0; k < out.n; ++k) mag[static_cast<std::size_t>(k)] /= static_cast<double>(V);
    out.sweep_index.push_back(chain.sweeps());
    out.p12.push_back({mag[0], mag[1]});
    out.magnetization.push_back(std::move(mag));
    out.energy.push_back(chain.energy());
    if (engine) out.defect.push_back(engine->energy_defect(chain.config()));
    if (block_ell > 0) out.block_abs.push_back(block_grid_abs_mean(cfg, block_ell));
  }
  return out;
}

struct BatchStats {
  double mean = 0.0;
  double se = 0.0;
  long batches = 0;
  long batch_size = 0;
};

inline BatchStats batch_means(const std::vector<double>& x, long batches = 30) {
  long size = static_cast<long>(x.size());
  if (batches > size) batches = size;
  if (batches < 10) throw std::invalid_argument("fewer than 10 batches");
  long bs = size / batches;
  BatchStats st;
  st.batches = batches;
  st.batch_size = bs;
  std::vector<double> bm(static_cast<std::size_t>(batches), 0.0);
  for (long b = 0; b < batches; ++b) {
    CompensatedSum acc;
    for (long i = b * bs; i < (b + 1) * bs; ++i)
      acc.add(x[static_cast<std::size_t>(i)]);
    bm[static_cast<std::size_t>(b)] = acc.value() / static_cast<double>(bs);
  }
  CompensatedSum tot;
  for (double v : bm) tot.add(v);
  st.mean = tot.value() / static_cast<double>(batches);
  CompensatedSum ss;
  for (double v : bm) ss.add((v - st.mean) * (v - st.mean));
  st.se = std::sqrt(ss.value() / static_cast<double>(batches - 1) /
                    static_cast<double>(batches));
  return st;
}

struct MagnetizationEstimate {
  std::vector<double> mean;
  double se = 0.0;
  long batches = 0;
};

inline MagnetizationEstimate estimate_magnetization(const ObservableSeries& series) {
  if (series.magnetization.empty()) throw std::invalid_argument("empty series");
  MagnetizationEstimate est;
  est.mean.resize(static_cast<std::size_t>(series.n), 0.0);
  double var = 0.0;
  for (int k = 0; k < series.n; ++k) {
    std::vector<double> comp(series.magnetization.size());
    for (std::size_t i = 0; i < comp.size(); ++i)
      comp[i] = series.magnetization[i][static_cast<std::size_t>(k)];
    BatchStats st = batch_means(comp);
    est.mean[static_cast<std::size_t>(k)] = st.mean;
    est.batches = st.batches;
    var += st.se * st.se;
  }
  est.se = std::sqrt(var);
  return est;
}

inline std::vector<double> defect_distribution(Chain& chain, DefectEngine& engine,
                                               long measurements, long cadence = 10) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(measurements));
  for (long m = 0; m < measurements; ++m) {
    chain.sweep(cadence);
    out.push_back(engine.energy_defect(chain.config()));
  }
  return out;
}

struct Lemma35Result {
  double lhs = 0.0;  // estimated P(defect >= t)
  double rhs = 0.0;  // exp(-beta t / 2)
  double se = 0.0;
  bool pass = false;
};

inline Lemma35Result lemma35_test(const std::vector<double>& deltas, double beta,
                                  double t) {
  std::vector<double> ind(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) ind[i] = deltas[i] >= t ? 1.0 : 0.0;
  BatchStats st = batch_means(ind);
  Lemma35Result r;
  r.lhs = st.mean;
  r.se = st.se;
  r.rhs = std::exp(-0.5 * beta * t);
  r.pass = r.lhs <= r.rhs + 3.0 * r.se;
  return r;
}

struct Lemma34Result {
  double lhs = 0.0;  // estimated P(defect >= zeta I)
  double rhs = 0.0;  // (mean defect - zeta I) / ((c^{-1} lambda - zeta) I)
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  bool pass = false;
};

inline Lemma34Result lemma34_diagnostic(const std::vector<double>& deltas, double zeta,
                                        double i_value, double c_inv_lambda) {
  if (!(zeta < c_inv_lambda))
    throw std::invalid_argument("zeta must lie below c^{-1} lambda");
  if (i_value <= 0.0) throw std::invalid_argument("benchmark scale must be positive");
  std::vector<double> ind(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    ind[i] = deltas[i] >= zeta * i_value ? 1.0 : 0.0;
  BatchStats pi = batch_means(ind);
  BatchStats mu = batch_means(deltas);
  Lemma34Result r;
  r.lhs = pi.mean;
  r.se_lhs = pi.se;
  double denom = (c_inv_lambda - zeta) * i_value;
  r.rhs = (mu.mean - zeta * i_value) / denom;
  r.se_rhs = mu.se / denom;
  r.pass = r.lhs >= r.rhs - 3.0 * (r.se_lhs + r.se_rhs);
  return r;
}

struct ProductMeasureSpec {
  double m_star = 0.0;  // mean along e1; uniform with prob 1 - m_star, e1 otherwise
};

inline SpinConfig sample_biased_product(const ProductMeasureSpec& pm, const Box& box,
                                        int n, CounterRng& rng) {
  if (pm.m_star < 0.0 || pm.m_star >= 1.0)
    throw std::invalid_argument("m_star must be in [0, 1)");
  SpinConfig cfg(box, n);
  const long long V = box.site_count();
  for (long long i = 0; i < V; ++i) {
    double* s = cfg.spin(i);
    if (rng.uniform01() < pm.m_star) {
      for (int k = 0; k < n; ++k) s[k] = 0.0;
      s[0] = 1.0;
    } else {
      random_unit_spin(n, rng, s);
    }
  }
  return cfg;
}

struct ProductDefectOracle {
  double box_value = 0.0;       // expected defect for spins on the storage box
  double extended_value = 0.0;  // exterior long-range pairs appended
  double tail_err = 0.0;        // enclosure halfwidth of the extension
};

// E[defect] under i.i.d. spins with mean m* e1: every cross term contributes
// m*^2 times its angular weight.
inline ProductDefectOracle product_measure_defect_oracle(double m_star, const Box& box,
                                                         const DeformationProfile& prof,
                                                         const ModelSpec& spec) {
  if (box.d != prof.d || box.d != spec.d) throw std::invalid_argument("dimension mismatch");
  if (box.half < prof.L + spec.pot.r)
    throw std::invalid_argument("box too small for the deformation");
  const double m2 = m_star * m_star;
  ProductDefectOracle out;

  CompensatedSum sr;
  if (spec.pot.kind == PotentialKind::nn) {
    Box win(box.d, prof.L + spec.pot.r);
    for_each_site(win, [&](const Site& x) {
      if (!spec.pot.stencil_inside(box, x)) return;
      double tx = prof.theta(x);
      for (int i = 0; i < box.d; ++i) {
        Site y = x;
        y.c[i] += 1;
        double h = std::sin(0.5 * (tx - prof.theta(y)));
        sr.add(-spec.pot.J * 4.0 * h * h);
      }
    });
  }

  CompensatedSum lr;
  double lr_ext = 0.0, lr_ext_err = 0.0;
  if (spec.lambda != 0.0) {
    Box ball(box.d, prof.L);
    const long long W = ball.site_count();
    std::vector<double> th(static_cast<std::size_t>(W));
    for (long long i = 0; i < W; ++i)
      th[static_cast<std::size_t>(i)] = prof.theta(ball.site_at(i));
    KernelTable tab(spec.ker, box.d, 2 * prof.L);
    for (long long i = 0; i < W; ++i) {
      Site x = ball.site_at(i);
      for (long long j = i + 1; j < W; ++j) {
        double h = std::sin(0.5 * (th[static_cast<std::size_t>(i)] -
                                   th[static_cast<std::size_t>(j)]));
        if (h == 0.0) continue;
        lr.add(4.0 * h * h * tab.at(sub(ball.site_at(j), x)));
      }
    }
    // pairs leaving Lambda_L: the partner angle is zero
    std::vector<double> b_box = box_kernel_sums(box.d, spec.ker, box.half, prof.L);
    std::vector<double> b_ball = box_kernel_sums(box.d, spec.ker, prof.L, prof.L);
    Enclosure ctot = kernel_total_sum(spec.ker, box.d);
    CompensatedSum cross, ext, ext_err;
    for (long long i = 0; i < W; ++i) {
      double h = std::sin(0.5 * th[static_cast<std::size_t>(i)]);
      double w = 4.0 * h * h;
      if (w == 0.0) continue;
      cross.add(w * (b_box[static_cast<std::size_t>(i)] -
                     b_ball[static_cast<std::size_t>(i)]));
      ext.add(w * (ctot.value - b_box[static_cast<std::size_t>(i)]));
      ext_err.add(w * ctot.err);
    }
    lr.add(cross.value());
    lr_ext = ext.value();
    lr_ext_err = ext_err.value();
  }

  out.box_value = m2 * (sr.value() + spec.lambda * lr.value());
  out.extended_value = out.box_value + m2 * spec.lambda * lr_ext;
  out.tail_err = m2 * spec.lambda * lr_ext_err;
  return out;
}

// E(s_x . s_y) for one NN bond of an open chain at coupling beta*J, by
// quadrature of the single-bond marginal.
inline double aligned_bond_expectation(double beta_j, int n) {
  if (n == 2) {
    auto num = [beta_j](double p) { return std::cos(p) * std::exp(beta_j * std::cos(p)); };
    auto den = [beta_j](double p) { return std::exp(beta_j * std::cos(p)); };
    return adaptive_simpson(num, 0.0, M_PI, 1e-13) /
           adaptive_simpson(den, 0.0, M_PI, 1e-13);
  }
  if (n == 3) {
    auto num = [beta_j](double u) { return u * std::exp(beta_j * u); };
    auto den = [beta_j](double u) { return std::exp(beta_j * u); };
    return adaptive_simpson(num, -1.0, 1.0, 1e-13) /
           adaptive_simpson(den, -1.0, 1.0, 1e-13);
  }
  throw std::invalid_argument("aligned_bond_expectation supports n = 2, 3");
}

struct ChiSquareResult {
  double stat = 0.0;
  double threshold = 0.0;
  long dof = 0;
  bool pass = false;
};

// Angular histogram of the relative bond angle against the Gibbs density
// e^{beta J cos phi}; 1% critical value via the Wilson-Hilferty cube.
inline ChiSquareResult chi_square_angle_test(const std::vector<double>& angles,
                                             double beta_j, int bins = 36) {
  if (bins < 4) throw std::invalid_argument("need at least 4 bins");
  double z = adaptive_simpson(
      [beta_j](double p) { return std::exp(beta_j * std::cos(p)); }, -M_PI, M_PI,
      1e-13);
  std::vector<double> expected(static_cast<std::size_t>(bins), 0.0);
  for (int b = 0; b < bins; ++b) {
    double lo = -M_PI + 2.0 * M_PI * b / bins;
    double hi = -M_PI + 2.0 * M_PI * (b + 1) / bins;
    expected[static_cast<std::size_t>(b)] =
        adaptive_simpson([beta_j](double p) { return std::exp(beta_j * std::cos(p)); },
                         lo, hi, 1e-13) /
        z;
  }
  std::vector<long> observed(static_cast<std::size_t>(bins), 0);
  for (double a : angles) {
    double w = std::remainder(a, 2.0 * M_PI);
    int b = static_cast<int>((w + M_PI) / (2.0 * M_PI) * bins);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    ++observed[static_cast<std::size_t>(b)];
  }
  double nsamp = static_cast<double>(angles.size());
  ChiSquareResult r;
  r.dof = bins - 1;
  for (int b = 0; b < bins; ++b) {
    double e = nsamp * expected[static_cast<std::size_t>(b)];
    double o = static_cast<double>(observed[static_cast<std::size_t>(b)]);
    r.stat += (o - e) * (o - e) / e;
  }
  double df = static_cast<double>(r.dof);
  double zq = 2.3263478740408408;  // one-sided 1%
  double core = 1.0 - 2.0 / (9.0 * df) + zq * std::sqrt(2.0 / (9.0 * df));
  r.threshold = df * core * core * core;
  r.pass = r.stat <= r.threshold;
  return r;
}

struct KsResult {
  double stat = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.stat = d;
  r.threshold = 1.628 * std::sqrt((na + nb) / (na * nb));  // 1% level
  r.pass = r.stat <= r.threshold;
  return r;
}

}  // namespace spinlab
