#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "spinlab/montecarlo.hpp"

using namespace spinlab;

namespace {

ModelSpec chain_model(int d, int n, double s, double lambda, double J, double beta) {
  ModelSpec m;
  m.d = d;
  m.n = n;
  m.lambda = lambda;
  m.beta = beta;
  m.pot = J != 0.0 ? nn_potential(J, d) : zero_potential();
  m.ker = power_law_kernel(s);
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("counter rng streams are reproducible and independent") {
  CounterRng a(5, 0), b(5, 0), c(5, 1);
  for (int i = 0; i < 64; ++i) REQUIRE(a.next_u64() == b.next_u64());
  bool differs = false;
  CounterRng a2(5, 0);
  for (int i = 0; i < 64; ++i) differs = differs || a2.next_u64() != c.next_u64();
  REQUIRE(differs);
  double u = a.uniform01();
  REQUIRE(u >= 0.0);
  REQUIRE(u < 1.0);
}

TEST_CASE("infinite temperature accepts every proposal") {
  ModelSpec m = chain_model(1, 3, 2.0, 1.0, 1.0, 0.0);
  Chain chain(Box(1, 6), m, 9, 0);
  chain.randomize();
  chain.sweep(10);
  REQUIRE(chain.acceptance_rate() == 1.0);
  REQUIRE(chain.sweeps() == 10);
}

TEST_CASE("energy bookkeeping tracks the recomputed total") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 1.0, 0.7);
  Chain chain(Box(1, 10), m, 13, 2);
  chain.randomize();
  chain.sweep(50);
  REQUIRE(chain.resync_energy() < 1e-10);
}

TEST_CASE("aligned start has the deterministic ground energy") {
  ModelSpec m = chain_model(1, 2, 2.0, 0.0, 1.0, 1.0);
  Chain chain(Box(1, 1), m, 1, 0);
  // three aligned spins, two bonds
  REQUIRE(chain.energy() == Catch::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("snapshot round trip restores the chain bit for bit") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 0.8, 0.6);
  Chain chain(Box(1, 8), m, 21, 5);
  chain.randomize();
  chain.sweep(7);
  std::ostringstream snap;
  chain.save_snapshot(snap);

  std::istringstream in(snap.str());
  Chain back = Chain::load_snapshot(in, m);
  REQUIRE(back.seed() == chain.seed());
  REQUIRE(back.stream() == chain.stream());
  REQUIRE(back.sweeps() == chain.sweeps());
  REQUIRE(back.energy() == chain.energy());
  for (long long i = 0; i < chain.config().sites(); ++i)
    for (int k = 0; k < 3; ++k)
      REQUIRE(back.config().spin(i)[k] == chain.config().spin(i)[k]);

  // continuing both chains gives identical trajectories
  chain.sweep(5);
  back.sweep(5);
  REQUIRE(back.energy() == chain.energy());
  for (long long i = 0; i < chain.config().sites(); ++i)
    REQUIRE(back.config().spin(i)[0] == chain.config().spin(i)[0]);
}

TEST_CASE("snapshot loader rejects mismatched models") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 0.8, 0.6);
  Chain chain(Box(1, 4), m, 2, 0);
  std::ostringstream snap;
  chain.save_snapshot(snap);
  ModelSpec other = chain_model(1, 2, 1.5, 1.0, 0.8, 0.6);
  std::istringstream in(snap.str());
  REQUIRE_THROWS_AS(Chain::load_snapshot(in, other), std::runtime_error);
}

TEST_CASE("batch means recovers the mean and a sane error bar") {
  CounterRng rng(33, 0);
  std::vector<double> x(3000);
  for (double& v : x) v = 2.5 + rng.normal();
  BatchStats st = batch_means(x);
  REQUIRE(st.batches == 30);
  REQUIRE(st.mean == Catch::Approx(2.5).margin(0.1));
  REQUIRE(st.se > 0.005);
  REQUIRE(st.se < 0.1);
  REQUIRE_THROWS_AS(batch_means(std::vector<double>(5, 1.0)), std::invalid_argument);
}

TEST_CASE("observable series has one entry per measurement") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 1.0, 0.5);
  Box box(1, 12);
  Chain chain(box, m, 3, 0);
  chain.randomize();
  DeformationProfile prof(1, 8, 2);
  DefectEngine engine(box, prof, m);
  ObservableSeries s = run_chain(chain, &engine, 5, 2, 40, 3);
  REQUIRE(s.energy.size() == 40);
  REQUIRE(s.defect.size() == 40);
  REQUIRE(s.block_abs.size() == 40);
  REQUIRE(s.magnetization.size() == 40);
  REQUIRE(s.sweep_index.front() == 7);
  REQUIRE(s.sweep_index.back() == 5 + 2 * 40);
  for (double v : s.block_abs) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  MagnetizationEstimate est = estimate_magnetization(s);
  REQUIRE(est.mean.size() == 3);
}

TEST_CASE("block averages of a constant configuration are exactly one") {
  Box box(1, 10);
  SpinConfig cfg(box, 2);
  REQUIRE(block_grid_abs_mean(cfg, 2) == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("single bond expectation matches the Bessel ratio") {
  // n=2: I1(b)/I0(b); n=3: coth(b) - 1/b
  for (double b : {0.5, 1.0, 2.0}) {
    double xy = aligned_bond_expectation(b, 2);
    REQUIRE(xy == Catch::Approx(std::cyl_bessel_i(1.0, b) / std::cyl_bessel_i(0.0, b))
                      .epsilon(1e-10));
    double heis = aligned_bond_expectation(b, 3);
    REQUIRE(heis == Catch::Approx(1.0 / std::tanh(b) - 1.0 / b).epsilon(1e-10));
  }
  REQUIRE(aligned_bond_expectation(1.0, 2) == Catch::Approx(0.4464).margin(5e-5));
  REQUIRE_THROWS_AS(aligned_bond_expectation(1.0, 4), std::invalid_argument);
}

TEST_CASE("metropolis reproduces the single bond marginal") {
  // open chain of 3 planar spins: each bond dot averages I1/I0 at beta J
  ModelSpec m = chain_model(1, 2, 2.0, 0.0, 1.0, 1.0);
  Box box(1, 1);
  Chain chain(box, m, 77, 0);
  chain.randomize();
  chain.sweep(500);
  const long meas = 60000;
  std::vector<double> bond(meas);
  std::vector<double> angles;
  angles.reserve(meas);
  for (long i = 0; i < meas; ++i) {
    chain.sweep(2);
    const SpinConfig& cfg = chain.config();
    const double* s0 = cfg.spin_at(make_site({0}));
    const double* s1 = cfg.spin_at(make_site({1}));
    bond[static_cast<std::size_t>(i)] = s0[0] * s1[0] + s0[1] * s1[1];
    angles.push_back(std::atan2(s1[1], s1[0]) - std::atan2(s0[1], s0[0]));
  }
  BatchStats st = batch_means(bond);
  double target = aligned_bond_expectation(1.0, 2);
  REQUIRE(std::abs(st.mean - target) < 4.0 * st.se + 1e-3);
  REQUIRE(std::abs(st.mean - 0.4464) < 0.01);

  ChiSquareResult chi = chi_square_angle_test(angles, 1.0);
  INFO("chi2 " << chi.stat << " thr " << chi.threshold);
  REQUIRE(chi.pass);
}

TEST_CASE("chi square flags a clearly wrong ensemble") {
  CounterRng rng(8, 0);
  std::vector<double> flat(20000);
  for (double& v : flat) v = rng.uniform(-M_PI, M_PI);
  ChiSquareResult chi = chi_square_angle_test(flat, 1.0);
  REQUIRE_FALSE(chi.pass);
}

TEST_CASE("ks statistic accepts equal ensembles and rejects shifted ones") {
  CounterRng rng(14, 0);
  std::vector<double> a(4000), b(4000), c(4000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    c[i] = rng.normal() + 0.5;
  }
  REQUIRE(ks_two_sample(a, b).pass);
  REQUIRE_FALSE(ks_two_sample(a, c).pass);
  REQUIRE_THROWS_AS(ks_two_sample({}, a), std::invalid_argument);
}

TEST_CASE("global rotation invariance of the defect ensemble") {
  // rotating every spin by a fixed in-plane angle leaves the defect law alone
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 1.0, 0.5);
  Box box(1, 12);
  DeformationProfile prof(1, 8, 2);
  DefectEngine engine(box, prof, m);
  CounterRng rng(91, 0);
  std::vector<double> plain, rotated;
  for (int i = 0; i < 400; ++i) {
    SpinConfig cfg = random_config(box, 3, rng);
    plain.push_back(engine.energy_defect(cfg));
    apply_global_plane_rotation(cfg, 0, 1, 1.1);
    rotated.push_back(engine.energy_defect(cfg));
  }
  REQUIRE(ks_two_sample(plain, rotated).pass);
  // and pointwise: the defect is exactly invariant under the global rotation
  for (std::size_t i = 0; i < plain.size(); ++i)
    REQUIRE(plain[i] == Catch::Approx(rotated[i]).margin(1e-9));
}

TEST_CASE("tail test passes on a distribution that meets the bound") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 1.0, 0.5);
  Box box(1, 16);
  DeformationProfile prof(1, 10, 3);
  DefectEngine engine(box, prof, m);
  Chain chain(box, m, 5, 0);
  chain.randomize();
  chain.sweep(100);
  std::vector<double> deltas = defect_distribution(chain, engine, 600, 2);
  REQUIRE(deltas.size() == 600);
  UniformBound u = uniform_bound(prof, m, box.half);
  Lemma35Result lr = lemma35_test(deltas, m.beta, u.value / 4.0);
  REQUIRE(lr.rhs == Catch::Approx(std::exp(-0.125 * m.beta * u.value)));
  REQUIRE(lr.pass);
}

TEST_CASE("lower bound diagnostic validates its inputs") {
  std::vector<double> deltas(200, 0.5);
  REQUIRE_THROWS_AS(lemma34_diagnostic(deltas, 2.0, 1.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(lemma34_diagnostic(deltas, 0.1, 0.0, 1.0), std::invalid_argument);
  Lemma34Result r = lemma34_diagnostic(deltas, 0.25, 1.0, 1.0);
  // constant 0.5 deltas: lhs = P(delta >= 0.25) = 1, rhs = (0.5-0.25)/0.75
  REQUIRE(r.lhs == 1.0);
  REQUIRE(r.rhs == Catch::Approx(1.0 / 3.0));
  REQUIRE(r.pass);
}

TEST_CASE("biased product sampler hits its target mean") {
  Box box(1, 50);
  CounterRng rng(44, 0);
  ProductMeasureSpec pm{0.3};
  double acc = 0.0;
  long count = 0;
  for (int rep = 0; rep < 40; ++rep) {
    SpinConfig cfg = sample_biased_product(pm, box, 3, rng);
    for (long long i = 0; i < cfg.sites(); ++i) {
      acc += cfg.spin(i)[0];
      ++count;
    }
  }
  double mean = acc / static_cast<double>(count);
  // sd of a single site first component is about sqrt(1 - m*^2) <= 1
  double sigma = 1.0 / std::sqrt(static_cast<double>(count));
  REQUIRE(std::abs(mean - 0.3) < 3.5 * sigma + 1e-12);
  REQUIRE_THROWS_AS(sample_biased_product(ProductMeasureSpec{1.0}, box, 3, rng),
                    std::invalid_argument);
}

TEST_CASE("independent spin oracle matches sampled defects") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 1.0, 1.0);
  Box box(1, 24);
  DeformationProfile prof(1, 16, 4);
  DefectEngine engine(box, prof, m);
  for (double mstar : {0.0, 0.5}) {
    ProductDefectOracle oracle = product_measure_defect_oracle(mstar, box, prof, m);
    CounterRng rng(60, static_cast<std::uint64_t>(mstar * 10));
    const int reps = 600;
    std::vector<double> vals(reps);
    for (int i = 0; i < reps; ++i) {
      SpinConfig cfg = sample_biased_product(ProductMeasureSpec{mstar}, box, 3, rng);
      vals[static_cast<std::size_t>(i)] = engine.energy_defect(cfg);
    }
    BatchStats st = batch_means(vals);
    INFO("m*=" << mstar << " sample " << st.mean << " oracle " << oracle.box_value);
    REQUIRE(std::abs(st.mean - oracle.box_value) <= 4.0 * st.se + 1e-9);
  }
}

TEST_CASE("oracle extension only adds exterior weight") {
  ModelSpec m = chain_model(1, 3, 1.5, 1.0, 0.0, 1.0);
  Box box(1, 30);
  DeformationProfile prof(1, 16, 4);
  ProductDefectOracle o = product_measure_defect_oracle(0.5, box, prof, m);
  REQUIRE(o.extended_value > o.box_value);
  REQUIRE(o.tail_err >= 0.0);
  REQUIRE(o.tail_err < 1e-6 * o.extended_value);
  ProductDefectOracle zero = product_measure_defect_oracle(0.0, box, prof, m);
  REQUIRE(zero.box_value == 0.0);
  REQUIRE(zero.extended_value == 0.0);
}
