#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "spinlab/spin.hpp"

using namespace spinlab;

TEST_CASE("deformation angle is flat inside, zero outside, linear across") {
  DeformationProfile prof(1, 8, 4);
  REQUIRE(prof.theta_shell(0) == M_PI);
  REQUIRE(prof.theta_shell(4) == M_PI);
  REQUIRE(prof.theta_shell(5) == Catch::Approx(M_PI).epsilon(1e-15));
  REQUIRE(prof.theta_shell(6) == Catch::Approx(3.0 * M_PI / 4.0));
  REQUIRE(prof.theta_shell(7) == Catch::Approx(2.0 * M_PI / 4.0));
  REQUIRE(prof.theta_shell(8) == Catch::Approx(M_PI / 4.0));
  REQUIRE(prof.theta_shell(9) == 0.0);
  REQUIRE(prof.theta_shell(100) == 0.0);
}

TEST_CASE("angle step across a single shell never exceeds pi over a") {
  DeformationProfile prof(2, 37, 9);
  for (long m = 0; m <= 50; ++m) {
    double step = std::abs(prof.theta_shell(m) - prof.theta_shell(m + 1));
    REQUIRE(step <= M_PI / 9.0 + 1e-15);
  }
}

TEST_CASE("profile rejects degenerate widths") {
  REQUIRE_THROWS_AS(DeformationProfile(1, 4, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(DeformationProfile(1, 4, 0), std::invalid_argument);
  REQUIRE_NOTHROW(DeformationProfile(1, 4, 1));
}

TEST_CASE("plane rotation matches complex multiplication by exp(-it)") {
  double v[2] = {0.6, 0.8};
  double t = 0.7321;
  std::complex<double> z(v[0], v[1]);
  std::complex<double> w = z * std::exp(std::complex<double>(0.0, -t));
  rotate12(v, std::cos(t), std::sin(t));
  REQUIRE(v[0] == Catch::Approx(w.real()).epsilon(1e-14));
  REQUIRE(v[1] == Catch::Approx(w.imag()).epsilon(1e-14));
}

TEST_CASE("rotations compose and invert") {
  double v[2] = {0.28, -0.96};
  double t = 1.234;
  double w[2] = {v[0], v[1]};
  rotate12(w, std::cos(t), std::sin(t));
  rotate12(w, std::cos(-t), std::sin(-t));
  REQUIRE(w[0] == Catch::Approx(v[0]).epsilon(1e-14));
  REQUIRE(w[1] == Catch::Approx(v[1]).epsilon(1e-14));

  double u1[2] = {v[0], v[1]}, u2[2] = {v[0], v[1]};
  rotate12(u1, std::cos(0.3), std::sin(0.3));
  rotate12(u1, std::cos(0.4), std::sin(0.4));
  rotate12(u2, std::cos(0.7), std::sin(0.7));
  REQUIRE(u1[0] == Catch::Approx(u2[0]).epsilon(1e-14));
  REQUIRE(u1[1] == Catch::Approx(u2[1]).epsilon(1e-14));
}

TEST_CASE("matrix form agrees with the fast plane rotation") {
  RotationFamily R(4, 0.9);
  double v[4] = {0.1, -0.2, 0.3, 0.4};
  double out[4];
  R.apply(v, out);
  double w[4] = {0.1, -0.2, 0.3, 0.4};
  rotate12(w, std::cos(0.9), std::sin(0.9));
  for (int k = 0; k < 4; ++k) REQUIRE(out[k] == Catch::Approx(w[k]).margin(1e-15));
  REQUIRE(out[2] == 0.3);
  REQUIRE(out[3] == 0.4);
}

TEST_CASE("random unit spins live on the sphere and are reproducible") {
  CounterRng r1(42, 7), r2(42, 7);
  double a[5], b[5];
  for (int i = 0; i < 100; ++i) {
    random_unit_spin(5, r1, a);
    random_unit_spin(5, r2, b);
    double q = 0.0;
    for (int k = 0; k < 5; ++k) {
      q += a[k] * a[k];
      REQUIRE(a[k] == b[k]);
    }
    REQUIRE(q == Catch::Approx(1.0).epsilon(1e-12));
  }
  CounterRng r3(42, 8);
  double c[5];
  random_unit_spin(5, r3, c);
  bool same = true;
  random_unit_spin(5, r1, a);
  for (int k = 0; k < 5; ++k) same = same && a[k] == c[k];
  REQUIRE_FALSE(same);
}

TEST_CASE("uniform sphere marginals have near zero mean") {
  CounterRng rng(9, 0);
  double mean[3] = {0, 0, 0};
  const int N = 20000;
  double s[3];
  for (int i = 0; i < N; ++i) {
    random_unit_spin(3, rng, s);
    for (int k = 0; k < 3; ++k) mean[k] += s[k];
  }
  for (int k = 0; k < 3; ++k) REQUIRE(std::abs(mean[k]) / N < 0.02);
}

TEST_CASE("config default is the first basis vector everywhere") {
  Box b(2, 2);
  SpinConfig cfg(b, 3);
  for (long long i = 0; i < cfg.sites(); ++i) {
    REQUIRE(cfg.spin(i)[0] == 1.0);
    REQUIRE(cfg.spin(i)[1] == 0.0);
    REQUIRE(cfg.spin(i)[2] == 0.0);
  }
  REQUIRE(cfg.norm_drift() == 0.0);
}

TEST_CASE("inhomogeneous rotation leaves the exterior fixed and flips the core") {
  Box b(1, 10);
  DeformationProfile prof(1, 6, 2);
  SpinConfig cfg(b, 3);
  SpinConfig rot = apply_inhomogeneous_rotation(cfg, prof, 1);
  // outside Lambda_6: untouched
  REQUIRE(rot.spin_at(make_site({8}))[0] == 1.0);
  // deep interior: theta = pi rotates e1 to -e1
  REQUIRE(rot.spin_at(make_site({0}))[0] == Catch::Approx(-1.0).epsilon(1e-15));
  REQUIRE(std::abs(rot.spin_at(make_site({0}))[1]) < 1e-15);
  // opposite signs agree on the first component and differ on the second
  SpinConfig neg = apply_inhomogeneous_rotation(cfg, prof, -1);
  Site mid = make_site({6});
  REQUIRE(rot.spin_at(mid)[0] == Catch::Approx(neg.spin_at(mid)[0]).epsilon(1e-15));
  REQUIRE(rot.spin_at(mid)[1] == Catch::Approx(-neg.spin_at(mid)[1]).epsilon(1e-15));
  REQUIRE(rot.norm_drift() < 1e-14);
}

TEST_CASE("rotations preserve third components") {
  Box b(1, 5);
  DeformationProfile prof(1, 4, 2);
  CounterRng rng(5, 0);
  SpinConfig cfg = random_config(b, 3, rng);
  SpinConfig rot = apply_inhomogeneous_rotation(cfg, prof, 1);
  for (long long i = 0; i < cfg.sites(); ++i)
    REQUIRE(rot.spin(i)[2] == cfg.spin(i)[2]);
}

TEST_CASE("global plane rotation is an isometry of the configuration") {
  Box b(1, 4);
  CounterRng rng(3, 1);
  SpinConfig cfg = random_config(b, 3, rng);
  SpinConfig before = cfg;
  apply_global_plane_rotation(cfg, 0, 1, 0.37);
  REQUIRE(cfg.norm_drift() < 1e-14);
  for (long long i = 0; i < cfg.sites(); ++i) {
    double d0 = 0.0, d1 = 0.0;
    for (int k = 0; k < 3; ++k) {
      d0 += before.spin(i)[k] * before.spin(i)[k];
      d1 += cfg.spin(i)[k] * cfg.spin(i)[k];
    }
    REQUIRE(d0 == Catch::Approx(d1).epsilon(1e-13));
  }
  REQUIRE_THROWS_AS(apply_global_plane_rotation(cfg, 1, 1, 0.1), std::invalid_argument);
}
