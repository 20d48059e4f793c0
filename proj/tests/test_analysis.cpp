#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "qci/analysis.hpp"
#include "qci/rng.hpp"

using namespace qci;
using namespace qci::analysis;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Singlet-pair coincidence probability with visibility, written directly.
double p_singlet(double d1, double d2, double v) {
  const double p = 0.5 * std::pow(std::sin((d1 - d2) * kDeg), 2);
  return v * p + 0.25 * (1.0 - v);
}

CorrelationTable singlet_table(const ChshAngles& a, double v, double n) {
  CorrelationTable t;
  const double d1s[2] = {a.d1, a.d1p};
  const double d2s[2] = {a.d2, a.d2p};
  for (double d1 : d1s)
    for (double d2 : d2s)
      for (double o1 : {0.0, 90.0})
        for (double o2 : {0.0, 90.0}) {
          bool dup = false;
          for (const auto& r : t.rows)
            if (std::abs(r.delta1_deg - (d1 + o1)) < 1e-9 &&
                std::abs(r.delta2_deg - (d2 + o2)) < 1e-9)
              dup = true;
          if (!dup) t.add(d1 + o1, d2 + o2, n * p_singlet(d1 + o1, d2 + o2, v));
        }
  return t;
}

// Camera frame whose counts follow the mask level under the telescope map.
ImageFrame two_level_frame(const pattern::PhasePattern& pat,
                           const optics::TelescopeConfig& tel, int n,
                           double obj_pitch, double lo, double hi) {
  ImageFrame f;
  f.counts = Grid2D<double>(n, n, obj_pitch * tel.demag);
  const double flip = tel.invert ? -1.0 : 1.0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const double ox = f.counts.x(ix) / (flip * tel.demag);
      const double oy = f.counts.y(iy) / (flip * tel.demag);
      f.counts.at(ix, iy) =
          pattern::phase_at(pat, ox, oy) > M_PI_2 ? hi : lo;
    }
  return f;
}

}  // namespace

TEST_CASE("expectation value from a four-setting count block") {
  CorrelationTable t;
  t.add(0.0, 0.0, 0.0);
  t.add(90.0, 90.0, 0.0);
  t.add(0.0, 90.0, 50.0);
  t.add(90.0, 0.0, 50.0);
  CHECK(expectation_E(t, 0.0, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));

  CorrelationTable flat;
  flat.add(0.0, 0.0, 25.0);
  flat.add(90.0, 90.0, 25.0);
  flat.add(0.0, 90.0, 25.0);
  flat.add(90.0, 0.0, 25.0);
  CHECK(expectation_E(flat, 0.0, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("singlet expectation at (0, 22.5) degrees") {
  const auto t = singlet_table({0.0, 45.0, 22.5, 67.5}, 1.0, 1e6);
  CHECK(expectation_E(t, 0.0, 22.5) ==
        doctest::Approx(-std::cos(45.0 * kDeg)).epsilon(1e-12));
  // E is a correlation: bounded by 1 in magnitude.
  for (double d1 : {0.0, 45.0})
    for (double d2 : {22.5, 67.5}) {
      const double e = expectation_E(t, d1, d2);
      CHECK(std::abs(e) <= 1.0 + 1e-12);
    }
}

TEST_CASE("missing settings and empty blocks are reported") {
  CorrelationTable t;
  t.add(0.0, 0.0, 10.0);
  try {
    expectation_E(t, 0.0, 0.0);
    FAIL("expected a missing-setting error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }

  CorrelationTable zero;
  zero.add(0.0, 0.0, 0.0);
  zero.add(90.0, 90.0, 0.0);
  zero.add(0.0, 90.0, 0.0);
  zero.add(90.0, 0.0, 0.0);
  CHECK_THROWS_AS(expectation_E(zero, 0.0, 0.0), std::runtime_error);
}

TEST_CASE("angle lookup is pi-periodic") {
  CorrelationTable t;
  t.add(0.0, 22.5, 3.0);
  CHECK(t.counts_at(180.0, 202.5) == doctest::Approx(3.0));
}

TEST_CASE("correlation parameter at the canonical angles") {
  const ChshAngles a{0.0, 45.0, 22.5, 67.5};

  SUBCASE("ideal state reaches -2 sqrt 2") {
    const auto r = chsh_S(singlet_table(a, 1.0, 1e6), a);
    CHECK(r.S == doctest::Approx(-2.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.violates_classical);
  }

  SUBCASE("visibility 0.94 reproduces the measured -2.66") {
    const auto r = chsh_S(singlet_table(a, 0.94, 1e6), a);
    CHECK(r.S == doctest::Approx(-0.94 * 2.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::abs(r.S - (-2.66)) < 0.01);
  }

  SUBCASE("fully mixed polarizations give zero") {
    const auto r = chsh_S(singlet_table(a, 0.0, 1e6), a);
    CHECK(r.S == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(!r.violates_classical);
  }

  SUBCASE("S is linear in the visibility") {
    const double s1 = chsh_S(singlet_table(a, 1.0, 1e6), a).S;
    for (double v : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double sv = chsh_S(singlet_table(a, v, 1e6), a).S;
      CHECK(std::abs(sv - v * s1) < 1e-9);
      CHECK(std::abs(sv) <= 2.0 * std::sqrt(2.0) + 1e-12);
    }
  }

  SUBCASE("degenerate equal angles give twice the single expectation") {
    const ChshAngles same{10.0, 10.0, 10.0, 10.0};
    const auto t = singlet_table(same, 1.0, 1e6);
    const auto r = chsh_S(t, same);
    CHECK(r.S == doctest::Approx(2.0 * expectation_E(t, 10.0, 10.0)).epsilon(1e-12));
  }
}

TEST_CASE("fringe fitting") {
  SUBCASE("exact fringe recovers unit visibility and the minimum position") {
    std::vector<std::pair<double, double>> scan;
    const double d2 = -45.0;
    for (double d = -90.0; d <= 90.0; d += 15.0)
      scan.emplace_back(d, 1000.0 * p_singlet(d, d2, 1.0));
    const auto fit = fit_sin2(scan);
    CHECK(fit.visibility == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.rms_residual < 1e-9 * 1000.0);
    CHECK(fit.phase_offset_deg == doctest::Approx(d2).epsilon(1e-6));
    CHECK(!fit.degenerate);
  }

  SUBCASE("noisy scan recovers an injected visibility of 0.9") {
    Rng rng(12);
    std::vector<std::pair<double, double>> scan;
    const long n = 200'000;
    for (double d = -90.0; d <= 90.0; d += 15.0)
      scan.emplace_back(d, double(rng.binomial(n, p_singlet(d, -45.0, 0.9))));
    const auto fit = fit_sin2(scan);
    CHECK(std::abs(fit.visibility - 0.9) < 0.02);
  }

  SUBCASE("constant scans are flagged degenerate with zero visibility") {
    std::vector<std::pair<double, double>> scan;
    for (double d = -90.0; d <= 90.0; d += 15.0) scan.emplace_back(d, 500.0);
    const auto fit = fit_sin2(scan);
    CHECK(fit.visibility == 0.0);
    CHECK(fit.degenerate);
  }

  SUBCASE("preconditions") {
    std::vector<std::pair<double, double>> few{{0, 1}, {30, 1}, {60, 1},
                                               {90, 1}, {120, 1}, {150, 1},
                                               {180, 1}};
    CHECK_THROWS_AS(fit_sin2(few), std::invalid_argument);
    std::vector<std::pair<double, double>> narrow;
    for (double d = 0.0; d <= 90.0; d += 10.0) narrow.emplace_back(d, 1.0);
    CHECK_THROWS_AS(fit_sin2(narrow), std::invalid_argument);
  }
}

TEST_CASE("linear fits") {
  SUBCASE("exact anti-diagonal") {
    std::vector<std::pair<double, double>> pts;
    for (double x = -3.0; x <= 3.0; x += 0.5) pts.emplace_back(x, -x);
    const auto f = linear_fit(pts);
    CHECK(f.slope == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.r == doctest::Approx(-1.0).epsilon(1e-12));
  }

  SUBCASE("horizontal line has zero slope") {
    std::vector<std::pair<double, double>> pts{{0, 3}, {1, 3}, {2, 3}};
    const auto f = linear_fit(pts);
    CHECK(f.slope == doctest::Approx(0.0));
    CHECK(f.intercept == doctest::Approx(3.0));
  }

  SUBCASE("noisy regression recovers the slope within its standard error") {
    Rng rng(21);
    std::vector<std::pair<double, double>> pts;
    const double noise = 0.05;
    for (int i = 0; i < 400; ++i) {
      const double x = rng.uniform() * 10.0 - 5.0;
      pts.emplace_back(x, -0.52 * x + rng.normal(0.0, noise));
    }
    const auto f = linear_fit(pts);
    const double se = noise / (std::sqrt(400.0) * std::sqrt(100.0 / 12.0));
    CHECK(std::abs(f.slope + 0.52) < 4.0 * se);
  }

  SUBCASE("degenerate abscissas are rejected") {
    std::vector<std::pair<double, double>> pts{{1, 0}, {1, 1}, {1, 2}};
    CHECK_THROWS_AS(linear_fit(pts), std::invalid_argument);
  }
}

TEST_CASE("interior mask drops pixels near phase boundaries") {
  const auto pat = pattern::generate_checkerboard(1.0, 4);
  optics::TelescopeConfig tel;
  tel.demag = 1.0;
  tel.invert = false;
  ImageFrame f;
  f.counts = Grid2D<double>(101, 101, 0.05);
  const auto mask = interior_mask(f, pat, tel, 0.3);
  // Centre of a square survives, the boundary does not.
  CHECK(mask.at(f.counts.ix_of(0.5), f.counts.iy_of(0.5)) == 1);
  CHECK(mask.at(f.counts.ix_of(0.0), f.counts.iy_of(0.5)) == 0);
  CHECK(mask.at(f.counts.ix_of(0.25), f.counts.iy_of(0.5)) == 0);
  // Outside the mask rim everything is interior again (far field).
  CHECK(mask.at(0, 0) == 1);
}

TEST_CASE("level report separates the two pattern classes") {
  const auto pat = pattern::generate_checkerboard(1.0, 4);
  optics::TelescopeConfig tel;  // 0.52 demag, inverted
  const int n = 171;
  const auto f = two_level_frame(pat, tel, n, 0.05, 0.0, 10.0);
  const auto rep = level_report(f, pat, tel);
  CHECK(rep.level_low == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.level_high == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(rep.contrast == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.n_low > 0);
  CHECK(rep.n_high > 0);
}

TEST_CASE("level report requires interior pixels") {
  const auto pat = pattern::generate_checkerboard(0.2, 4);  // finer than blur
  optics::TelescopeConfig tel;
  ImageFrame f;
  f.counts = Grid2D<double>(41, 41, 0.05 * tel.demag);
  CHECK_THROWS_AS(level_report(f, pat, tel), std::runtime_error);
}

TEST_CASE("inversion check: complementary and identical frames") {
  const auto pat = pattern::generate_checkerboard(1.0, 4);
  optics::TelescopeConfig tel;
  tel.demag = 1.0;
  tel.invert = false;
  const int n = 101;
  const auto a = two_level_frame(pat, tel, n, 0.05, 0.0, 10.0);
  const auto b = two_level_frame(pat, tel, n, 0.05, 10.0, 0.0);
  const auto mask = interior_mask(a, pat, tel, 0.3);

  const auto rep = inversion_check(a, b, &mask);
  CHECK(rep.sum_max_abs_dev < 1e-12);
  CHECK(rep.correlation == doctest::Approx(-1.0).epsilon(1e-12));

  const auto same = inversion_check(a, a, &mask);
  CHECK(same.correlation == doctest::Approx(1.0).epsilon(1e-12));

  ImageFrame other;
  other.counts = Grid2D<double>(7, 7, 0.05);
  CHECK_THROWS_AS(inversion_check(a, other, nullptr), std::invalid_argument);
}

TEST_CASE("flatness test accepts matched noise and rejects structure") {
  Rng rng(31);
  const int n = 64;
  ImageFrame raw, bg;
  raw.counts = Grid2D<double>(n, n, 0.05);
  bg.counts = Grid2D<double>(n, n, 0.05);
  for (int i = 0; i < n * n; ++i) {
    raw.counts.cells[size_t(i)] = double(rng.poisson(30.0));
    bg.counts.cells[size_t(i)] = double(rng.poisson(30.0));
  }
  const auto ok = flatness_chi2(raw, bg, 8);
  CHECK(ok.dof == 64);
  CHECK(ok.pass);

  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n / 2; ++ix)
      raw.counts.at(ix, iy) += 12.0;
  const auto bad = flatness_chi2(raw, bg, 8);
  CHECK(!bad.pass);
}

TEST_CASE("chi-squared quantile approximation") {
  CHECK(chi2_quantile(0.95, 100) == doctest::Approx(124.342).epsilon(0.005));
  CHECK(chi2_quantile(0.95, 64) == doctest::Approx(83.675).epsilon(0.005));
  CHECK(chi2_quantile(0.95, 10) == doctest::Approx(18.307).epsilon(0.01));
}
