#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "qci/optics.hpp"
#include "qci/pattern.hpp"
#include "qci/rng.hpp"

using namespace qci;
using namespace qci::optics;
using Complexd = std::complex<double>;

namespace {

// Independent oracle: brute-force mirrored-boundary convolution.
Grid2D<Complexd> conv_oracle(const Grid2D<Complexd>& f,
                             const Grid2D<double>& ker) {
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -1 - i;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  const int r = (ker.nx - 1) / 2;
  Grid2D<Complexd> out(f.nx, f.ny, f.pitch);
  for (int iy = 0; iy < f.ny; ++iy)
    for (int ix = 0; ix < f.nx; ++ix) {
      Complexd acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          acc += ker.at(dx + r, dy + r) *
                 f.at(mirror(ix - dx, f.nx), mirror(iy - dy, f.ny));
      out.at(ix, iy) = acc;
    }
  return out;
}

double kernel_intensity_fwhm(const Grid2D<double>& k) {
  const int r = (k.nx - 1) / 2;
  const double peak = k.at(r, r) * k.at(r, r);
  for (int ix = r; ix + 1 < k.nx; ++ix) {
    const double a = k.at(ix, r) * k.at(ix, r);
    const double b = k.at(ix + 1, r) * k.at(ix + 1, r);
    if (a >= 0.5 * peak && b < 0.5 * peak) {
      const double t = (0.5 * peak - a) / (b - a);
      return 2.0 * ((ix - r) + t) * k.pitch;
    }
  }
  return 0.0;
}

Grid2D<Complexd> random_field(int n, double pitch, uint64_t seed) {
  Grid2D<Complexd> f(n, n, pitch);
  Rng rng(seed);
  for (auto& c : f.cells) c = Complexd{rng.normal(), rng.normal()};
  return f;
}

double total_intensity(const Grid2D<Complexd>& f) {
  double s = 0.0;
  for (const auto& c : f.cells) s += std::norm(c);
  return s;
}

}  // namespace

TEST_CASE("blur kernel: unit sum, symmetry, positivity, measured FWHM") {
  TelescopeConfig cfg;
  const auto k = coherent_psf(cfg, 0.05);
  double sum = 0.0;
  for (double v : k.cells) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  const int r = (k.nx - 1) / 2;
  for (int iy = 0; iy < k.ny; ++iy)
    for (int ix = 0; ix < k.nx; ++ix)
      CHECK(k.at(ix, iy) ==
            doctest::Approx(k.at(k.nx - 1 - ix, k.ny - 1 - iy)).epsilon(1e-12));
  CHECK(k.at(r, r) == doctest::Approx(*std::max_element(k.cells.begin(),
                                                        k.cells.end())));
  CHECK(kernel_intensity_fwhm(k) == doctest::Approx(0.30).epsilon(0.034));
}

TEST_CASE("airy kernel matches the requested intensity FWHM") {
  TelescopeConfig cfg;
  cfg.psf = PsfKind::Airy;
  const auto k = coherent_psf(cfg, 0.02);
  CHECK(kernel_intensity_fwhm(k) == doctest::Approx(0.30).epsilon(0.05));
  double sum = 0.0;
  for (double v : k.cells) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("undersampled grids are rejected with advice") {
  TelescopeConfig cfg;
  try {
    coherent_psf(cfg, 0.15);
    FAIL("expected an undersampling error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("pitch") != std::string::npos);
  }
}

TEST_CASE("disabled blur is the exact identity") {
  TelescopeConfig cfg;
  cfg.psf = PsfKind::None;
  cfg.demag = 1.0;
  cfg.invert = false;
  const auto k = coherent_psf(cfg, 0.05);
  CHECK(k.nx == 1);
  ComplexField f;
  f.grid = random_field(21, 0.05, 2);
  const auto img = image_through_telescope(f, cfg);
  for (int iy = 0; iy < 21; ++iy)
    for (int ix = 0; ix < 21; ++ix)
      CHECK(img.counts.at(ix, iy) ==
            doctest::Approx(std::norm(f.grid.at(ix, iy))).epsilon(1e-14));
}

TEST_CASE("direct and FFT convolutions agree to 1e-9") {
  TelescopeConfig cfg;
  for (double res : {0.3, 0.6}) {
    cfg.resolution_fwhm = res;
    const auto ker = coherent_psf(cfg, 0.05);
    const auto f = random_field(41, 0.05, res == 0.3 ? 7 : 8);
    const auto a = convolve_same(f, ker, ConvMethod::Direct);
    const auto b = convolve_same(f, ker, ConvMethod::Fft);
    for (size_t i = 0; i < a.cells.size(); ++i)
      CHECK(std::abs(a.cells[i] - b.cells[i]) < 1e-9);
  }
}

TEST_CASE("convolution agrees with the brute-force oracle") {
  TelescopeConfig cfg;
  const auto ker = coherent_psf(cfg, 0.05);
  const auto f = random_field(24, 0.05, 11);
  const auto got = convolve_same(f, ker);
  const auto want = conv_oracle(f, ker);
  for (size_t i = 0; i < got.cells.size(); ++i)
    CHECK(std::abs(got.cells[i] - want.cells[i]) < 1e-10);
}

TEST_CASE("uniform fields conserve power; a phase edge loses power") {
  TelescopeConfig cfg;
  cfg.demag = 1.0;
  cfg.invert = false;
  ComplexField uniform;
  uniform.grid = Grid2D<Complexd>(61, 61, 0.05, Complexd{0.7, 0.0});
  const double before = total_intensity(uniform.grid);
  const auto img = image_through_telescope(uniform, cfg);
  double after = 0.0;
  for (double v : img.counts.cells) after += v;
  CHECK(after == doctest::Approx(before).epsilon(1e-6));

  ComplexField edged = uniform;
  for (int iy = 0; iy < 61; ++iy)
    for (int ix = 31; ix < 61; ++ix) edged.grid.at(ix, iy) *= -1.0;
  const auto img2 = image_through_telescope(edged, cfg);
  double after2 = 0.0;
  for (double v : img2.counts.cells) after2 += v;
  CHECK(after2 < before * 0.999);
}

TEST_CASE("two-level field: interiors keep their unblurred levels to 1%") {
  TelescopeConfig cfg;  // 0.3 mm blur on 2 mm cells
  cfg.demag = 1.0;
  cfg.invert = false;
  const auto pat = qci::pattern::generate_checkerboard(2.0, 2);
  Grid2D<double> env(81, 81, 0.05, 1.0);
  const auto response = [](double phi) {
    return Complexd{(1.0 - std::cos(phi)) / 2.0, 0.0};
  };
  const auto field = conditional_amplitude_map(pat, response, env);
  const auto img = image_through_telescope(field, cfg);
  // Centres of the four cells.
  for (double cx : {-1.0, 1.0})
    for (double cy : {-1.0, 1.0}) {
      const int ix = img.counts.ix_of(cx);
      const int iy = img.counts.iy_of(cy);
      const double want = std::norm(response(qci::pattern::phase_at(pat, cx, cy)));
      CHECK(img.counts.at(ix, iy) == doctest::Approx(want).epsilon(0.01));
    }
}

TEST_CASE("pure phase checkerboard leaves dark bands at the boundaries") {
  TelescopeConfig cfg;
  cfg.demag = 1.0;
  cfg.invert = false;
  const auto pat = qci::pattern::generate_checkerboard(1.0, 4);
  Grid2D<double> env(101, 101, 0.05, 1.0);
  const auto response = [](double phi) { return std::polar(0.5, phi); };
  const auto field = conditional_amplitude_map(pat, response, env);
  const auto img = image_through_telescope(field, cfg);
  const double interior = img.counts.at(img.counts.ix_of(0.5), img.counts.iy_of(0.5));
  const double on_edge = img.counts.at(img.counts.ix_of(0.0), img.counts.iy_of(0.5));
  CHECK(on_edge < 0.1 * interior);
}

TEST_CASE("a bright point maps to the inverted demagnified position") {
  TelescopeConfig cfg;  // demag 0.52, inverting
  cfg.psf = PsfKind::None;
  ComplexField f;
  f.grid = Grid2D<Complexd>(41, 41, 0.1);
  const int ix = f.grid.ix_of(1.5), iy = f.grid.iy_of(-0.8);
  f.grid.at(ix, iy) = 1.0;
  const auto img = image_through_telescope(f, cfg);
  int best = 0;
  for (size_t i = 1; i < img.counts.cells.size(); ++i)
    if (img.counts.cells[i] > img.counts.cells[size_t(best)]) best = int(i);
  const int by = best / img.counts.nx, bx = best % img.counts.nx;
  CHECK(img.counts.x(bx) ==
        doctest::Approx(-cfg.demag * f.grid.x(ix)).epsilon(1e-9));
  CHECK(img.counts.y(by) ==
        doctest::Approx(-cfg.demag * f.grid.y(iy)).epsilon(1e-9));
}

TEST_CASE("incoherent mode blurs intensity, not amplitude") {
  TelescopeConfig cfg;
  cfg.coherent = false;
  cfg.demag = 1.0;
  cfg.invert = false;
  // A pure phase flip is invisible to incoherent imaging.
  ComplexField f;
  f.grid = Grid2D<Complexd>(61, 61, 0.05, Complexd{1.0, 0.0});
  for (int iy = 0; iy < 61; ++iy)
    for (int ix = 31; ix < 61; ++ix) f.grid.at(ix, iy) *= -1.0;
  const auto img = image_through_telescope(f, cfg);
  for (double v : img.counts.cells)
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the blur operator is linear in the field") {
  TelescopeConfig cfg;
  const auto ker = coherent_psf(cfg, 0.05);
  const auto f = random_field(31, 0.05, 13);
  const auto g = random_field(31, 0.05, 14);
  Grid2D<Complexd> sum(31, 31, 0.05);
  for (size_t i = 0; i < sum.cells.size(); ++i)
    sum.cells[i] = f.cells[i] + 0.3 * g.cells[i];
  const auto cf = convolve_same(f, ker);
  const auto cg = convolve_same(g, ker);
  const auto cs = convolve_same(sum, ker);
  for (size_t i = 0; i < sum.cells.size(); ++i)
    CHECK(std::abs(cs.cells[i] - (cf.cells[i] + 0.3 * cg.cells[i])) < 1e-12);
}

TEST_CASE("incoherent imaging is linear in the intensity") {
  TelescopeConfig cfg;
  cfg.coherent = false;
  cfg.demag = 1.0;
  cfg.invert = false;
  ComplexField f;
  f.grid = random_field(31, 0.05, 15);
  ComplexField scaled = f;
  for (auto& c : scaled.grid.cells) c *= 2.0;  // |field|^2 scales by 4
  const auto a = image_through_telescope(f, cfg);
  const auto b = image_through_telescope(scaled, cfg);
  for (size_t i = 0; i < a.counts.cells.size(); ++i)
    CHECK(b.counts.cells[i] ==
          doctest::Approx(4.0 * a.counts.cells[i]).epsilon(1e-12));
}

TEST_CASE("conditional amplitude map composes response and envelope") {
  const auto pat = qci::pattern::generate_checkerboard(1.0, 2);
  Grid2D<double> env(41, 41, 0.05, 1.0);
  const auto one = [](double) { return Complexd{1.0, 0.0}; };
  const auto field = conditional_amplitude_map(pat, one, env);
  for (const auto& c : field.grid.cells)
    CHECK(c == Complexd{1.0, 0.0});

  Grid2D<double> env2(41, 41, 0.05, 0.25);
  const auto field2 = conditional_amplitude_map(pat, one, env2);
  for (const auto& c : field2.grid.cells)
    CHECK(c.real() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("photon-1 acceptance: lens constant, aperture indicator") {
  spatial::DetectionMode lens;
  for (double x : {-1.0, 0.0, 1.0})
    CHECK(photon1_superposition_acceptance(lens, x, 0.0) == 1.0);

  spatial::DetectionMode point;
  point.kind = spatial::DetectionMode::Point;
  point.x01 = 0.5;
  point.aperture_mm = 0.2;
  CHECK(photon1_superposition_acceptance(point, 0.5, 0.0) == 1.0);
  CHECK(photon1_superposition_acceptance(point, 0.59, 0.0) == 1.0);
  CHECK(photon1_superposition_acceptance(point, 0.61, 0.0) == 0.0);
  CHECK(photon1_superposition_acceptance(point, 0.5, 0.2) == 0.0);
}
