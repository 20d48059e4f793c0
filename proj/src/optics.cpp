#include "qci/optics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qci::optics {

namespace {

using Complexd = std::complex<double>;

// Intensity FWHM of exp(-r^2 / w^2) is 2 w sqrt(ln 2).
double gaussian_w(double resolution_fwhm) {
  return resolution_fwhm / (2.0 * std::sqrt(std::log(2.0)));
}

int mirror_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

Grid2D<Complexd> mirror_extend(const Grid2D<Complexd>& f, int r) {
  Grid2D<Complexd> e(f.nx + 2 * r, f.ny + 2 * r, f.pitch);
  for (int iy = 0; iy < e.ny; ++iy)
    for (int ix = 0; ix < e.nx; ++ix)
      e.at(ix, iy) =
          f.at(mirror_index(ix - r, f.nx), mirror_index(iy - r, f.ny));
  return e;
}

Grid2D<Complexd> convolve_direct(const Grid2D<Complexd>& f,
                                 const Grid2D<double>& ker) {
  const int r = (ker.nx - 1) / 2;
  const Grid2D<Complexd> e = mirror_extend(f, r);
  Grid2D<Complexd> out(f.nx, f.ny, f.pitch);
  for (int iy = 0; iy < f.ny; ++iy) {
    for (int ix = 0; ix < f.nx; ++ix) {
      Complexd acc = 0.0;
      for (int ly = 0; ly < ker.ny; ++ly)
        for (int lx = 0; lx < ker.nx; ++lx)
          acc += ker.at(lx, ly) * e.at(ix + 2 * r - lx, iy + 2 * r - ly);
      out.at(ix, iy) = acc;
    }
  }
  return out;
}

std::mutex fftw_plan_mutex;

void fft2_inplace(std::vector<Complexd>& data, int n, int sign) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    plan = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(data.data()),
                            reinterpret_cast<fftw_complex*>(data.data()), sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
}

int next_pow2(int n) {
  int m = 1;
  while (m < n) m <<= 1;
  return m;
}

Grid2D<Complexd> convolve_fft(const Grid2D<Complexd>& f,
                              const Grid2D<double>& ker) {
  const int r = (ker.nx - 1) / 2;
  const Grid2D<Complexd> e = mirror_extend(f, r);
  const int need = std::max(e.nx + ker.nx - 1, e.ny + ker.ny - 1);
  const int m = next_pow2(need);

  std::vector<Complexd> fa(size_t(m) * m, Complexd{0.0, 0.0});
  std::vector<Complexd> fk(size_t(m) * m, Complexd{0.0, 0.0});
  for (int iy = 0; iy < e.ny; ++iy)
    for (int ix = 0; ix < e.nx; ++ix)
      fa[size_t(iy) * m + ix] = e.at(ix, iy);
  for (int iy = 0; iy < ker.ny; ++iy)
    for (int ix = 0; ix < ker.nx; ++ix)
      fk[size_t(iy) * m + ix] = ker.at(ix, iy);

  fft2_inplace(fa, m, FFTW_FORWARD);
  fft2_inplace(fk, m, FFTW_FORWARD);
  const double scale = 1.0 / (double(m) * double(m));
  for (size_t i = 0; i < fa.size(); ++i) fa[i] *= fk[i] * scale;
  fft2_inplace(fa, m, FFTW_BACKWARD);

  Grid2D<Complexd> out(f.nx, f.ny, f.pitch);
  for (int iy = 0; iy < f.ny; ++iy)
    for (int ix = 0; ix < f.nx; ++ix)
      out.at(ix, iy) = fa[size_t(iy + 2 * r) * m + (ix + 2 * r)];
  return out;
}

Grid2D<double> intensity_kernel(const Grid2D<double>& amp_kernel) {
  Grid2D<double> k(amp_kernel.nx, amp_kernel.ny, amp_kernel.pitch);
  double sum = 0.0;
  for (size_t i = 0; i < k.cells.size(); ++i) {
    k.cells[i] = amp_kernel.cells[i] * amp_kernel.cells[i];
    sum += k.cells[i];
  }
  for (auto& v : k.cells) v /= sum;
  return k;
}

}  // namespace

void TelescopeConfig::validate() const {
  if (!(demag > 0.0)) throw std::invalid_argument("telescope demag must be > 0");
  if (!(resolution_fwhm > 0.0))
    throw std::invalid_argument("telescope resolution_fwhm must be > 0");
}

Grid2D<double> coherent_psf(const TelescopeConfig& cfg, double pitch_mm) {
  cfg.validate();
  if (!(pitch_mm > 0.0)) throw std::invalid_argument("pitch must be > 0");
  if (cfg.psf == PsfKind::None) {
    Grid2D<double> k(1, 1, pitch_mm);
    k.at(0, 0) = 1.0;
    return k;
  }
  if (pitch_mm >= cfg.resolution_fwhm / 3.0) {
    std::ostringstream os;
    os << "grid pitch " << pitch_mm << " mm undersamples the blur kernel; "
       << "use a pitch below resolution_fwhm/3 = " << cfg.resolution_fwhm / 3.0
       << " mm";
    throw std::invalid_argument(os.str());
  }

  int radius;
  if (cfg.psf == PsfKind::Gaussian) {
    radius = int(std::ceil(4.0 * gaussian_w(cfg.resolution_fwhm) / pitch_mm));
  } else {
    // Carry the Airy pattern out to its second dark ring.
    radius = int(std::ceil(3.1 * cfg.resolution_fwhm / pitch_mm));
  }
  const int n = 2 * radius + 1;
  Grid2D<double> k(n, n, pitch_mm);
  double sum = 0.0;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double x = (ix - radius) * pitch_mm;
      const double y = (iy - radius) * pitch_mm;
      const double rr = std::sqrt(x * x + y * y);
      double v;
      if (cfg.psf == PsfKind::Gaussian) {
        const double w = gaussian_w(cfg.resolution_fwhm);
        v = std::exp(-rr * rr / (2.0 * w * w));
      } else {
        // (2 J1(q)/q)^2 has its half maximum at q = 1.61634.
        const double q = 2.0 * 1.6163399 * rr / cfg.resolution_fwhm;
        v = (q < 1e-12) ? 1.0 : 2.0 * std::cyl_bessel_j(1, q) / q;
      }
      k.at(ix, iy) = v;
      sum += v;
    }
  }
  for (auto& v : k.cells) v /= sum;
  return k;
}

ComplexField conditional_amplitude_map(
    const pattern::PhasePattern& pat,
    const std::function<Complexd(double)>& response,
    const Grid2D<double>& envelope) {
  ComplexField f;
  f.plane = "object";
  f.grid = Grid2D<Complexd>(envelope.nx, envelope.ny, envelope.pitch);
  for (int iy = 0; iy < envelope.ny; ++iy) {
    for (int ix = 0; ix < envelope.nx; ++ix) {
      const double env = envelope.at(ix, iy);
      if (env < 0.0)
        throw std::invalid_argument("envelope must be non-negative");
      const double phi =
          pattern::phase_at(pat, envelope.x(ix), envelope.y(iy));
      f.grid.at(ix, iy) = response(phi) * std::sqrt(env);
    }
  }
  return f;
}

Grid2D<Complexd> convolve_same(const Grid2D<Complexd>& f,
                               const Grid2D<double>& kernel,
                               ConvMethod method) {
  if (kernel.nx % 2 == 0 || kernel.ny % 2 == 0 || kernel.nx != kernel.ny)
    throw std::invalid_argument("kernel must be square with odd size");
  if (kernel.nx == 1) {
    Grid2D<Complexd> out = f;
    for (auto& v : out.cells) v *= kernel.at(0, 0);
    return out;
  }
  if (method == ConvMethod::Direct) return convolve_direct(f, kernel);
  if (method == ConvMethod::Fft) return convolve_fft(f, kernel);
  return kernel.nx <= 15 ? convolve_direct(f, kernel) : convolve_fft(f, kernel);
}

Grid2D<double> blur_intensity(const Grid2D<double>& intensity,
                              const TelescopeConfig& cfg) {
  const Grid2D<double> amp_kernel = coherent_psf(cfg, intensity.pitch);
  Grid2D<Complexd> as_complex(intensity.nx, intensity.ny, intensity.pitch);
  for (size_t i = 0; i < intensity.cells.size(); ++i)
    as_complex.cells[i] = intensity.cells[i];
  const auto blurred = convolve_same(as_complex, intensity_kernel(amp_kernel));
  Grid2D<double> out(intensity.nx, intensity.ny, intensity.pitch);
  for (size_t i = 0; i < out.cells.size(); ++i)
    out.cells[i] = std::max(0.0, blurred.cells[i].real());
  return out;
}

ImageFrame image_through_telescope(const ComplexField& field,
                                   const TelescopeConfig& cfg) {
  cfg.validate();
  const Grid2D<double> amp_kernel = coherent_psf(cfg, field.grid.pitch);

  Grid2D<double> intensity(field.grid.nx, field.grid.ny, field.grid.pitch);
  if (cfg.coherent) {
    const auto blurred = convolve_same(field.grid, amp_kernel);
    for (size_t i = 0; i < intensity.cells.size(); ++i)
      intensity.cells[i] = std::norm(blurred.cells[i]);
  } else {
    Grid2D<Complexd> isq(field.grid.nx, field.grid.ny, field.grid.pitch);
    for (size_t i = 0; i < isq.cells.size(); ++i)
      isq.cells[i] = std::norm(field.grid.cells[i]);
    const auto blurred = convolve_same(isq, intensity_kernel(amp_kernel));
    for (size_t i = 0; i < intensity.cells.size(); ++i)
      intensity.cells[i] = std::max(0.0, blurred.cells[i].real());
  }

  ImageFrame frame;
  frame.counts = Grid2D<double>(intensity.nx, intensity.ny,
                                intensity.pitch * cfg.demag);
  for (int iy = 0; iy < intensity.ny; ++iy)
    for (int ix = 0; ix < intensity.nx; ++ix) {
      const int ox = cfg.invert ? intensity.nx - 1 - ix : ix;
      const int oy = cfg.invert ? intensity.ny - 1 - iy : iy;
      frame.counts.at(ox, oy) = intensity.at(ix, iy);
    }
  return frame;
}

double photon1_superposition_acceptance(const spatial::DetectionMode& mode,
                                        double x1_mm, double y1_mm) {
  if (mode.kind == spatial::DetectionMode::Superposition) return 1.0;
  const double hw = 0.5 * mode.aperture_mm;
  return (std::abs(x1_mm - mode.x01) <= hw && std::abs(y1_mm - mode.y01) <= hw)
             ? 1.0
             : 0.0;
}

}  // namespace qci::optics
