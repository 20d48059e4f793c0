#pragma once

#include <complex>
#include <functional>
#include <string>

#include "qci/frame.hpp"
#include "qci/grid.hpp"
#include "qci/pattern.hpp"
#include "qci/spatial.hpp"

namespace qci::optics {

enum class PsfKind { Gaussian, Airy, None };

// Collapsed description of the relay telescope: scale, inversion, and a
// single diffraction blur figure quoted at the object plane. The lens chain
// behind these numbers is not ray traced.
struct TelescopeConfig {
  double demag = 0.52;
  bool invert = true;
  double resolution_fwhm = 0.3;      // mm, intensity FWHM at the object plane
  double aperture_diameter = 50.0;   // mm, bookkeeping
  bool coherent = true;
  PsfKind psf = PsfKind::Gaussian;

  void validate() const;
};

struct ComplexField {
  Grid2D<std::complex<double>> grid;
  std::string plane;
};

// Real nonnegative amplitude kernel with unit sum whose intensity FWHM
// equals cfg.resolution_fwhm. Throws if pitch >= resolution_fwhm / 3
// (undersampled); PsfKind::None yields the 1x1 identity kernel.
Grid2D<double> coherent_psf(const TelescopeConfig& cfg, double pitch_mm);

// field(x, y) = response(phase(x, y)) * sqrt(envelope(x, y)): the photon-2
// amplitude at the pattern plane conditioned on the photon-1 outcome.
ComplexField conditional_amplitude_map(
    const pattern::PhasePattern& pat,
    const std::function<std::complex<double>(double)>& response,
    const Grid2D<double>& envelope);

enum class ConvMethod { Auto, Direct, Fft };

// Same-size 2D convolution with mirrored boundaries. Auto picks direct
// summation for kernels up to 15x15 cells and the FFT path beyond; the two
// paths agree to 1e-9 and either can be forced.
Grid2D<std::complex<double>> convolve_same(const Grid2D<std::complex<double>>& f,
                                           const Grid2D<double>& kernel,
                                           ConvMethod method = ConvMethod::Auto);

// Incoherent blur at the object plane: intensity convolved with the
// normalized intensity kernel |psf|^2.
Grid2D<double> blur_intensity(const Grid2D<double>& intensity,
                              const TelescopeConfig& cfg);

// Camera-plane intensity. Coherent mode squares the blurred amplitude,
// which is what darkens phase boundaries; incoherent mode blurs |field|^2
// with the intensity kernel instead. Geometry: pitch scales by demag and
// the image is rotated by 180 degrees when invert is set.
ImageFrame image_through_telescope(const ComplexField& field,
                                   const TelescopeConfig& cfg);

// Photon-1 acceptance weight: constant in superposition (lens) mode, a
// 0/1 aperture indicator in point mode.
double photon1_superposition_acceptance(const spatial::DetectionMode& mode,
                                        double x1_mm, double y1_mm);

}  // namespace qci::optics
