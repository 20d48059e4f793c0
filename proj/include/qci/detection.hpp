#pragma once

#include <optional>

#include "qci/frame.hpp"
#include "qci/rng.hpp"

namespace qci::detection {

struct DetectorConfig {
  // Detected coincidences per second, summed over the frame, at the
  // reference setting (uniform zero-phase mask, both polarizers passing the
  // bright diagonal level). Quantum efficiency is folded in here.
  double pair_rate_hz = 700.0;
  double accidental_ratio = 0.40;       // coincidence : accidental totals
  double dark_rate_hz_per_px = 0.0;
  double visibility = 1.0;              // polarization correlation contrast
  double gate_insertion_delay_ns = 20.0;  // bookkeeping

  void validate() const;
};

// v * p + (1 - v)/4: interpolates a polarizer-pair probability between the
// ideal entangled value and a fully mixed polarization background. Applied
// at the probability level so fringe contrast and CHSH scale together.
double apply_visibility(double p, double visibility);

// Draws one gated exposure from a frame of signal rates (counts/s/px):
// per-pixel Poisson with mean (signal + accidental + dark rate) * exposure.
// The accidental rate is uniform, sized so that the reference total signal
// over the accidental total equals cfg.accidental_ratio. By default the
// given frame's own total serves as the reference; pass
// reference_total_rate_hz to pin it (0 disables accidentals).
ImageFrame accumulate(const ImageFrame& rates, const DetectorConfig& cfg,
                      double exposure_s, Rng& rng,
                      std::optional<double> reference_total_rate_hz = {});

// Pixelwise difference, corrected flag set, negative values preserved.
// Throws on geometry or exposure mismatch.
ImageFrame subtract_background(const ImageFrame& frame,
                               const ImageFrame& background);

struct PixelRegion {
  int x0 = 0, y0 = 0, w = 0, h = 0;
};

// std/mean of the counts in the region; nullopt when the mean is zero.
std::optional<double> noise_metric(const ImageFrame& frame,
                                   const PixelRegion& region);

}  // namespace qci::detection
