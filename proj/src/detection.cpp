#include "qci/detection.hpp"

#include <cmath>
#include <stdexcept>

namespace qci::detection {

void DetectorConfig::validate() const {
  if (!(pair_rate_hz > 0.0))
    throw std::invalid_argument("pair_rate_hz must be > 0");
  if (!(accidental_ratio > 0.0))
    throw std::invalid_argument("accidental_ratio must be > 0");
  if (dark_rate_hz_per_px < 0.0)
    throw std::invalid_argument("dark_rate_hz_per_px must be >= 0");
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw std::invalid_argument("visibility must be in [0, 1]");
}

double apply_visibility(double p, double visibility) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("probability must be in [0, 1]");
  if (visibility < 0.0 || visibility > 1.0)
    throw std::invalid_argument("visibility must be in [0, 1]");
  return visibility * p + 0.25 * (1.0 - visibility);
}

ImageFrame accumulate(const ImageFrame& rates, const DetectorConfig& cfg,
                      double exposure_s, Rng& rng,
                      std::optional<double> reference_total_rate_hz) {
  cfg.validate();
  if (exposure_s < 0.0) throw std::invalid_argument("exposure must be >= 0");
  const size_t n_px = rates.counts.cells.size();
  if (n_px == 0) throw std::invalid_argument("empty rate frame");

  double ref_rate = reference_total_rate_hz.value_or(rates.total());
  const double accidental_rate_px =
      ref_rate / (cfg.accidental_ratio * double(n_px));

  ImageFrame out;
  out.counts = Grid2D<double>(rates.counts.nx, rates.counts.ny,
                              rates.counts.pitch);
  out.exposure_s = exposure_s;
  out.meta = rates.meta;
  out.meta.mc_counts = true;
  for (size_t i = 0; i < n_px; ++i) {
    const double rate = rates.counts.cells[i];
    if (rate < 0.0) throw std::invalid_argument("signal rates must be >= 0");
    const double mean =
        (rate + accidental_rate_px + cfg.dark_rate_hz_per_px) * exposure_s;
    out.counts.cells[i] = double(rng.poisson(mean));
  }
  return out;
}

ImageFrame subtract_background(const ImageFrame& frame,
                               const ImageFrame& background) {
  if (frame.counts.nx != background.counts.nx ||
      frame.counts.ny != background.counts.ny ||
      std::abs(frame.counts.pitch - background.counts.pitch) >
          1e-12 * frame.counts.pitch)
    throw std::invalid_argument("background geometry does not match frame");
  if (std::abs(frame.exposure_s - background.exposure_s) >
      1e-9 * std::max(1.0, frame.exposure_s))
    throw std::invalid_argument("background exposure does not match frame");

  ImageFrame out = frame;
  for (size_t i = 0; i < out.counts.cells.size(); ++i)
    out.counts.cells[i] -= background.counts.cells[i];
  out.meta.corrected = true;
  return out;
}

std::optional<double> noise_metric(const ImageFrame& frame,
                                   const PixelRegion& region) {
  if (region.w <= 0 || region.h <= 0 || region.x0 < 0 || region.y0 < 0 ||
      region.x0 + region.w > frame.counts.nx ||
      region.y0 + region.h > frame.counts.ny)
    throw std::invalid_argument("noise_metric region outside frame");
  double sum = 0.0, sum2 = 0.0;
  const double n = double(region.w) * double(region.h);
  for (int iy = region.y0; iy < region.y0 + region.h; ++iy)
    for (int ix = region.x0; ix < region.x0 + region.w; ++ix) {
      const double c = frame.counts.at(ix, iy);
      sum += c;
      sum2 += c * c;
    }
  const double mean = sum / n;
  if (mean == 0.0) return std::nullopt;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  return std::sqrt(var) / mean;
}

}  // namespace qci::detection
