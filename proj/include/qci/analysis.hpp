#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qci/frame.hpp"
#include "qci/optics.hpp"
#include "qci/pattern.hpp"

namespace qci::analysis {

struct CorrelationRow {
  double delta1_deg = 0.0;
  double delta2_deg = 0.0;
  double counts = 0.0;
};

struct CorrelationTable {
  std::vector<CorrelationRow> rows;

  void add(double d1_deg, double d2_deg, double counts);
  // Row lookup is pi-periodic in both angles; throws naming the missing
  // setting when absent.
  double counts_at(double d1_deg, double d2_deg) const;
};

// E = (C(d1,d2) + C(d1+90,d2+90) - C(d1,d2+90) - C(d1+90,d2)) / (sum of the
// four). Throws when a setting is missing or the total is zero.
double expectation_E(const CorrelationTable& t, double d1_deg, double d2_deg);

struct ChshAngles {
  double d1 = 0.0, d1p = 45.0, d2 = 22.5, d2p = 67.5;  // degrees
};

struct ChshResult {
  double e11 = 0.0;  // E(d1, d2)
  double e12 = 0.0;  // E(d1, d2')
  double e21 = 0.0;  // E(d1', d2)
  double e22 = 0.0;  // E(d1', d2')
  double S = 0.0;
  bool violates_classical = false;  // |S| > 2
};

// S = E(d1,d2) - E(d1,d2') + E(d1',d2) + E(d1',d2'); the classical bound is
// |S| <= 2.
ChshResult chsh_S(const CorrelationTable& t, const ChshAngles& a);

struct SinSqFit {
  double visibility = 0.0;
  double phase_offset_deg = 0.0;  // angle of minimum coincidence rate
  double amplitude = 0.0;         // half peak-to-peak of the fringe
  double mean_rate = 0.0;
  double rms_residual = 0.0;
  bool degenerate = false;        // constant scan, visibility forced to 0
};

// Least-squares fringe fit of rate(d1) = mean - amplitude * cos 2(d1 - d2).
// Needs at least 8 points spanning at least 180 degrees.
SinSqFit fit_sin2(const std::vector<std::pair<double, double>>& scan);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;  // Pearson correlation
};

// Ordinary least squares; throws when fewer than 2 distinct x values.
LinearFit linear_fit(const std::vector<std::pair<double, double>>& pts);

// Camera pixels at least min_edge_distance_mm (object plane) away from
// every phase boundary of the mask, including its outer rim where the
// edge cells differ from the transparent surround. With
// within_pattern_only the mask is additionally clipped to the pattern
// extent (the far field counts as interior otherwise).
Grid2D<uint8_t> interior_mask(const ImageFrame& frame,
                              const pattern::PhasePattern& pat,
                              const optics::TelescopeConfig& tel,
                              double min_edge_distance_mm,
                              bool within_pattern_only = false);

struct LevelReport {
  double level_low = 0.0;    // mean corrected counts, dimmer class
  double level_high = 0.0;
  double contrast = 0.0;     // (high - low) / (high + low)
  double edge_width_mm = 0.0;  // 20% -> 80% transition distance, camera plane
  int n_low = 0, n_high = 0;   // interior pixels per class
};

// Two-level statistics of a corrected image: interior pixels (one blur FWHM
// away from any phase edge) grouped by the mask level under the telescope
// mapping. Throws when no interior pixels survive.
LevelReport level_report(const ImageFrame& corrected,
                         const pattern::PhasePattern& pat,
                         const optics::TelescopeConfig& tel);

struct InversionReport {
  double sum_max_abs_dev = 0.0;  // max |(A+B) - mean(A+B)| over interior
  double sum_mean = 0.0;
  double correlation = 0.0;      // Pearson of (A, B) over interior
};

// Complementarity of two frames taken at inverted settings. The optional
// mask restricts the statistics to interior pixels.
InversionReport inversion_check(const ImageFrame& a, const ImageFrame& b,
                                const Grid2D<uint8_t>* interior = nullptr);

// Width of the dark band a phase boundary leaves in a coherent image,
// averaged over boundaries: twice the RMS half-width of the normalized
// count deficit across the edge (robust on noisy profiles). Camera mm.
double edge_dip_width(const ImageFrame& image, const pattern::PhasePattern& pat,
                      const optics::TelescopeConfig& tel);

struct Chi2Flatness {
  double chi2 = 0.0;
  int dof = 0;
  double threshold95 = 0.0;
  bool pass = false;
};

// Tests raw - background == 0 against Poisson statistics after binning
// into bin_px x bin_px superpixels.
Chi2Flatness flatness_chi2(const ImageFrame& raw, const ImageFrame& background,
                           int bin_px);

// Upper quantile of the chi-squared distribution (Wilson-Hilferty).
double chi2_quantile(double p, int dof);

}  // namespace qci::analysis
