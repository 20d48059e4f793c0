#pragma once

#include <cstdint>
#include <string>

#include "qci/grid.hpp"

namespace qci {

struct FrameMeta {
  std::string setting;   // human-readable measurement setting
  std::string backend;   // "analytic" or "mc"
  uint64_t seed = 0;
  bool corrected = false;   // set after background subtraction
  bool mc_counts = false;   // counts are integer-valued draws
};

// Camera-plane count map. Values are expected counts in the analytic
// backend and integer photon counts in the Monte Carlo backend.
// Background-corrected frames may go negative; they are never clipped.
struct ImageFrame {
  Grid2D<double> counts;
  double exposure_s = 0.0;
  FrameMeta meta;

  double pixel_pitch_mm() const { return counts.pitch; }
  double total() const {
    double s = 0.0;
    for (double c : counts.cells) s += c;
    return s;
  }
};

}  // namespace qci
