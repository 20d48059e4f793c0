#pragma once

#include <string>

#include "qci/grid.hpp"

namespace qci::pattern {

// Phase mask displayed on the modulator: one retardance value (radians) per
// square cell, physical pitch in mm, grid centred on `origin`. Canonical
// masks are binary {0, pi}.
struct PhasePattern {
  Grid2D<double> cells;
  double origin_x = 0.0;
  double origin_y = 0.0;

  double extent_x() const { return cells.width(); }
  double extent_y() const { return cells.height(); }
};

// Alternating 0/pi squares, (0,0) cell = pi.
PhasePattern generate_checkerboard(double square_mm, int n_squares);

// Constant-phase mask (phase 0 gives the background reference).
PhasePattern generate_uniform(double square_mm, int n_squares, double phase_rad);

// Nested alternating square frames, outermost at pi. Approximate stand-in
// for a hand-drawn demo mask.
PhasePattern generate_frames(double square_mm, int n_squares);

struct GrayMapping {
  enum Kind { BinaryThreshold, Linear } kind = BinaryThreshold;
  int threshold = 128;  // gray >= threshold maps to pi in binary mode
};

// Reads a binary PGM (P5, maxval 255) or a plain CSV of radians. The gray
// mapping applies to PGM input only.
PhasePattern load_pattern(const std::string& path, double pitch_mm,
                          const GrayMapping& mapping = {});

// Writes PGM (0 -> gray 0, pi -> gray 255, linear in between) or CSV of
// radians, selected by file extension.
void save_pattern(const PhasePattern& p, const std::string& path);

// Nearest-cell lookup, lower-left inclusive at cell boundaries. Points
// outside the mask extent are transparent: phase 0.
double phase_at(const PhasePattern& p, double x_mm, double y_mm);

}  // namespace qci::pattern
