#pragma once

#include <string>

#include "qci/frame.hpp"

namespace qci::frame_io {

// Exact values, one row per line from the top of the image, %.17g fields.
std::string to_csv(const ImageFrame& frame);
void write_csv(const ImageFrame& frame, const std::string& path);

// 16-bit PGM scaled to the frame maximum, negatives clipped; for viewing
// only, the CSV carries the exact values.
void write_pgm16(const ImageFrame& frame, const std::string& path);

// Metadata sidecar: geometry, exposure, setting, seed, backend, PGM scale.
void write_json_sidecar(const ImageFrame& frame, const std::string& path);

}  // namespace qci::frame_io
