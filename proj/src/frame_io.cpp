#include "qci/frame_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qci::frame_io {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

double frame_max(const ImageFrame& f) {
  double m = 0.0;
  for (double c : f.counts.cells) m = std::max(m, c);
  return m;
}

}  // namespace

std::string to_csv(const ImageFrame& frame) {
  std::ostringstream out;
  char buf[64];
  const auto& g = frame.counts;
  for (int iy = g.ny - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      std::snprintf(buf, sizeof buf, "%.17g", g.at(ix, iy));
      out << buf;
      if (ix + 1 < g.nx) out << ',';
    }
    out << '\n';
  }
  return out.str();
}

void write_csv(const ImageFrame& frame, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write frame CSV: " + path);
  out << to_csv(frame);
  require(out.good(), "error writing frame CSV: " + path);
}

void write_pgm16(const ImageFrame& frame, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write frame PGM: " + path);
  const auto& g = frame.counts;
  const double mx = frame_max(frame);
  const double scale = mx > 0.0 ? 65535.0 / mx : 0.0;
  out << "P5\n" << g.nx << " " << g.ny << "\n65535\n";
  for (int iy = g.ny - 1; iy >= 0; --iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const double v = std::clamp(g.at(ix, iy) * scale, 0.0, 65535.0);
      const unsigned u = unsigned(std::lround(v));
      out.put(char((u >> 8) & 0xff));
      out.put(char(u & 0xff));
    }
  require(out.good(), "error writing frame PGM: " + path);
}

void write_json_sidecar(const ImageFrame& frame, const std::string& path) {
  const double mx = frame_max(frame);
  double mn = frame.counts.cells.empty() ? 0.0 : frame.counts.cells.front();
  for (double c : frame.counts.cells) mn = std::min(mn, c);
  nlohmann::json j{
      {"width", frame.counts.nx},
      {"height", frame.counts.ny},
      {"pixel_pitch_mm", frame.pixel_pitch_mm()},
      {"exposure_s", frame.exposure_s},
      {"setting", frame.meta.setting},
      {"backend", frame.meta.backend},
      {"seed", frame.meta.seed},
      {"corrected", frame.meta.corrected},
      {"mc_counts", frame.meta.mc_counts},
      {"total_counts", frame.total()},
      {"min", mn},
      {"max", mx},
      {"pgm_scale", mx > 0.0 ? 65535.0 / mx : 0.0},
  };
  std::ofstream out(path);
  require(out.good(), "cannot write frame sidecar: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace qci::frame_io
