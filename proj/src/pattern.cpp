#include "qci/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qci::pattern {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

// Skips PGM whitespace and '#' comments, keeping the byte offset current.
void skip_ws(std::istream& in, long& offset) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      while (c != '\n' && c != EOF) {
        in.get();
        ++offset;
        c = in.peek();
      }
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
      ++offset;
    } else {
      return;
    }
  }
}

long parse_pnm_int(std::istream& in, long& offset, const std::string& path,
                   const char* what) {
  skip_ws(in, offset);
  long v = 0;
  bool any = false;
  int c;
  while ((c = in.peek()) >= '0' && c <= '9') {
    in.get();
    ++offset;
    v = v * 10 + (c - '0');
    any = true;
  }
  if (!any) {
    std::ostringstream os;
    os << path << ": malformed PGM, expected " << what << " at byte offset "
       << offset;
    throw std::runtime_error(os.str());
  }
  return v;
}

PhasePattern from_gray(const std::vector<unsigned char>& gray, int w, int h,
                       double pitch_mm, const GrayMapping& mapping) {
  PhasePattern p;
  p.cells = Grid2D<double>(w, h, pitch_mm);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      // Raster row 0 is the top of the image.
      const unsigned char g = gray[size_t(h - 1 - iy) * w + ix];
      double phi;
      if (mapping.kind == GrayMapping::BinaryThreshold)
        phi = (g >= mapping.threshold) ? M_PI : 0.0;
      else
        phi = M_PI * double(g) / 255.0;
      p.cells.at(ix, iy) = phi;
    }
  }
  return p;
}

PhasePattern load_pgm(const std::string& path, double pitch_mm,
                      const GrayMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open pattern file: " + path);
  long offset = 0;
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  offset += 2;
  require(m0 == 'P' && m1 == '5',
          path + ": malformed PGM, missing P5 magic at byte offset 0");
  const long w = parse_pnm_int(in, offset, path, "width");
  const long h = parse_pnm_int(in, offset, path, "height");
  const long maxval = parse_pnm_int(in, offset, path, "maxval");
  require(w > 0 && h > 0, path + ": malformed PGM, empty raster");
  require(maxval == 255, path + ": unsupported PGM maxval (expected 255)");
  in.get();  // single whitespace after maxval
  ++offset;
  std::vector<unsigned char> gray(size_t(w) * h);
  in.read(reinterpret_cast<char*>(gray.data()), std::streamsize(gray.size()));
  if (in.gcount() != std::streamsize(gray.size())) {
    std::ostringstream os;
    os << path << ": malformed PGM, pixel data truncated at byte offset "
       << offset + in.gcount();
    throw std::runtime_error(os.str());
  }
  return from_gray(gray, int(w), int(h), pitch_mm, mapping);
}

PhasePattern load_csv(const std::string& path, double pitch_mm) {
  std::ifstream in(path);
  require(in.good(), "cannot open pattern file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        std::ostringstream os;
        os << path << ": bad number '" << tok << "' on line " << lineno;
        throw std::runtime_error(os.str());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ": ragged CSV rows");
    rows.push_back(std::move(row));
  }
  require(!rows.empty() && !rows.front().empty(), path + ": empty pattern CSV");
  const int h = int(rows.size());
  const int w = int(rows.front().size());
  PhasePattern p;
  p.cells = Grid2D<double>(w, h, pitch_mm);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix) {
      const double v = rows[size_t(h - 1 - iy)][size_t(ix)];
      require(std::isfinite(v), path + ": non-finite phase value");
      p.cells.at(ix, iy) = v;
    }
  return p;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

PhasePattern generate_checkerboard(double square_mm, int n_squares) {
  if (square_mm <= 0.0) throw std::invalid_argument("square_mm must be > 0");
  if (n_squares < 1) throw std::invalid_argument("n_squares must be >= 1");
  PhasePattern p;
  p.cells = Grid2D<double>(n_squares, n_squares, square_mm);
  for (int iy = 0; iy < n_squares; ++iy)
    for (int ix = 0; ix < n_squares; ++ix)
      p.cells.at(ix, iy) = ((ix + iy) % 2 == 0) ? M_PI : 0.0;
  return p;
}

PhasePattern generate_uniform(double square_mm, int n_squares, double phase_rad) {
  if (square_mm <= 0.0) throw std::invalid_argument("square_mm must be > 0");
  if (n_squares < 1) throw std::invalid_argument("n_squares must be >= 1");
  PhasePattern p;
  p.cells = Grid2D<double>(n_squares, n_squares, square_mm, phase_rad);
  return p;
}

PhasePattern generate_frames(double square_mm, int n_squares) {
  if (square_mm <= 0.0) throw std::invalid_argument("square_mm must be > 0");
  if (n_squares < 1) throw std::invalid_argument("n_squares must be >= 1");
  PhasePattern p;
  p.cells = Grid2D<double>(n_squares, n_squares, square_mm);
  for (int iy = 0; iy < n_squares; ++iy)
    for (int ix = 0; ix < n_squares; ++ix) {
      const int ring = std::min(std::min(ix, iy),
                                std::min(n_squares - 1 - ix, n_squares - 1 - iy));
      p.cells.at(ix, iy) = (ring % 2 == 0) ? M_PI : 0.0;
    }
  return p;
}

PhasePattern load_pattern(const std::string& path, double pitch_mm,
                          const GrayMapping& mapping) {
  if (pitch_mm <= 0.0)
    throw std::invalid_argument("pattern pitch must be > 0 (got " +
                                std::to_string(pitch_mm) + ")");
  if (ends_with(path, ".csv")) return load_csv(path, pitch_mm);
  return load_pgm(path, pitch_mm, mapping);
}

void save_pattern(const PhasePattern& p, const std::string& path) {
  const int w = p.cells.nx, h = p.cells.ny;
  if (ends_with(path, ".csv")) {
    std::ofstream out(path);
    require(out.good(), "cannot write pattern file: " + path);
    char buf[64];
    for (int iy = h - 1; iy >= 0; --iy) {
      for (int ix = 0; ix < w; ++ix) {
        std::snprintf(buf, sizeof buf, "%.17g", p.cells.at(ix, iy));
        out << buf;
        if (ix + 1 < w) out << ',';
      }
      out << '\n';
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write pattern file: " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  for (int iy = h - 1; iy >= 0; --iy)
    for (int ix = 0; ix < w; ++ix) {
      double g = p.cells.at(ix, iy) / M_PI * 255.0;
      g = std::clamp(g, 0.0, 255.0);
      out.put(char(std::lround(g)));
    }
}

double phase_at(const PhasePattern& p, double x_mm, double y_mm) {
  if (p.cells.nx == 0 || p.cells.ny == 0) return 0.0;
  const int ix = p.cells.ix_of(x_mm - p.origin_x);
  const int iy = p.cells.iy_of(y_mm - p.origin_y);
  if (!p.cells.contains(ix, iy)) return 0.0;
  return p.cells.at(ix, iy);
}

}  // namespace qci::pattern
