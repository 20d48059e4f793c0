#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace qci {

// Row-major 2D grid with a physical cell pitch. Coordinates are measured
// from the grid centre, so the middle cell of an odd-sized grid sits at
// (0, 0). Cell (ix, iy) owns the half-open square
// [x(ix) - pitch/2, x(ix) + pitch/2) x [y(iy) - pitch/2, y(iy) + pitch/2).
template <typename T>
struct Grid2D {
  int nx = 0, ny = 0;
  double pitch = 0.0;  // mm per cell
  std::vector<T> cells;

  Grid2D() = default;
  Grid2D(int nx_, int ny_, double pitch_, T fill = T{})
      : nx(nx_), ny(ny_), pitch(pitch_), cells(size_t(nx_) * size_t(ny_), fill) {}

  T& at(int ix, int iy) { return cells[size_t(iy) * nx + ix]; }
  const T& at(int ix, int iy) const { return cells[size_t(iy) * nx + ix]; }

  double x(int ix) const { return (ix - 0.5 * (nx - 1)) * pitch; }
  double y(int iy) const { return (iy - 0.5 * (ny - 1)) * pitch; }

  // Index of the cell owning the coordinate, lower edge inclusive.
  int ix_of(double x_mm) const { return int(std::floor(x_mm / pitch + 0.5 * nx)); }
  int iy_of(double y_mm) const { return int(std::floor(y_mm / pitch + 0.5 * ny)); }

  bool contains(int ix, int iy) const {
    return ix >= 0 && ix < nx && iy >= 0 && iy < ny;
  }

  double width() const { return nx * pitch; }
  double height() const { return ny * pitch; }
};

}  // namespace qci
