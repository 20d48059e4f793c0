#include "qci/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace qci::analysis {

namespace {

double fold_180(double deg) {
  double d = std::fmod(deg, 180.0);
  if (d < 0.0) d += 180.0;
  return d;
}

bool same_angle(double a_deg, double b_deg) {
  const double d = std::abs(fold_180(a_deg) - fold_180(b_deg));
  return d < 1e-6 || std::abs(d - 180.0) < 1e-6;
}

// Axis-aligned phase-boundary segment in object-plane coordinates.
struct EdgeSegment {
  bool vertical = false;
  double fixed = 0.0;   // x for vertical, y for horizontal
  double lo = 0.0, hi = 0.0;
};

std::vector<EdgeSegment> phase_edges(const pattern::PhasePattern& pat) {
  std::vector<EdgeSegment> segs;
  const auto& g = pat.cells;
  const double px = g.pitch;
  auto cell_x0 = [&](int ix) { return pat.origin_x + g.x(ix) - 0.5 * px; };
  auto cell_y0 = [&](int iy) { return pat.origin_y + g.y(iy) - 0.5 * px; };
  auto differs = [](double a, double b) { return std::abs(a - b) > 1e-9; };
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double phi = g.at(ix, iy);
      // Interior boundaries, counted once from the lower/left cell.
      if (ix + 1 < g.nx && differs(phi, g.at(ix + 1, iy)))
        segs.push_back({true, cell_x0(ix) + px, cell_y0(iy), cell_y0(iy) + px});
      if (iy + 1 < g.ny && differs(phi, g.at(ix, iy + 1)))
        segs.push_back({false, cell_y0(iy) + px, cell_x0(ix), cell_x0(ix) + px});
      // Rim against the transparent surround (phase 0).
      if (differs(phi, 0.0)) {
        if (ix == 0)
          segs.push_back({true, cell_x0(ix), cell_y0(iy), cell_y0(iy) + px});
        if (ix == g.nx - 1)
          segs.push_back({true, cell_x0(ix) + px, cell_y0(iy), cell_y0(iy) + px});
        if (iy == 0)
          segs.push_back({false, cell_y0(iy), cell_x0(ix), cell_x0(ix) + px});
        if (iy == g.ny - 1)
          segs.push_back({false, cell_y0(iy) + px, cell_x0(ix), cell_x0(ix) + px});
      }
    }
  }
  return segs;
}

double distance_to_segment(double x, double y, const EdgeSegment& s) {
  const double across = s.vertical ? x - s.fixed : y - s.fixed;
  const double along = s.vertical ? y : x;
  const double excess = std::max({0.0, s.lo - along, along - s.hi});
  return std::hypot(across, excess);
}

// Object-plane coordinate of a camera pixel under the telescope mapping.
struct CameraMap {
  double scale;  // signed demag
  double to_object(double cam) const { return cam / scale; }
};

CameraMap camera_map(const optics::TelescopeConfig& tel) {
  return CameraMap{tel.invert ? -tel.demag : tel.demag};
}

struct ProfileStats {
  std::vector<double> x;  // object-plane coordinate across the edge
  std::vector<double> v;  // mean counts
};

// Mean count profile across one boundary segment, averaged along its
// central span. Returns an empty profile when the window leaves the frame.
ProfileStats edge_profile(const ImageFrame& img, const EdgeSegment& seg,
                          const CameraMap& map, double window_mm) {
  ProfileStats p;
  const auto& g = img.counts;
  const double margin = 0.2 * (seg.hi - seg.lo);
  std::vector<double> sums;
  std::vector<int> counts;
  std::vector<double> xs;
  for (int i = 0; i < (seg.vertical ? g.nx : g.ny); ++i) {
    const double cam = seg.vertical ? g.x(i) : g.y(i);
    const double obj = map.to_object(cam);
    if (std::abs(obj - seg.fixed) <= window_mm) {
      xs.push_back(obj);
      sums.push_back(0.0);
      counts.push_back(0);
    }
  }
  if (xs.size() < 7) return p;
  int idx = 0;
  for (int i = 0; i < (seg.vertical ? g.nx : g.ny); ++i) {
    const double cam = seg.vertical ? g.x(i) : g.y(i);
    const double obj = map.to_object(cam);
    if (std::abs(obj - seg.fixed) > window_mm) continue;
    for (int j = 0; j < (seg.vertical ? g.ny : g.nx); ++j) {
      const double cam_along = seg.vertical ? g.y(j) : g.x(j);
      const double obj_along = map.to_object(cam_along);
      if (obj_along < seg.lo + margin || obj_along > seg.hi - margin) continue;
      sums[idx] += seg.vertical ? g.at(i, j) : g.at(j, i);
      counts[idx] += 1;
    }
    ++idx;
  }
  for (size_t i = 0; i < xs.size(); ++i) {
    if (counts[i] == 0) return ProfileStats{};
    p.x.push_back(xs[i]);
    p.v.push_back(sums[i] / counts[i]);
  }
  // Camera inversion can reverse the traversal order.
  std::vector<size_t> order(p.x.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return p.x[a] < p.x[b]; });
  ProfileStats sorted;
  for (size_t i : order) {
    sorted.x.push_back(p.x[i]);
    sorted.v.push_back(p.v[i]);
  }
  return sorted;
}

double plateau(const std::vector<double>& v, bool front) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += front ? v[i] : v[v.size() - 1 - i];
  return s / 3.0;
}

// 20% -> 80% transition distance of a monotone level change, object mm.
std::optional<double> transition_width(const ProfileStats& p) {
  const double la = plateau(p.v, true);
  const double lb = plateau(p.v, false);
  const double span = lb - la;
  if (std::abs(span) < 1e-12 * std::max(std::abs(la), std::abs(lb)) ||
      span == 0.0)
    return std::nullopt;
  auto cross = [&](double level) -> std::optional<double> {
    for (size_t i = 0; i + 1 < p.v.size(); ++i) {
      const double a = p.v[i], b = p.v[i + 1];
      if ((a - level) * (b - level) <= 0.0 && a != b) {
        const double t = (level - a) / (b - a);
        return p.x[i] + t * (p.x[i + 1] - p.x[i]);
      }
    }
    return std::nullopt;
  };
  const auto x20 = cross(la + 0.2 * span);
  const auto x80 = cross(la + 0.8 * span);
  if (!x20 || !x80) return std::nullopt;
  return std::abs(*x80 - *x20);
}

// Moment-based width of a count deficit: twice the RMS half-width of
// (baseline - profile), object mm.
std::optional<double> deficit_width(const ProfileStats& p) {
  const double base = 0.5 * (plateau(p.v, true) + plateau(p.v, false));
  if (base <= 0.0) return std::nullopt;
  double w_sum = 0.0, wx = 0.0, wxx = 0.0;
  for (size_t i = 0; i < p.v.size(); ++i) {
    const double d = std::max(0.0, base - p.v[i]);
    w_sum += d;
    wx += d * p.x[i];
    wxx += d * p.x[i] * p.x[i];
  }
  if (w_sum < 1e-6 * base) return std::nullopt;
  const double mean = wx / w_sum;
  const double var = std::max(0.0, wxx / w_sum - mean * mean);
  return 2.0 * std::sqrt(var);
}

double normal_quantile(double p) {
  // Acklam's rational approximation, good to ~1e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile requires p in (0, 1)");
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

void CorrelationTable::add(double d1_deg, double d2_deg, double counts) {
  if (counts < 0.0) throw std::invalid_argument("counts must be >= 0");
  rows.push_back({d1_deg, d2_deg, counts});
}

double CorrelationTable::counts_at(double d1_deg, double d2_deg) const {
  for (const auto& r : rows)
    if (same_angle(r.delta1_deg, d1_deg) && same_angle(r.delta2_deg, d2_deg))
      return r.counts;
  std::ostringstream os;
  os << "correlation table is missing the setting (" << d1_deg << ", "
     << d2_deg << ") deg";
  throw std::runtime_error(os.str());
}

double expectation_E(const CorrelationTable& t, double d1_deg, double d2_deg) {
  const double c_pp = t.counts_at(d1_deg, d2_deg);
  const double c_oo = t.counts_at(d1_deg + 90.0, d2_deg + 90.0);
  const double c_po = t.counts_at(d1_deg, d2_deg + 90.0);
  const double c_op = t.counts_at(d1_deg + 90.0, d2_deg);
  const double total = c_pp + c_oo + c_po + c_op;
  if (total <= 0.0) {
    std::ostringstream os;
    os << "expectation undefined at (" << d1_deg << ", " << d2_deg
       << ") deg: zero total counts";
    throw std::runtime_error(os.str());
  }
  return (c_pp + c_oo - c_po - c_op) / total;
}

ChshResult chsh_S(const CorrelationTable& t, const ChshAngles& a) {
  ChshResult r;
  r.e11 = expectation_E(t, a.d1, a.d2);
  r.e12 = expectation_E(t, a.d1, a.d2p);
  r.e21 = expectation_E(t, a.d1p, a.d2);
  r.e22 = expectation_E(t, a.d1p, a.d2p);
  r.S = r.e11 - r.e12 + r.e21 + r.e22;
  r.violates_classical = std::abs(r.S) > 2.0;
  return r;
}

SinSqFit fit_sin2(const std::vector<std::pair<double, double>>& scan) {
  if (scan.size() < 8)
    throw std::invalid_argument("fringe fit needs at least 8 scan points");
  double lo = scan.front().first, hi = scan.front().first;
  for (const auto& [d, _] : scan) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (hi - lo < 179.999)
    throw std::invalid_argument("fringe scan must span at least 180 degrees");

  // Linear least squares on the basis {1, cos 2d, sin 2d}.
  double m[3][3] = {};
  double rhs[3] = {};
  for (const auto& [deg, rate] : scan) {
    const double t = 2.0 * deg * M_PI / 180.0;
    const double basis[3] = {1.0, std::cos(t), std::sin(t)};
    for (int i = 0; i < 3; ++i) {
      rhs[i] += basis[i] * rate;
      for (int j = 0; j < 3; ++j) m[i][j] += basis[i] * basis[j];
    }
  }
  // 3x3 Gaussian elimination with partial pivoting.
  int piv[3] = {0, 1, 2};
  for (int c = 0; c < 3; ++c) {
    int best = c;
    for (int r2 = c + 1; r2 < 3; ++r2)
      if (std::abs(m[piv[r2]][c]) > std::abs(m[piv[best]][c])) best = r2;
    std::swap(piv[c], piv[best]);
    for (int r2 = c + 1; r2 < 3; ++r2) {
      const double f = m[piv[r2]][c] / m[piv[c]][c];
      for (int cc = c; cc < 3; ++cc) m[piv[r2]][cc] -= f * m[piv[c]][cc];
      rhs[piv[r2]] -= f * rhs[piv[c]];
    }
  }
  double coef[3];
  for (int c = 2; c >= 0; --c) {
    double s = rhs[piv[c]];
    for (int cc = c + 1; cc < 3; ++cc) s -= m[piv[c]][cc] * coef[cc];
    coef[c] = s / m[piv[c]][c];
  }

  SinSqFit fit;
  fit.mean_rate = coef[0];
  fit.amplitude = std::hypot(coef[1], coef[2]);
  const double psi = std::atan2(coef[2], coef[1]);
  // rate = mean + A cos(2d - psi); minimum at d = (psi + pi)/2.
  double min_deg = (psi + M_PI) * 0.5 * 180.0 / M_PI;
  min_deg = std::fmod(min_deg, 180.0);
  if (min_deg > 90.0) min_deg -= 180.0;
  if (min_deg <= -90.0) min_deg += 180.0;
  fit.phase_offset_deg = min_deg;

  double ss = 0.0;
  for (const auto& [deg, rate] : scan) {
    const double t = 2.0 * deg * M_PI / 180.0;
    const double model = coef[0] + coef[1] * std::cos(t) + coef[2] * std::sin(t);
    ss += (rate - model) * (rate - model);
  }
  fit.rms_residual = std::sqrt(ss / double(scan.size()));

  if (fit.amplitude < 1e-12 * std::max(1.0, std::abs(fit.mean_rate)) ||
      fit.mean_rate <= 0.0) {
    fit.visibility = 0.0;
    fit.degenerate = true;
  } else {
    fit.visibility = fit.amplitude / fit.mean_rate;
  }
  return fit;
}

LinearFit linear_fit(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2)
    throw std::invalid_argument("linear fit needs at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double n = double(pts.size());
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double var_x = sxx / n - (sx / n) * (sx / n);
  const double var_y = syy / n - (sy / n) * (sy / n);
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double scale = std::max(1e-300, sxx / n);
  if (var_x <= 1e-14 * scale)
    throw std::invalid_argument("linear fit: all x values identical");
  LinearFit f;
  f.slope = cov / var_x;
  f.intercept = sy / n - f.slope * sx / n;
  f.r = var_y > 0.0 ? cov / std::sqrt(var_x * var_y) : 0.0;
  return f;
}

Grid2D<uint8_t> interior_mask(const ImageFrame& frame,
                              const pattern::PhasePattern& pat,
                              const optics::TelescopeConfig& tel,
                              double min_edge_distance_mm,
                              bool within_pattern_only) {
  const auto segs = phase_edges(pat);
  const auto map = camera_map(tel);
  const auto& g = frame.counts;
  const double hx = 0.5 * pat.extent_x(), hy = 0.5 * pat.extent_y();
  Grid2D<uint8_t> mask(g.nx, g.ny, g.pitch, 1);
  for (int iy = 0; iy < g.ny; ++iy) {
    const double oy = map.to_object(g.y(iy));
    for (int ix = 0; ix < g.nx; ++ix) {
      const double ox = map.to_object(g.x(ix));
      if (within_pattern_only && (std::abs(ox - pat.origin_x) > hx ||
                                  std::abs(oy - pat.origin_y) > hy)) {
        mask.at(ix, iy) = 0;
        continue;
      }
      for (const auto& s : segs) {
        if (distance_to_segment(ox, oy, s) < min_edge_distance_mm) {
          mask.at(ix, iy) = 0;
          break;
        }
      }
    }
  }
  return mask;
}

LevelReport level_report(const ImageFrame& corrected,
                         const pattern::PhasePattern& pat,
                         const optics::TelescopeConfig& tel) {
  // Level statistics are defined over the mask area only.
  const auto mask = interior_mask(corrected, pat, tel, tel.resolution_fwhm, true);
  const auto map = camera_map(tel);
  const auto& g = corrected.counts;
  double sum0 = 0.0, sum_pi = 0.0;
  int n0 = 0, n_pi = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      if (!mask.at(ix, iy)) continue;
      const double phi =
          pattern::phase_at(pat, map.to_object(g.x(ix)), map.to_object(g.y(iy)));
      if (phi > M_PI_2) {
        sum_pi += g.at(ix, iy);
        ++n_pi;
      } else {
        sum0 += g.at(ix, iy);
        ++n0;
      }
    }
  if (n0 + n_pi == 0)
    throw std::runtime_error(
        "level report: no interior pixels (pattern finer than the blur)");
  LevelReport rep;
  const double m0 = n0 ? sum0 / n0 : 0.0;
  const double mp = n_pi ? sum_pi / n_pi : 0.0;
  if (n0 == 0 || n_pi == 0) {
    rep.level_low = rep.level_high = n0 ? m0 : mp;
    rep.contrast = 0.0;
  } else {
    rep.level_low = std::min(m0, mp);
    rep.level_high = std::max(m0, mp);
    const double denom = rep.level_high + rep.level_low;
    // Saturates at +-1: noise on sign-inverted corrected images can push
    // the raw ratio past full modulation.
    rep.contrast =
        denom != 0.0
            ? std::clamp((rep.level_high - rep.level_low) / denom, -1.0, 1.0)
            : 0.0;
  }
  rep.n_low = (m0 <= mp) ? n0 : n_pi;
  rep.n_high = (m0 <= mp) ? n_pi : n0;

  const double window = 0.45 * pat.cells.pitch;
  double w_sum = 0.0;
  int w_n = 0;
  for (const auto& seg : phase_edges(pat)) {
    const auto prof = edge_profile(corrected, seg, map, window);
    if (prof.x.empty()) continue;
    if (const auto w = transition_width(prof)) {
      w_sum += *w * tel.demag;  // object -> camera plane
      ++w_n;
    }
  }
  rep.edge_width_mm = w_n ? w_sum / w_n : 0.0;
  return rep;
}

InversionReport inversion_check(const ImageFrame& a, const ImageFrame& b,
                                const Grid2D<uint8_t>* interior) {
  if (a.counts.nx != b.counts.nx || a.counts.ny != b.counts.ny ||
      std::abs(a.counts.pitch - b.counts.pitch) > 1e-12 * a.counts.pitch)
    throw std::invalid_argument("inversion check: geometry mismatch");
  double sum_s = 0.0;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  long n = 0;
  for (int iy = 0; iy < a.counts.ny; ++iy)
    for (int ix = 0; ix < a.counts.nx; ++ix) {
      if (interior && !interior->at(ix, iy)) continue;
      const double va = a.counts.at(ix, iy);
      const double vb = b.counts.at(ix, iy);
      sum_s += va + vb;
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("inversion check: empty interior");
  InversionReport rep;
  rep.sum_mean = sum_s / double(n);
  double max_dev = 0.0;
  for (int iy = 0; iy < a.counts.ny; ++iy)
    for (int ix = 0; ix < a.counts.nx; ++ix) {
      if (interior && !interior->at(ix, iy)) continue;
      max_dev = std::max(
          max_dev,
          std::abs(a.counts.at(ix, iy) + b.counts.at(ix, iy) - rep.sum_mean));
    }
  rep.sum_max_abs_dev = max_dev;
  const double dn = double(n);
  const double var_a = saa / dn - (sa / dn) * (sa / dn);
  const double var_b = sbb / dn - (sb / dn) * (sb / dn);
  const double cov = sab / dn - (sa / dn) * (sb / dn);
  rep.correlation =
      (var_a > 0.0 && var_b > 0.0) ? cov / std::sqrt(var_a * var_b) : 0.0;
  return rep;
}

double edge_dip_width(const ImageFrame& image, const pattern::PhasePattern& pat,
                      const optics::TelescopeConfig& tel) {
  const auto map = camera_map(tel);
  const double window = 0.45 * pat.cells.pitch;
  double w_sum = 0.0;
  int w_n = 0;
  for (const auto& seg : phase_edges(pat)) {
    const auto prof = edge_profile(image, seg, map, window);
    if (prof.x.empty()) continue;
    if (const auto w = deficit_width(prof)) {
      w_sum += *w * tel.demag;
      ++w_n;
    }
  }
  if (w_n == 0)
    throw std::runtime_error("edge dip width: no measurable boundary profile");
  return w_sum / w_n;
}

Chi2Flatness flatness_chi2(const ImageFrame& raw, const ImageFrame& background,
                           int bin_px) {
  if (bin_px < 1) throw std::invalid_argument("bin_px must be >= 1");
  if (raw.counts.nx != background.counts.nx ||
      raw.counts.ny != background.counts.ny)
    throw std::invalid_argument("flatness test: geometry mismatch");
  Chi2Flatness out;
  for (int by = 0; by + bin_px <= raw.counts.ny; by += bin_px)
    for (int bx = 0; bx + bin_px <= raw.counts.nx; bx += bin_px) {
      double r = 0.0, b = 0.0;
      for (int iy = by; iy < by + bin_px; ++iy)
        for (int ix = bx; ix < bx + bin_px; ++ix) {
          r += raw.counts.at(ix, iy);
          b += background.counts.at(ix, iy);
        }
      if (r + b <= 0.0) continue;
      out.chi2 += (r - b) * (r - b) / (r + b);
      ++out.dof;
    }
  if (out.dof == 0) {
    out.pass = true;  // nothing detected anywhere: trivially flat
    return out;
  }
  out.threshold95 = chi2_quantile(0.95, out.dof);
  out.pass = out.chi2 <= out.threshold95;
  return out;
}

double chi2_quantile(double p, int dof) {
  if (dof < 1) throw std::invalid_argument("chi2 quantile: dof must be >= 1");
  const double z = normal_quantile(p);
  const double k = double(dof);
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace qci::analysis
