#include "qci/spatial.hpp"

#include <cmath>
#include <stdexcept>

namespace qci::spatial {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr int kGl = 8;
constexpr double kGlX[kGl] = {-0.9602898564975363, -0.7966664774136267,
                              -0.5255324099163290, -0.1834346424956498,
                              0.1834346424956498,  0.5255324099163290,
                              0.7966664774136267,  0.9602898564975363};
constexpr double kGlW[kGl] = {0.1012285362903763, 0.2223810344533745,
                              0.3137066458778873, 0.3626837833783620,
                              0.3626837833783620, 0.3137066458778873,
                              0.2223810344533745, 0.1012285362903763};

double gauss_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

double gauss_cdf(double x, double mean, double sigma) {
  return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0)));
}

struct AxisMoments {
  double var_s;  // variance of u + v
  double var_d;  // variance of u - v
};

// The sampling density per axis is the product of the two beam-envelope
// Gaussians (std a in transverse momentum) and the squared pair amplitude,
// which constrains the momentum sum to std 1/(sqrt(2) sigma). In the
// sum/difference coordinates the density factorizes exactly.
AxisMoments axis_moments(double sigma, double envelope_k_std) {
  const double a2 = envelope_k_std * envelope_k_std;
  const double tau2 = 1.0 / (2.0 * sigma * sigma);
  AxisMoments m;
  m.var_s = 2.0 * a2 * tau2 / (tau2 + 2.0 * a2);
  m.var_d = 2.0 * a2;
  return m;
}

AxisLaw make_axis_law(double sigma, double envelope_k_std, double k,
                      double d1, double d2, double mean1, double mean2) {
  const AxisMoments m = axis_moments(sigma, envelope_k_std);
  AxisLaw law;
  law.var_u = law.var_v = 0.25 * (m.var_s + m.var_d);
  law.cov_uv = 0.25 * (m.var_s - m.var_d);
  law.mean1 = mean1;
  law.mean2 = mean2;
  law.var1 = sigma * sigma + (d1 / k) * (d1 / k) * law.var_u;
  law.var2 = sigma * sigma + (d2 / k) * (d2 / k) * law.var_v;
  law.cov = sigma * sigma + (d1 * d2) / (k * k) * law.cov_uv;
  return law;
}

// Aperture-averaged conditional density along one axis, unnormalized:
// integral over the slit of pdf1(t) * N(x2; conditional mean(t), var).
double point_axis_density(double x2, const AxisLaw& ax, double center,
                          double halfwidth) {
  const double beta = ax.cov / ax.var1;
  const double cond_var = ax.var2 - ax.cov * ax.cov / ax.var1;
  double acc = 0.0;
  for (int i = 0; i < kGl; ++i) {
    const double t = center + halfwidth * kGlX[i];
    const double mc = ax.mean2 + beta * (t - ax.mean1);
    acc += kGlW[i] * gauss_pdf(t, ax.mean1, ax.var1) *
           gauss_pdf(x2, mc, cond_var);
  }
  return acc * halfwidth;
}

double point_axis_peak(const AxisLaw& ax, double center, double halfwidth) {
  const double beta = ax.cov / ax.var1;
  const double cond_sd = std::sqrt(ax.var2 - ax.cov * ax.cov / ax.var1);
  double lo = ax.mean2 + beta * (center - ax.mean1) - 4.0 * cond_sd;
  double hi = ax.mean2 + beta * (center - ax.mean1) + 4.0 * cond_sd;
  double best = 0.0;
  for (int round = 0; round < 3; ++round) {
    double best_x = lo;
    best = -1.0;
    const int n = 41;
    for (int i = 0; i < n; ++i) {
      const double x = lo + (hi - lo) * i / (n - 1);
      const double v = point_axis_density(x, ax, center, halfwidth);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    const double step = (hi - lo) / (n - 1);
    lo = best_x - step;
    hi = best_x + step;
  }
  return best;
}

}  // namespace

double SourceParams::wave_number() const {
  return 2.0 * M_PI / (lambda_photon_nm * 1e-6);
}

void SourceParams::validate() const {
  if (!(sigma_x > 0.0 && sigma_y > 0.0 && sigma_z > 0.0))
    throw std::invalid_argument("source sigmas must be > 0");
  if (!(lambda_photon_nm > 0.0))
    throw std::invalid_argument("lambda_photon_nm must be > 0");
  if (!(envelope_sigma > 0.0))
    throw std::invalid_argument("envelope_sigma must be > 0");
  if (!(envelope_sigma < 0.2 && std::abs(mean_axis_angle) < 0.5))
    throw std::invalid_argument("emission angles exceed the paraxial regime");
}

double pair_amplitude(const Vec3& k1, const Vec3& k2, const SourceParams& src) {
  const double k0 = src.wave_number();
  const double n1 = std::sqrt(k1.x * k1.x + k1.y * k1.y + k1.z * k1.z);
  const double n2 = std::sqrt(k2.x * k2.x + k2.y * k2.y + k2.z * k2.z);
  if (std::abs(n1 - k0) > 1e-9 * k0 || std::abs(n2 - k0) > 1e-9 * k0)
    throw std::invalid_argument(
        "pair_amplitude: wavevector magnitude does not match 2*pi/lambda");
  const double sx = (k1.x + k2.x) * src.sigma_x;
  const double sy = (k1.y + k2.y) * src.sigma_y;
  return std::exp(-0.5 * sx * sx) * std::exp(-0.5 * sy * sy);
}

PairLaw joint_position_law(const SourceParams& src, double d1_mm, double d2_mm) {
  src.validate();
  if (!(d1_mm > 0.0 && d2_mm > 0.0))
    throw std::invalid_argument("plane distances must be > 0");
  const double k = src.wave_number();
  const double a = k * src.envelope_sigma;
  const double tilt = std::tan(src.mean_axis_angle);
  PairLaw law;
  law.d1 = d1_mm;
  law.d2 = d2_mm;
  law.x = make_axis_law(src.sigma_x, a, k, d1_mm, d2_mm, -d1_mm * tilt,
                        d2_mm * tilt);
  law.y = make_axis_law(src.sigma_y, a, k, d1_mm, d2_mm, 0.0, 0.0);
  return law;
}

PhotonPairSample sample_pair(const SourceParams& src, double d1_mm,
                             double d2_mm, Rng& rng) {
  const double k = src.wave_number();
  const double a = k * src.envelope_sigma;
  const AxisMoments mx = axis_moments(src.sigma_x, a);
  const AxisMoments my = axis_moments(src.sigma_y, a);

  PhotonPairSample s;
  s.birth.x = rng.normal(0.0, src.sigma_x);
  s.birth.y = rng.normal(0.0, src.sigma_y);
  s.birth.z = rng.normal(0.0, src.sigma_z);

  const double sum_x = rng.normal(0.0, std::sqrt(mx.var_s));
  const double dif_x = rng.normal(0.0, std::sqrt(mx.var_d));
  const double sum_y = rng.normal(0.0, std::sqrt(my.var_s));
  const double dif_y = rng.normal(0.0, std::sqrt(my.var_d));

  const double u_x = 0.5 * (sum_x + dif_x), v_x = 0.5 * (sum_x - dif_x);
  const double u_y = 0.5 * (sum_y + dif_y), v_y = 0.5 * (sum_y - dif_y);

  const double kt = k * std::sin(src.mean_axis_angle);
  s.k1.x = -kt + u_x;
  s.k1.y = u_y;
  s.k1.z = -std::sqrt(k * k - s.k1.x * s.k1.x - s.k1.y * s.k1.y);
  s.k2.x = kt + v_x;
  s.k2.y = v_y;
  s.k2.z = std::sqrt(k * k - s.k2.x * s.k2.x - s.k2.y * s.k2.y);

  // Exact ballistic propagation from the birth point to each plane.
  const double t1 = (-d1_mm - s.birth.z);
  const double t2 = (d2_mm - s.birth.z);
  s.x1 = s.birth.x + s.k1.x / s.k1.z * t1;
  s.y1 = s.birth.y + s.k1.y / s.k1.z * t1;
  s.x2 = s.birth.x + s.k2.x / s.k2.z * t2;
  s.y2 = s.birth.y + s.k2.y / s.k2.z * t2;
  return s;
}

double photon2_joint_density(double x2_mm, double y2_mm,
                             const DetectionMode& mode, const PairLaw& law) {
  if (mode.kind == DetectionMode::Superposition) {
    return gauss_pdf(x2_mm, law.x.mean2, law.x.var2) *
           gauss_pdf(y2_mm, law.y.mean2, law.y.var2);
  }
  const double hw = 0.5 * mode.aperture_mm;
  return point_axis_density(x2_mm, law.x, mode.x01, hw) *
         point_axis_density(y2_mm, law.y, mode.y01, hw);
}

double conditional_photon2_density(double x2_mm, double y2_mm,
                                   const DetectionMode& mode,
                                   const PairLaw& law) {
  if (mode.kind == DetectionMode::Superposition) {
    const double dx = x2_mm - law.x.mean2;
    const double dy = y2_mm - law.y.mean2;
    return std::exp(-0.5 * dx * dx / law.x.var2 - 0.5 * dy * dy / law.y.var2);
  }
  const double hw = 0.5 * mode.aperture_mm;
  const double peak = point_axis_peak(law.x, mode.x01, hw) *
                      point_axis_peak(law.y, mode.y01, hw);
  return photon2_joint_density(x2_mm, y2_mm, mode, law) / peak;
}

double conditional_photon2_density(double x2_mm, double y2_mm,
                                   const DetectionMode& mode,
                                   const SourceParams& src, double d1_mm,
                                   double d2_mm) {
  return conditional_photon2_density(x2_mm, y2_mm, mode,
                                     joint_position_law(src, d1_mm, d2_mm));
}

double photon1_acceptance_fraction(const DetectionMode& mode,
                                   const PairLaw& law) {
  if (mode.kind == DetectionMode::Superposition) return 1.0;
  const double hw = 0.5 * mode.aperture_mm;
  const double sx = std::sqrt(law.x.var1);
  const double sy = std::sqrt(law.y.var1);
  const double fx = gauss_cdf(mode.x01 + hw, law.x.mean1, sx) -
                    gauss_cdf(mode.x01 - hw, law.x.mean1, sx);
  const double fy = gauss_cdf(mode.y01 + hw, law.y.mean1, sy) -
                    gauss_cdf(mode.y01 - hw, law.y.mean1, sy);
  return fx * fy;
}

}  // namespace qci::spatial
