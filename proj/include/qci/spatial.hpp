#pragma once

#include "qci/rng.hpp"

namespace qci::spatial {

// Pair source geometry. Lengths in mm, angles in radians. Wavevectors are
// carried as k = 2*pi/lambda in rad/mm throughout, so momenta never need an
// explicit hbar.
struct SourceParams {
  double sigma_x = 0.1;   // emission region extent, mm
  double sigma_y = 0.1;
  double sigma_z = 0.1;
  double lambda_photon_nm = 810.0;
  double lambda_pump_nm = 405.0;   // bookkeeping only
  double mean_axis_angle = 0.0;    // tilt of the back-to-back emission axis, rad
  double envelope_sigma = 0.005;   // angular width of each beam envelope, rad

  double wave_number() const;      // rad/mm
  void validate() const;           // throws std::invalid_argument
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// One Monte Carlo draw. Photon-1 propagates toward -z and is evaluated in
// the plane z = -d1; photon-2 propagates toward +z, plane z = +d2. The
// transverse positions follow the wavevectors ballistically from the birth
// point, with no paraxial shortcut.
struct PhotonPairSample {
  Vec3 birth;       // creation point, mm
  Vec3 k1, k2;      // full wavevectors, rad/mm, |k| = 2*pi/lambda exactly
  double x1 = 0.0, y1 = 0.0;
  double x2 = 0.0, y2 = 0.0;
};

// Magnitude of the pair-creation amplitude for exact wavevectors: the
// product of transverse Gaussian factors exp(-((k1+k2) sigma)^2 / 2) per
// axis. The geometric 1/(r_a r_b) factor and the pure propagation phase are
// stripped (they do not affect observable count maps), and the longitudinal
// factor is held at its energy-conserving value.
// Throws if |k1| or |k2| deviates from 2*pi/lambda by more than 1e-9 relative.
double pair_amplitude(const Vec3& k1, const Vec3& k2, const SourceParams& src);

// Per-axis second moments of the position sampling law at the two planes,
// exposed for oracles and for the analytic conditional densities. Momentum
// deviations are u (photon-1) and v (photon-2) about the mean axes.
struct AxisLaw {
  double mean1 = 0.0, mean2 = 0.0;   // mean positions, mm
  double var1 = 0.0, var2 = 0.0;     // position variances, mm^2
  double cov = 0.0;                  // position cross-covariance, mm^2
  double var_u = 0.0, var_v = 0.0;   // transverse momentum variances, (rad/mm)^2
  double cov_uv = 0.0;
};

struct PairLaw {
  AxisLaw x, y;
  double d1 = 0.0, d2 = 0.0;  // mm
};

PairLaw joint_position_law(const SourceParams& src, double d1_mm, double d2_mm);

PhotonPairSample sample_pair(const SourceParams& src, double d1_mm, double d2_mm,
                             Rng& rng);

// Photon-1 detection mode: a lens summing over transverse position, or a
// small square aperture detector parked at (x01, y01).
struct DetectionMode {
  enum Kind { Superposition, Point } kind = Superposition;
  double x01 = 0.0, y01 = 0.0;
  double aperture_mm = 0.1;
};

// Spatial factor of the coincidence rate at the pattern plane, normalized
// to 1 at its peak. Superposition mode is the full photon-2 beam profile
// (every photon-1 position contributes); point mode is the partner density
// conditioned on photon-1 landing in the aperture.
double conditional_photon2_density(double x2_mm, double y2_mm,
                                   const DetectionMode& mode,
                                   const SourceParams& src, double d1_mm,
                                   double d2_mm);

// Same, with a precomputed law (used per grid cell by the imaging engine).
double conditional_photon2_density(double x2_mm, double y2_mm,
                                   const DetectionMode& mode,
                                   const PairLaw& law);

// Unnormalized joint density: photon-1 inside the aperture and photon-2 at
// (x2, y2). Integrates over the plane to the photon-1 acceptance fraction.
double photon2_joint_density(double x2_mm, double y2_mm,
                             const DetectionMode& mode, const PairLaw& law);

// Probability that photon-1 lands inside the detection aperture (1 in
// superposition mode).
double photon1_acceptance_fraction(const DetectionMode& mode, const PairLaw& law);

}  // namespace qci::spatial
