#include "qci/polarization.hpp"

#include <cmath>

namespace qci::polarization {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

double TwoPhotonPolarizationState::norm_sq() const {
  double n = 0.0;
  for (const auto& a : amps) n += std::norm(a);
  return n;
}

double TwoPhotonPolarizationState::overlap_mag(
    const TwoPhotonPolarizationState& other) const {
  Complex dot = 0.0;
  for (int i = 0; i < 4; ++i) dot += std::conj(amps[i]) * other.amps[i];
  return std::abs(dot);
}

TwoPhotonPolarizationState bell_state(BellKind kind) {
  const double a = 1.0 / std::sqrt(2.0);
  TwoPhotonPolarizationState s;
  s.amps[HV] = a;
  s.amps[VH] = (kind == BellKind::PsiMinus) ? -a : a;
  return s;
}

double PolarizerAngle::radians() const { return degrees * kDegToRad; }

PolarizerAngle PolarizerAngle::normalized() const {
  double d = std::fmod(degrees, 180.0);
  if (d > 90.0) d -= 180.0;
  if (d <= -90.0) d += 180.0;
  return PolarizerAngle{d};
}

TwoPhotonPolarizationState apply_phase_imprint(
    const TwoPhotonPolarizationState& s, double phi) {
  const Complex f = std::polar(1.0, phi);
  TwoPhotonPolarizationState out = s;
  // Photon-2 is the H slot of the second index: HH and VH.
  out.amps[HH] *= f;
  out.amps[VH] *= f;
  return out;
}

Complex projection_amplitude(const TwoPhotonPolarizationState& s,
                             PolarizerAngle d1, PolarizerAngle d2) {
  const double c1 = std::cos(d1.radians()), s1 = std::sin(d1.radians());
  const double c2 = std::cos(d2.radians()), s2 = std::sin(d2.radians());
  return c1 * c2 * s.amps[HH] + c1 * s2 * s.amps[HV] +
         s1 * c2 * s.amps[VH] + s1 * s2 * s.amps[VV];
}

std::function<Complex(double)> conditional_phase_response(
    PolarizerAngle d1, PolarizerAngle d2,
    const TwoPhotonPolarizationState& base) {
  return [d1, d2, base](double phi) {
    return projection_amplitude(apply_phase_imprint(base, phi), d1, d2);
  };
}

}  // namespace qci::polarization
