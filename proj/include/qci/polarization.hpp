#pragma once

#include <array>
#include <complex>
#include <functional>

namespace qci::polarization {

using Complex = std::complex<double>;

// Basis order of the two-photon polarization amplitudes: (photon-1, photon-2).
enum PairIndex : int { HH = 0, HV = 1, VH = 2, VV = 3 };

// Pure two-photon polarization state on {H,V} x {H,V}. Unit norm is an
// invariant of every constructor and transform in this module; equality of
// states is judged via |<a|b>| rather than component-wise, so global phases
// never matter.
struct TwoPhotonPolarizationState {
  std::array<Complex, 4> amps{};

  double norm_sq() const;
  double overlap_mag(const TwoPhotonPolarizationState& other) const;
};

enum class BellKind { PsiMinus, PsiPlus };

// (|HV> -+ |VH>)/sqrt(2)
TwoPhotonPolarizationState bell_state(BellKind kind);

// Polarizer pass-axis angle measured from the horizontal, in degrees.
// Projection outcomes are pi-periodic in the angle.
struct PolarizerAngle {
  double degrees = 0.0;

  double radians() const;
  PolarizerAngle normalized() const;  // folded into (-90, 90]
  PolarizerAngle perp() const { return PolarizerAngle{degrees + 90.0}; }
};

// Retardance of the displayed pattern at one position: the H component of
// photon-2 picks up exp(i*phi), the V component is untouched.
TwoPhotonPolarizationState apply_phase_imprint(const TwoPhotonPolarizationState& s,
                                               double phi);

// <d1|<d2|s> with |d> = cos(d)|H> + sin(d)|V>. The squared magnitude is the
// coincidence probability for a polarizer pair at (d1, d2).
Complex projection_amplitude(const TwoPhotonPolarizationState& s,
                             PolarizerAngle d1, PolarizerAngle d2);

// phi -> projection_amplitude(apply_phase_imprint(base, phi), d1, d2).
// Pure and deterministic; this is the per-pixel amplitude the imaging chain
// evaluates at the local pattern phase.
std::function<Complex(double)> conditional_phase_response(
    PolarizerAngle d1, PolarizerAngle d2, const TwoPhotonPolarizationState& base);

}  // namespace qci::polarization
