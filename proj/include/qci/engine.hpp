#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qci/analysis.hpp"
#include "qci/detection.hpp"
#include "qci/frame.hpp"
#include "qci/optics.hpp"
#include "qci/pattern.hpp"
#include "qci/polarization.hpp"
#include "qci/spatial.hpp"

namespace qci {

// Invalid configuration (file, field, or value). Maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qci

namespace qci::engine {

enum class Gate { Coincidence, Ungated };

// One measurement arrangement. A missing polarizer angle means the
// polarizer is removed from that arm. Ungated runs accumulate photon-2
// regardless of photon-1, so delta1 and the photon-1 mode cannot influence
// them (this is asserted by the no-signaling tests).
struct MeasurementSetting {
  std::optional<polarization::PolarizerAngle> delta1{
      polarization::PolarizerAngle{-45.0}};
  std::optional<polarization::PolarizerAngle> delta2{
      polarization::PolarizerAngle{-45.0}};
  spatial::DetectionMode photon1_mode;
  Gate gate = Gate::Coincidence;

  std::string describe() const;
};

enum class Backend { Analytic, MonteCarlo };

struct PatternSpec {
  enum Kind { Checkerboard, Uniform, Frames, File } kind = Checkerboard;
  double square_mm = 1.0;
  int n_squares = 4;
  double phase_rad = 0.0;  // Uniform only
  std::string file;
  double file_pitch_mm = 0.05;
  pattern::GrayMapping mapping;

  pattern::PhasePattern realize() const;  // throws ConfigError
};

struct GridSpec {
  double pitch_mm = 0.05;      // object-plane sampling
  double halfwidth_mm = 3.0;   // grid covers [-halfwidth, +halfwidth]
};

struct ExperimentConfig {
  spatial::SourceParams source;
  PatternSpec pattern;
  optics::TelescopeConfig telescope;
  detection::DetectorConfig detector;
  MeasurementSetting setting;
  double d1_m = 1.247;  // source to photon-1 detection plane
  double d2_m = 0.89;   // source to pattern plane
  GridSpec grid;
  Backend backend = Backend::Analytic;
  long long n_pairs = 1'000'000;   // emitted pairs per Monte Carlo run
  double exposure_s = 600.0;
  std::optional<uint64_t> seed;
  int workers = 1;

  double d1_mm() const { return d1_m * 1000.0; }
  double d2_mm() const { return d2_m * 1000.0; }
  void validate() const;  // throws ConfigError
};

struct ImagingResult {
  ImageFrame raw;
  ImageFrame background;
  ImageFrame corrected;
};

// Full imaging experiment: signal exposure, background exposure with the
// uniform zero-phase mask under the same setting, and the corrected
// difference. The analytic backend produces exact expected counts; the
// Monte Carlo backend draws photon pairs, applies the photon-1 acceptance
// and the locally blurred coincidence probability, and bins photon-2 camera
// hits, then adds accidental and dark counts.
ImagingResult run_imaging(const ExperimentConfig& cfg);

struct ChshRun {
  analysis::ChshAngles angles;
  analysis::CorrelationTable table;  // 16 settings
  analysis::ChshResult result;
  double n_per_setting = 0.0;
};

ChshRun run_chsh(const ExperimentConfig& cfg, const analysis::ChshAngles& angles);

struct FringePoint {
  double delta1_deg = 0.0;
  double counts = 0.0;
};

std::vector<FringePoint> run_fringe_scan(const ExperimentConfig& cfg,
                                         double delta2_deg,
                                         const std::vector<double>& delta1_sweep_deg);

enum class SlitOrientation { Horizontal, Vertical };

struct SlitPoint {
  double slit_pos_mm = 0.0;   // photon-1 plane
  double mean_cam_mm = 0.0;   // photon-2 camera plane
  double sem_mm = 0.0;
  long long n = 0;
};

struct SlitScan {
  std::vector<SlitPoint> points;
  analysis::LinearFit fit;
};

// Spatial-correlation scan: photon-1 behind a translated single slit (no
// polarizers, bare detectors), photon-2 position averaged on the camera.
// A horizontal slit scans the vertical axis and vice versa. Monte Carlo.
SlitScan run_slit_scan(const ExperimentConfig& cfg, SlitOrientation orientation,
                       const std::vector<double>& positions_mm,
                       double slit_width_mm = 0.8);

}  // namespace qci::engine
