#include "qci/engine.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

namespace qci::engine {

namespace {

using polarization::PolarizerAngle;
using polarization::TwoPhotonPolarizationState;

constexpr uint64_t kTagSignal = 0x51ULL << 56;
constexpr uint64_t kTagBackground = 0x52ULL << 56;
constexpr uint64_t kTagNoiseRaw = 0x53ULL << 56;
constexpr uint64_t kTagNoiseBg = 0x54ULL << 56;
constexpr uint64_t kTagChsh = 0x55ULL << 56;
constexpr uint64_t kTagFringe = 0x56ULL << 56;
constexpr uint64_t kTagSlit = 0x57ULL << 56;
constexpr long long kChunkPairs = 1 << 16;

// Photon-1 / photon-2 polarizer outcome branches contributing to the
// accumulated image. A present polarizer keeps one branch (the orthogonal
// photon is absorbed); a removed polarizer or an ungated run sums both
// orthogonal outcomes incoherently.
struct BranchSet {
  std::vector<PolarizerAngle> b1, b2;
};

BranchSet branch_set(const MeasurementSetting& s) {
  BranchSet bs;
  if (s.delta1 && s.gate == Gate::Coincidence) {
    bs.b1 = {*s.delta1};
  } else if (s.delta1) {
    bs.b1 = {*s.delta1, s.delta1->perp()};
  } else {
    bs.b1 = {PolarizerAngle{0.0}, PolarizerAngle{90.0}};
  }
  if (s.delta2)
    bs.b2 = {*s.delta2};
  else
    bs.b2 = {PolarizerAngle{0.0}, PolarizerAngle{90.0}};
  return bs;
}

Grid2D<double> object_grid(const GridSpec& gs) {
  const int half = int(std::llround(gs.halfwidth_mm / gs.pitch_mm));
  const int n = 2 * half + 1;
  return Grid2D<double>(n, n, gs.pitch_mm);
}

// Everything run_imaging needs per exposure, on the object-plane grid:
// where photon-2 lands (g) and the probability that a landed pair is
// accepted as a coincidence there (p_acc), with diffraction folded in.
struct Scene {
  Grid2D<double> g;      // landing density, mm^-2 (aperture-weighted)
  Grid2D<double> p_acc;  // in [0, 1]
};

Grid2D<double> blur_field_intensity(const Grid2D<std::complex<double>>& field,
                                    const optics::TelescopeConfig& tel,
                                    const Grid2D<double>& kernel) {
  Grid2D<double> out(field.nx, field.ny, field.pitch);
  if (tel.psf == optics::PsfKind::None) {
    for (size_t i = 0; i < out.cells.size(); ++i)
      out.cells[i] = std::norm(field.cells[i]);
    return out;
  }
  if (tel.coherent) {
    const auto blurred = optics::convolve_same(field, kernel);
    for (size_t i = 0; i < out.cells.size(); ++i)
      out.cells[i] = std::norm(blurred.cells[i]);
    return out;
  }
  Grid2D<double> intensity(field.nx, field.ny, field.pitch);
  for (size_t i = 0; i < intensity.cells.size(); ++i)
    intensity.cells[i] = std::norm(field.cells[i]);
  return optics::blur_intensity(intensity, tel);
}

Scene build_scene(const ExperimentConfig& cfg,
                  const pattern::PhasePattern& pat) {
  const auto law =
      spatial::joint_position_law(cfg.source, cfg.d1_mm(), cfg.d2_mm());
  const bool gated = cfg.setting.gate == Gate::Coincidence;
  spatial::DetectionMode mode = cfg.setting.photon1_mode;
  if (!gated) mode = spatial::DetectionMode{};  // marginal beam profile

  Scene sc;
  sc.g = object_grid(cfg.grid);
  double gmax = 0.0;
  for (int iy = 0; iy < sc.g.ny; ++iy)
    for (int ix = 0; ix < sc.g.nx; ++ix) {
      const double v =
          spatial::photon2_joint_density(sc.g.x(ix), sc.g.y(iy), mode, law);
      sc.g.at(ix, iy) = v;
      gmax = std::max(gmax, v);
    }
  if (gmax <= 0.0)
    throw ConfigError("photon-2 density vanishes on the camera grid");

  Grid2D<std::complex<double>> sqrt_env(sc.g.nx, sc.g.ny, sc.g.pitch);
  for (size_t i = 0; i < sqrt_env.cells.size(); ++i)
    sqrt_env.cells[i] = std::sqrt(sc.g.cells[i] / gmax);

  const auto kernel = optics::coherent_psf(cfg.telescope, cfg.grid.pitch_mm);
  const auto env_blur = blur_field_intensity(sqrt_env, cfg.telescope, kernel);

  const auto bs = branch_set(cfg.setting);
  Grid2D<double> signal(sc.g.nx, sc.g.ny, sc.g.pitch);
  const auto base = polarization::bell_state(polarization::BellKind::PsiMinus);
  for (const auto& b1 : bs.b1) {
    for (const auto& b2 : bs.b2) {
      const auto response = polarization::conditional_phase_response(b1, b2, base);
      Grid2D<std::complex<double>> field(sc.g.nx, sc.g.ny, sc.g.pitch);
      for (int iy = 0; iy < sc.g.ny; ++iy)
        for (int ix = 0; ix < sc.g.nx; ++ix)
          field.at(ix, iy) =
              response(pattern::phase_at(pat, sc.g.x(ix), sc.g.y(iy))) *
              sqrt_env.at(ix, iy).real();
      const auto ib = blur_field_intensity(field, cfg.telescope, kernel);
      for (size_t i = 0; i < signal.cells.size(); ++i)
        signal.cells[i] += ib.cells[i];
    }
  }

  const double v = cfg.detector.visibility;
  const double n_branches = double(bs.b1.size() * bs.b2.size());
  sc.p_acc = Grid2D<double>(sc.g.nx, sc.g.ny, sc.g.pitch);
  for (size_t i = 0; i < sc.p_acc.cells.size(); ++i) {
    const double eb = env_blur.cells[i];
    if (eb <= 1e-300) {
      sc.p_acc.cells[i] = 0.0;
      continue;
    }
    const double p =
        (v * signal.cells[i] + n_branches * 0.25 * (1.0 - v) * eb) / eb;
    sc.p_acc.cells[i] = std::clamp(p, 0.0, 1.0);
  }
  return sc;
}

// Object-plane grid -> camera frame: pitch scales by demag, 180 degree
// rotation when the telescope inverts.
Grid2D<double> to_camera(const Grid2D<double>& obj,
                         const optics::TelescopeConfig& tel) {
  Grid2D<double> cam(obj.nx, obj.ny, obj.pitch * tel.demag);
  for (int iy = 0; iy < obj.ny; ++iy)
    for (int ix = 0; ix < obj.nx; ++ix) {
      const int ox = tel.invert ? obj.nx - 1 - ix : ix;
      const int oy = tel.invert ? obj.ny - 1 - iy : iy;
      cam.at(ox, oy) = obj.at(ix, iy);
    }
  return cam;
}

void parallel_chunks(long long n_chunks, int workers,
                     const std::function<void(long long, int)>& fn) {
  if (workers <= 1) {
    for (long long c = 0; c < n_chunks; ++c) fn(c, 0);
    return;
  }
  std::atomic<long long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const long long c = next.fetch_add(1);
        if (c >= n_chunks) break;
        fn(c, w);
      }
    });
  }
  for (auto& t : pool) t.join();
}

Grid2D<double> mc_signal_image(const ExperimentConfig& cfg, const Scene& sc,
                               uint64_t tag) {
  const bool gated = cfg.setting.gate == Gate::Coincidence;
  const long long n_chunks = (cfg.n_pairs + kChunkPairs - 1) / kChunkPairs;
  std::vector<Grid2D<long long>> local(
      size_t(std::max(1, cfg.workers)),
      Grid2D<long long>(sc.g.nx, sc.g.ny, sc.g.pitch));

  parallel_chunks(n_chunks, cfg.workers, [&](long long chunk, int worker) {
    Rng rng = Rng::derive(*cfg.seed, tag | uint64_t(chunk));
    const long long first = chunk * kChunkPairs;
    const long long count = std::min(kChunkPairs, cfg.n_pairs - first);
    auto& frame = local[size_t(worker)];
    for (long long i = 0; i < count; ++i) {
      const auto s =
          spatial::sample_pair(cfg.source, cfg.d1_mm(), cfg.d2_mm(), rng);
      const int ix = frame.ix_of(s.x2);
      const int iy = frame.iy_of(s.y2);
      if (!frame.contains(ix, iy)) continue;
      if (gated && optics::photon1_superposition_acceptance(
                       cfg.setting.photon1_mode, s.x1, s.y1) <= 0.0)
        continue;
      if (rng.uniform() < sc.p_acc.at(ix, iy)) frame.at(ix, iy) += 1;
    }
  });

  Grid2D<double> out(sc.g.nx, sc.g.ny, sc.g.pitch);
  for (const auto& frame : local)
    for (size_t i = 0; i < out.cells.size(); ++i)
      out.cells[i] += double(frame.cells[i]);
  return out;
}

struct RunScales {
  double n_emitted = 0.0;
  double exposure_equiv_s = 0.0;
  double accidental_px = 0.0;  // expected counts per pixel
  double dark_px = 0.0;
};

RunScales run_scales(const ExperimentConfig& cfg) {
  const auto law =
      spatial::joint_position_law(cfg.source, cfg.d1_mm(), cfg.d2_mm());
  const auto grid = object_grid(cfg.grid);
  const spatial::DetectionMode lens{};
  double g_ref = 0.0;  // fraction of emitted pairs landing on the grid
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix)
      g_ref += spatial::photon2_joint_density(grid.x(ix), grid.y(iy), lens, law);
  g_ref *= grid.pitch * grid.pitch;

  RunScales s;
  if (cfg.backend == Backend::MonteCarlo || cfg.exposure_s <= 0.0) {
    // Analytic runs with zero exposure normalize by n_pairs, which makes
    // them directly comparable with a Monte Carlo run of the same size.
    s.n_emitted = double(cfg.n_pairs);
    s.exposure_equiv_s =
        s.n_emitted * g_ref * 0.5 / cfg.detector.pair_rate_hz;
  } else {
    s.exposure_equiv_s = cfg.exposure_s;
    s.n_emitted =
        2.0 * cfg.detector.pair_rate_hz * cfg.exposure_s / std::max(g_ref, 1e-300);
  }
  // The reference detected total (bright diagonal level, probability 1/2)
  // fixes the uniform accidental background.
  const double ref_detected = s.n_emitted * g_ref * 0.5;
  const double n_px = double(grid.nx) * double(grid.ny);
  s.accidental_px = ref_detected / (cfg.detector.accidental_ratio * n_px);
  s.dark_px = cfg.detector.dark_rate_hz_per_px * s.exposure_equiv_s;
  return s;
}

ImageFrame finish_frame(Grid2D<double> cam, const ExperimentConfig& cfg,
                        const RunScales& scales, bool mc, uint64_t noise_tag) {
  if (mc) {
    const double extra = scales.accidental_px + scales.dark_px;
    if (extra > 0.0) {
      Rng rng = Rng::derive(*cfg.seed, noise_tag);
      for (auto& c : cam.cells) c += double(rng.poisson(extra));
    }
  } else {
    for (auto& c : cam.cells) c += scales.accidental_px + scales.dark_px;
  }
  ImageFrame f;
  f.counts = std::move(cam);
  f.exposure_s = scales.exposure_equiv_s;
  f.meta.setting = cfg.setting.describe();
  f.meta.backend = mc ? "mc" : "analytic";
  f.meta.seed = cfg.seed.value_or(0);
  f.meta.mc_counts = mc;
  return f;
}

ImageFrame expose(const ExperimentConfig& cfg, const pattern::PhasePattern& pat,
                  const RunScales& scales, uint64_t signal_tag,
                  uint64_t noise_tag) {
  const Scene sc = build_scene(cfg, pat);
  Grid2D<double> obj(sc.g.nx, sc.g.ny, sc.g.pitch);
  const bool mc = cfg.backend == Backend::MonteCarlo;
  if (mc) {
    obj = mc_signal_image(cfg, sc, signal_tag);
  } else {
    const double area = sc.g.pitch * sc.g.pitch;
    for (size_t i = 0; i < obj.cells.size(); ++i)
      obj.cells[i] =
          scales.n_emitted * area * sc.g.cells[i] * sc.p_acc.cells[i];
  }
  return finish_frame(to_camera(obj, cfg.telescope), cfg, scales, mc, noise_tag);
}

double coincidence_probability(const ExperimentConfig& cfg, PolarizerAngle d1,
                               PolarizerAngle d2) {
  const auto psi = polarization::bell_state(polarization::BellKind::PsiMinus);
  const double p = std::norm(polarization::projection_amplitude(psi, d1, d2));
  return detection::apply_visibility(p, cfg.detector.visibility);
}

}  // namespace

std::string MeasurementSetting::describe() const {
  std::ostringstream os;
  os << "delta1=";
  if (delta1)
    os << delta1->degrees << "deg";
  else
    os << "absent";
  os << " delta2=";
  if (delta2)
    os << delta2->degrees << "deg";
  else
    os << "absent";
  os << " photon1=";
  if (photon1_mode.kind == spatial::DetectionMode::Superposition)
    os << "superposition";
  else
    os << "point(" << photon1_mode.x01 << "," << photon1_mode.y01 << ",a="
       << photon1_mode.aperture_mm << ")";
  os << " gate=" << (gate == Gate::Coincidence ? "coincidence" : "ungated");
  return os.str();
}

pattern::PhasePattern PatternSpec::realize() const {
  try {
    switch (kind) {
      case Checkerboard:
        return pattern::generate_checkerboard(square_mm, n_squares);
      case Uniform:
        return pattern::generate_uniform(square_mm, n_squares, phase_rad);
      case Frames:
        return pattern::generate_frames(square_mm, n_squares);
      case File:
        return pattern::load_pattern(file, file_pitch_mm, mapping);
    }
  } catch (const std::exception& e) {
    throw ConfigError(std::string("pattern: ") + e.what());
  }
  throw ConfigError("pattern: unknown kind");
}

void ExperimentConfig::validate() const {
  try {
    source.validate();
    telescope.validate();
    detector.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(d1_m > 0.0)) throw ConfigError("geometry: d1_m must be > 0");
  if (!(d2_m > 0.0)) throw ConfigError("geometry: d2_m must be > 0");
  if (!(grid.pitch_mm > 0.0)) throw ConfigError("grid: pitch_mm must be > 0");
  if (grid.halfwidth_mm < grid.pitch_mm)
    throw ConfigError("grid: halfwidth_mm must be at least one pitch");
  if (telescope.psf != optics::PsfKind::None &&
      grid.pitch_mm >= telescope.resolution_fwhm / 3.0) {
    std::ostringstream os;
    os << "grid: pitch_mm " << grid.pitch_mm
       << " undersamples the blur kernel; need pitch below resolution_fwhm/3 = "
       << telescope.resolution_fwhm / 3.0;
    throw ConfigError(os.str());
  }
  if (workers < 1) throw ConfigError("backend: workers must be >= 1");
  if (backend == Backend::MonteCarlo) {
    if (n_pairs < 1) throw ConfigError("backend: n_pairs must be >= 1");
    if (!seed)
      throw ConfigError(
          "backend: the Monte Carlo backend requires an explicit seed");
  }
  if (exposure_s < 0.0) throw ConfigError("backend: exposure_s must be >= 0");
}

ImagingResult run_imaging(const ExperimentConfig& cfg) {
  cfg.validate();
  const pattern::PhasePattern pat = cfg.pattern.realize();
  const pattern::PhasePattern flat;  // zero phase everywhere
  const RunScales scales = run_scales(cfg);

  ImagingResult res;
  res.raw = expose(cfg, pat, scales, kTagSignal, kTagNoiseRaw);
  res.background = expose(cfg, flat, scales, kTagBackground, kTagNoiseBg);
  res.background.meta.setting += " [background]";
  res.corrected = detection::subtract_background(res.raw, res.background);
  return res;
}

ChshRun run_chsh(const ExperimentConfig& cfg,
                 const analysis::ChshAngles& angles) {
  cfg.validate();
  ChshRun run;
  run.angles = angles;
  const double n_set = cfg.backend == Backend::MonteCarlo
                           ? double(cfg.n_pairs)
                           : 2.0 * cfg.detector.pair_rate_hz * cfg.exposure_s;
  run.n_per_setting = n_set;

  std::vector<std::pair<double, double>> settings;
  auto add_unique = [&](double a, double b) {
    for (const auto& [x, y] : settings)
      if (std::abs(x - a) < 1e-9 && std::abs(y - b) < 1e-9) return;
    settings.emplace_back(a, b);
  };
  const double a1[2] = {angles.d1, angles.d1p};
  const double a2[2] = {angles.d2, angles.d2p};
  for (double d1 : a1)
    for (double d2 : a2) {
      add_unique(d1, d2);
      add_unique(d1 + 90.0, d2 + 90.0);
      add_unique(d1, d2 + 90.0);
      add_unique(d1 + 90.0, d2);
    }

  for (size_t i = 0; i < settings.size(); ++i) {
    const auto& [d1, d2] = settings[i];
    const double p =
        coincidence_probability(cfg, PolarizerAngle{d1}, PolarizerAngle{d2});
    double counts;
    if (cfg.backend == Backend::MonteCarlo) {
      Rng rng = Rng::derive(*cfg.seed, kTagChsh | uint64_t(i));
      counts = double(rng.binomial(cfg.n_pairs, p));
    } else {
      counts = n_set * p;
    }
    run.table.add(d1, d2, counts);
  }
  run.result = analysis::chsh_S(run.table, angles);
  return run;
}

std::vector<FringePoint> run_fringe_scan(
    const ExperimentConfig& cfg, double delta2_deg,
    const std::vector<double>& delta1_sweep_deg) {
  cfg.validate();
  const double n_set = cfg.backend == Backend::MonteCarlo
                           ? double(cfg.n_pairs)
                           : 2.0 * cfg.detector.pair_rate_hz * cfg.exposure_s;
  std::vector<FringePoint> out;
  out.reserve(delta1_sweep_deg.size());
  for (size_t i = 0; i < delta1_sweep_deg.size(); ++i) {
    const double d1 = delta1_sweep_deg[i];
    const double p = coincidence_probability(cfg, PolarizerAngle{d1},
                                             PolarizerAngle{delta2_deg});
    double counts;
    if (cfg.backend == Backend::MonteCarlo) {
      Rng rng = Rng::derive(*cfg.seed, kTagFringe | uint64_t(i));
      counts = double(rng.binomial(cfg.n_pairs, p));
    } else {
      counts = n_set * p;
    }
    out.push_back({d1, counts});
  }
  return out;
}

SlitScan run_slit_scan(const ExperimentConfig& cfg,
                       SlitOrientation orientation,
                       const std::vector<double>& positions_mm,
                       double slit_width_mm) {
  cfg.validate();
  if (cfg.backend != Backend::MonteCarlo)
    throw ConfigError("slit-scan runs require the Monte Carlo backend");
  if (positions_mm.empty()) throw ConfigError("slit-scan: no positions given");
  if (!(slit_width_mm > 0.0))
    throw ConfigError("slit-scan: slit width must be > 0");

  // Polarizers are removed for this measurement; photon-1 detection is the
  // slit itself, so the configured photon-1 mode is not used.
  const double flip = cfg.telescope.invert ? -1.0 : 1.0;
  const double scale = flip * cfg.telescope.demag;
  const bool horizontal = orientation == SlitOrientation::Horizontal;

  SlitScan scan;
  struct Partial {
    double sum = 0.0, sum2 = 0.0;
    long long n = 0;
  };
  const long long n_chunks = (cfg.n_pairs + kChunkPairs - 1) / kChunkPairs;

  for (size_t pi = 0; pi < positions_mm.size(); ++pi) {
    const double pos = positions_mm[pi];
    std::vector<Partial> partials(static_cast<size_t>(n_chunks));
    parallel_chunks(n_chunks, cfg.workers, [&](long long chunk, int) {
      Rng rng =
          Rng::derive(*cfg.seed, kTagSlit | (uint64_t(pi) << 32) | uint64_t(chunk));
      const long long first = chunk * kChunkPairs;
      const long long count = std::min(kChunkPairs, cfg.n_pairs - first);
      Partial p;
      for (long long i = 0; i < count; ++i) {
        const auto s =
            spatial::sample_pair(cfg.source, cfg.d1_mm(), cfg.d2_mm(), rng);
        const double c1 = horizontal ? s.y1 : s.x1;
        if (std::abs(c1 - pos) > 0.5 * slit_width_mm) continue;
        const double cam = scale * (horizontal ? s.y2 : s.x2);
        p.sum += cam;
        p.sum2 += cam * cam;
        p.n += 1;
      }
      partials[size_t(chunk)] = p;
    });
    // Ordered reduction keeps float totals independent of the worker count.
    Partial total;
    for (const auto& p : partials) {
      total.sum += p.sum;
      total.sum2 += p.sum2;
      total.n += p.n;
    }
    SlitPoint pt;
    pt.slit_pos_mm = pos;
    pt.n = total.n;
    if (total.n > 0) {
      pt.mean_cam_mm = total.sum / double(total.n);
      const double var =
          std::max(0.0, total.sum2 / double(total.n) - pt.mean_cam_mm * pt.mean_cam_mm);
      pt.sem_mm = std::sqrt(var / double(total.n));
    }
    scan.points.push_back(pt);
  }

  std::vector<std::pair<double, double>> fit_pts;
  for (const auto& p : scan.points)
    if (p.n > 0) fit_pts.emplace_back(p.slit_pos_mm, p.mean_cam_mm);
  if (fit_pts.size() >= 2) scan.fit = analysis::linear_fit(fit_pts);
  return scan;
}

}  // namespace qci::engine
