#include "qci/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qci::config {

namespace {

using engine::Backend;
using engine::ExperimentConfig;
using engine::Gate;
using engine::PatternSpec;

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(uint8_t(s[a]))) ++a;
  while (b > a && std::isspace(uint8_t(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  for (auto& c : s) c = char(std::tolower(uint8_t(c)));
  return s;
}

[[noreturn]] void bad(const std::string& section, const std::string& key,
                      const std::string& msg) {
  throw ConfigError("config: [" + section + "] " + key + ": " + msg);
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(d)) throw std::invalid_argument("not finite");
    return d;
  } catch (const std::exception&) {
    bad(section, key, "expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    bad(section, key, "expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& section, const std::string& key,
             const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  bad(section, key, "expected a boolean, got '" + v + "'");
}

void set_key(ExperimentConfig& cfg, const std::string& section,
             const std::string& key, const std::string& value) {
  auto num = [&] { return to_double(section, key, value); };
  auto integer = [&] { return to_int(section, key, value); };
  auto boolean = [&] { return to_bool(section, key, value); };

  if (section == "source") {
    auto& s = cfg.source;
    if (key == "sigma_x_mm") s.sigma_x = num();
    else if (key == "sigma_y_mm") s.sigma_y = num();
    else if (key == "sigma_z_mm") s.sigma_z = num();
    else if (key == "lambda_nm") s.lambda_photon_nm = num();
    else if (key == "lambda_pump_nm") s.lambda_pump_nm = num();
    else if (key == "mean_axis_angle_rad") s.mean_axis_angle = num();
    else if (key == "envelope_sigma_rad") s.envelope_sigma = num();
    else bad(section, key, "unknown key");
  } else if (section == "pattern") {
    auto& p = cfg.pattern;
    if (key == "kind") {
      const std::string v = lower(value);
      if (v == "checkerboard") p.kind = PatternSpec::Checkerboard;
      else if (v == "uniform") p.kind = PatternSpec::Uniform;
      else if (v == "frames") p.kind = PatternSpec::Frames;
      else if (v == "file") p.kind = PatternSpec::File;
      else bad(section, key, "expected checkerboard|uniform|frames|file");
    } else if (key == "square_mm") p.square_mm = num();
    else if (key == "n_squares") p.n_squares = int(integer());
    else if (key == "phase_rad") p.phase_rad = num();
    else if (key == "file") p.file = value;
    else if (key == "pitch_mm") p.file_pitch_mm = num();
    else if (key == "mapping") {
      const std::string v = lower(value);
      if (v == "binary") p.mapping.kind = pattern::GrayMapping::BinaryThreshold;
      else if (v == "linear") p.mapping.kind = pattern::GrayMapping::Linear;
      else bad(section, key, "expected binary|linear");
    } else if (key == "threshold") p.mapping.threshold = int(integer());
    else bad(section, key, "unknown key");
  } else if (section == "telescope") {
    auto& t = cfg.telescope;
    if (key == "demag") t.demag = num();
    else if (key == "invert") t.invert = boolean();
    else if (key == "resolution_fwhm_mm") t.resolution_fwhm = num();
    else if (key == "aperture_diameter_mm") t.aperture_diameter = num();
    else if (key == "coherent") t.coherent = boolean();
    else if (key == "psf") {
      const std::string v = lower(value);
      if (v == "gaussian") t.psf = optics::PsfKind::Gaussian;
      else if (v == "airy") t.psf = optics::PsfKind::Airy;
      else if (v == "none") t.psf = optics::PsfKind::None;
      else bad(section, key, "expected gaussian|airy|none");
    } else bad(section, key, "unknown key");
  } else if (section == "detector") {
    auto& d = cfg.detector;
    if (key == "pair_rate_hz") d.pair_rate_hz = num();
    else if (key == "accidental_ratio") d.accidental_ratio = num();
    else if (key == "dark_rate_hz_per_px") d.dark_rate_hz_per_px = num();
    else if (key == "visibility") d.visibility = num();
    else if (key == "gate_insertion_delay_ns") d.gate_insertion_delay_ns = num();
    else bad(section, key, "unknown key");
  } else if (section == "setting") {
    auto& s = cfg.setting;
    if (key == "delta1_deg") {
      if (lower(value) == "absent") s.delta1.reset();
      else s.delta1 = polarization::PolarizerAngle{num()};
    } else if (key == "delta2_deg") {
      if (lower(value) == "absent") s.delta2.reset();
      else s.delta2 = polarization::PolarizerAngle{num()};
    } else if (key == "photon1_mode") {
      const std::string v = lower(value);
      if (v == "superposition") s.photon1_mode.kind = spatial::DetectionMode::Superposition;
      else if (v == "point") s.photon1_mode.kind = spatial::DetectionMode::Point;
      else bad(section, key, "expected superposition|point");
    } else if (key == "x01_mm") s.photon1_mode.x01 = num();
    else if (key == "y01_mm") s.photon1_mode.y01 = num();
    else if (key == "aperture_mm") s.photon1_mode.aperture_mm = num();
    else if (key == "gate") {
      const std::string v = lower(value);
      if (v == "coincidence") s.gate = Gate::Coincidence;
      else if (v == "ungated") s.gate = Gate::Ungated;
      else bad(section, key, "expected coincidence|ungated");
    } else bad(section, key, "unknown key");
  } else if (section == "geometry") {
    if (key == "d1_m") cfg.d1_m = num();
    else if (key == "d2_m") cfg.d2_m = num();
    else bad(section, key, "unknown key");
  } else if (section == "grid") {
    if (key == "pitch_mm") cfg.grid.pitch_mm = num();
    else if (key == "halfwidth_mm") cfg.grid.halfwidth_mm = num();
    else bad(section, key, "unknown key");
  } else if (section == "backend") {
    if (key == "kind") {
      const std::string v = lower(value);
      if (v == "analytic") cfg.backend = Backend::Analytic;
      else if (v == "mc" || v == "montecarlo") cfg.backend = Backend::MonteCarlo;
      else bad(section, key, "expected analytic|mc");
    } else if (key == "n_pairs") cfg.n_pairs = integer();
    else if (key == "exposure_s") cfg.exposure_s = num();
    else if (key == "seed") cfg.seed = uint64_t(integer());
    else if (key == "workers") cfg.workers = int(integer());
    else bad(section, key, "unknown key");
  } else {
    throw ConfigError("config: unknown table [" + section + "]");
  }
}

}  // namespace

engine::ExperimentConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("config: cannot open file: " + path);
  ExperimentConfig cfg;
  std::string line, section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                          ": malformed table header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key = value");
    if (section.empty())
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": key outside any table");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    set_key(cfg, section, key, value);
  }
  return cfg;
}

void apply_override(engine::ExperimentConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  const size_t dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("config: override must look like table.key=value, got '" +
                      assignment + "'");
  const std::string section = lower(trim(assignment.substr(0, dot)));
  const std::string key = lower(trim(assignment.substr(dot + 1, eq - dot - 1)));
  const std::string value = trim(assignment.substr(eq + 1));
  set_key(cfg, section, key, value);
}

std::string to_ini(const engine::ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[source]\n";
  os << "sigma_x_mm = " << cfg.source.sigma_x << "\n";
  os << "sigma_y_mm = " << cfg.source.sigma_y << "\n";
  os << "sigma_z_mm = " << cfg.source.sigma_z << "\n";
  os << "lambda_nm = " << cfg.source.lambda_photon_nm << "\n";
  os << "lambda_pump_nm = " << cfg.source.lambda_pump_nm << "\n";
  os << "mean_axis_angle_rad = " << cfg.source.mean_axis_angle << "\n";
  os << "envelope_sigma_rad = " << cfg.source.envelope_sigma << "\n";
  os << "\n[pattern]\n";
  const char* kinds[] = {"checkerboard", "uniform", "frames", "file"};
  os << "kind = " << kinds[int(cfg.pattern.kind)] << "\n";
  os << "square_mm = " << cfg.pattern.square_mm << "\n";
  os << "n_squares = " << cfg.pattern.n_squares << "\n";
  if (cfg.pattern.kind == PatternSpec::Uniform)
    os << "phase_rad = " << cfg.pattern.phase_rad << "\n";
  if (cfg.pattern.kind == PatternSpec::File) {
    os << "file = " << cfg.pattern.file << "\n";
    os << "pitch_mm = " << cfg.pattern.file_pitch_mm << "\n";
    os << "mapping = "
       << (cfg.pattern.mapping.kind == pattern::GrayMapping::BinaryThreshold
               ? "binary"
               : "linear")
       << "\n";
    os << "threshold = " << cfg.pattern.mapping.threshold << "\n";
  }
  os << "\n[telescope]\n";
  os << "demag = " << cfg.telescope.demag << "\n";
  os << "invert = " << (cfg.telescope.invert ? "true" : "false") << "\n";
  os << "resolution_fwhm_mm = " << cfg.telescope.resolution_fwhm << "\n";
  os << "aperture_diameter_mm = " << cfg.telescope.aperture_diameter << "\n";
  os << "coherent = " << (cfg.telescope.coherent ? "true" : "false") << "\n";
  const char* psfs[] = {"gaussian", "airy", "none"};
  os << "psf = " << psfs[int(cfg.telescope.psf)] << "\n";
  os << "\n[detector]\n";
  os << "pair_rate_hz = " << cfg.detector.pair_rate_hz << "\n";
  os << "accidental_ratio = " << cfg.detector.accidental_ratio << "\n";
  os << "dark_rate_hz_per_px = " << cfg.detector.dark_rate_hz_per_px << "\n";
  os << "visibility = " << cfg.detector.visibility << "\n";
  os << "gate_insertion_delay_ns = " << cfg.detector.gate_insertion_delay_ns
     << "\n";
  os << "\n[setting]\n";
  if (cfg.setting.delta1)
    os << "delta1_deg = " << cfg.setting.delta1->degrees << "\n";
  else
    os << "delta1_deg = absent\n";
  if (cfg.setting.delta2)
    os << "delta2_deg = " << cfg.setting.delta2->degrees << "\n";
  else
    os << "delta2_deg = absent\n";
  os << "photon1_mode = "
     << (cfg.setting.photon1_mode.kind == spatial::DetectionMode::Superposition
             ? "superposition"
             : "point")
     << "\n";
  if (cfg.setting.photon1_mode.kind == spatial::DetectionMode::Point) {
    os << "x01_mm = " << cfg.setting.photon1_mode.x01 << "\n";
    os << "y01_mm = " << cfg.setting.photon1_mode.y01 << "\n";
    os << "aperture_mm = " << cfg.setting.photon1_mode.aperture_mm << "\n";
  }
  os << "gate = "
     << (cfg.setting.gate == Gate::Coincidence ? "coincidence" : "ungated")
     << "\n";
  os << "\n[geometry]\n";
  os << "d1_m = " << cfg.d1_m << "\n";
  os << "d2_m = " << cfg.d2_m << "\n";
  os << "\n[grid]\n";
  os << "pitch_mm = " << cfg.grid.pitch_mm << "\n";
  os << "halfwidth_mm = " << cfg.grid.halfwidth_mm << "\n";
  os << "\n[backend]\n";
  os << "kind = " << (cfg.backend == Backend::Analytic ? "analytic" : "mc")
     << "\n";
  os << "n_pairs = " << cfg.n_pairs << "\n";
  os << "exposure_s = " << cfg.exposure_s << "\n";
  if (cfg.seed) os << "seed = " << *cfg.seed << "\n";
  os << "workers = " << cfg.workers << "\n";
  return os.str();
}

}  // namespace qci::config
