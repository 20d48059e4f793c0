#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qci/analysis.hpp"
#include "qci/config.hpp"
#include "qci/engine.hpp"
#include "qci/frame_io.hpp"
#include "qci/pattern.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunContext {
  std::string command;
  std::string config_path;
  fs::path out_dir;
  qci::engine::ExperimentConfig cfg;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
};

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot write " + p.string());
  out << body;
  if (!out.good()) throw std::runtime_error("error writing " + p.string());
}

void add_output(RunContext& ctx, const fs::path& p) {
  ctx.outputs.push_back(p.filename().string());
}

void write_frame_set(RunContext& ctx, const qci::ImageFrame& f,
                     const std::string& stem) {
  const fs::path base = ctx.out_dir / stem;
  qci::frame_io::write_csv(f, base.string() + ".csv");
  qci::frame_io::write_pgm16(f, base.string() + ".pgm");
  qci::frame_io::write_json_sidecar(f, base.string() + ".json");
  add_output(ctx, base.string() + ".csv");
  add_output(ctx, base.string() + ".pgm");
  add_output(ctx, base.string() + ".json");
}

void write_manifest(RunContext& ctx) {
  const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - ctx.start)
                        .count();
  json j{{"tool", "qcisim"},
         {"version", kVersion},
         {"command", ctx.command},
         {"config_path", ctx.config_path},
         {"config", qci::config::to_ini(ctx.cfg)},
         {"seed", ctx.cfg.seed ? json(*ctx.cfg.seed) : json()},
         {"outputs", ctx.outputs},
         {"wall_ms", wall}};
  const fs::path p = ctx.out_dir / "manifest.json";
  write_text(p, j.dump(2) + "\n");
  for (const auto& name : ctx.outputs)
    if (!fs::exists(ctx.out_dir / name))
      throw std::runtime_error("manifest lists a missing artifact: " + name);
}

RunContext make_context(const std::string& command,
                        const std::string& config_path,
                        const std::string& out_dir,
                        const std::vector<std::string>& overrides,
                        const std::optional<uint64_t>& seed,
                        const std::string& backend, int workers) {
  RunContext ctx;
  ctx.command = command;
  ctx.config_path = config_path;
  ctx.out_dir = out_dir;
  ctx.cfg = qci::config::load_file(config_path);
  for (const auto& o : overrides) qci::config::apply_override(ctx.cfg, o);
  if (!backend.empty())
    qci::config::apply_override(ctx.cfg, "backend.kind=" + backend);
  if (seed) ctx.cfg.seed = *seed;
  if (workers > 0) ctx.cfg.workers = workers;
  fs::create_directories(ctx.out_dir);
  return ctx;
}

std::vector<double> parse_number_list(const std::string& csv,
                                      const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw qci::ConfigError(std::string("bad ") + what + " value '" + tok + "'");
    }
  }
  if (out.empty())
    throw qci::ConfigError(std::string("empty ") + what + " list");
  return out;
}

int cmd_image(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& overrides,
              std::optional<uint64_t> seed, const std::string& backend,
              int workers) {
  RunContext ctx = make_context("image", config_path, out_dir, overrides, seed,
                                backend, workers);
  const auto result = qci::engine::run_imaging(ctx.cfg);
  write_frame_set(ctx, result.raw, "raw");
  write_frame_set(ctx, result.background, "background");
  write_frame_set(ctx, result.corrected, "corrected");
  write_manifest(ctx);
  std::cout << "image: " << result.corrected.meta.setting
            << "  total corrected counts = " << result.corrected.total()
            << "\n";
  return 0;
}

int cmd_chsh(const std::string& config_path, const std::string& out_dir,
             const std::string& angles_csv,
             const std::vector<std::string>& overrides,
             std::optional<uint64_t> seed, const std::string& backend,
             int workers) {
  RunContext ctx = make_context("chsh", config_path, out_dir, overrides, seed,
                                backend, workers);
  const auto a = parse_number_list(angles_csv, "angle");
  if (a.size() != 4)
    throw qci::ConfigError("chsh needs exactly 4 angles: d1,d1',d2,d2'");
  qci::analysis::ChshAngles angles{a[0], a[1], a[2], a[3]};
  const auto run = qci::engine::run_chsh(ctx.cfg, angles);

  std::ostringstream csv;
  csv << "delta1_deg,delta2_deg,counts\n";
  char buf[96];
  for (const auto& r : run.table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.delta1_deg,
                  r.delta2_deg, r.counts);
    csv << buf;
  }
  write_text(ctx.out_dir / "chsh_counts.csv", csv.str());
  add_output(ctx, "chsh_counts.csv");

  json counts = json::array();
  for (const auto& r : run.table.rows)
    counts.push_back({{"delta1_deg", r.delta1_deg},
                      {"delta2_deg", r.delta2_deg},
                      {"counts", r.counts}});
  json rep{{"angles_deg", {angles.d1, angles.d1p, angles.d2, angles.d2p}},
           {"E", {{"d1_d2", run.result.e11},
                  {"d1_d2p", run.result.e12},
                  {"d1p_d2", run.result.e21},
                  {"d1p_d2p", run.result.e22}}},
           {"S", run.result.S},
           {"abs_S", std::abs(run.result.S)},
           {"classical_bound", 2.0},
           {"violates_classical", run.result.violates_classical},
           {"n_per_setting", run.n_per_setting},
           {"counts", counts}};
  write_text(ctx.out_dir / "chsh_report.json", rep.dump(2) + "\n");
  add_output(ctx, "chsh_report.json");
  write_manifest(ctx);
  std::cout << "chsh: S = " << run.result.S << "  |S| = "
            << std::abs(run.result.S) << " vs classical bound 2\n";
  return 0;
}

int cmd_fringe(const std::string& config_path, const std::string& out_dir,
               double delta2, double sweep_start, double sweep_stop,
               double sweep_step, const std::vector<std::string>& overrides,
               std::optional<uint64_t> seed, const std::string& backend,
               int workers) {
  RunContext ctx = make_context("fringe", config_path, out_dir, overrides,
                                seed, backend, workers);
  if (!(sweep_step > 0.0)) throw qci::ConfigError("fringe: step must be > 0");
  std::vector<double> sweep;
  for (double d = sweep_start; d <= sweep_stop + 1e-9; d += sweep_step)
    sweep.push_back(d);
  const auto scan = qci::engine::run_fringe_scan(ctx.cfg, delta2, sweep);

  std::ostringstream csv;
  csv << "delta1_deg,counts\n";
  char buf[64];
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : scan) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.delta1_deg, p.counts);
    csv << buf;
    pts.emplace_back(p.delta1_deg, p.counts);
  }
  write_text(ctx.out_dir / "fringe.csv", csv.str());
  add_output(ctx, "fringe.csv");

  const auto fit = qci::analysis::fit_sin2(pts);
  json rep{{"delta2_deg", delta2},
           {"visibility", fit.visibility},
           {"phase_offset_deg", fit.phase_offset_deg},
           {"amplitude", fit.amplitude},
           {"mean_rate", fit.mean_rate},
           {"rms_residual", fit.rms_residual},
           {"degenerate", fit.degenerate}};
  write_text(ctx.out_dir / "fringe_fit.json", rep.dump(2) + "\n");
  add_output(ctx, "fringe_fit.json");
  write_manifest(ctx);
  std::cout << "fringe: fitted visibility = " << fit.visibility
            << "  minimum at delta1 = " << fit.phase_offset_deg << " deg\n";
  return 0;
}

int cmd_slit_scan(const std::string& config_path, const std::string& out_dir,
                  const std::string& orientation, const std::string& positions,
                  double width, const std::vector<std::string>& overrides,
                  std::optional<uint64_t> seed, const std::string& backend,
                  int workers) {
  RunContext ctx = make_context("slit-scan", config_path, out_dir, overrides,
                                seed, backend, workers);
  qci::engine::SlitOrientation orient;
  if (orientation == "h" || orientation == "horizontal")
    orient = qci::engine::SlitOrientation::Horizontal;
  else if (orientation == "v" || orientation == "vertical")
    orient = qci::engine::SlitOrientation::Vertical;
  else
    throw qci::ConfigError("slit-scan: orientation must be h or v");
  const auto pos = parse_number_list(positions, "position");
  const auto scan = qci::engine::run_slit_scan(ctx.cfg, orient, pos, width);

  std::ostringstream csv;
  csv << "slit_pos_mm,mean_camera_mm,sem_mm,n\n";
  char buf[128];
  for (const auto& p : scan.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%lld\n", p.slit_pos_mm,
                  p.mean_cam_mm, p.sem_mm, p.n);
    csv << buf;
  }
  write_text(ctx.out_dir / "slit_scan.csv", csv.str());
  add_output(ctx, "slit_scan.csv");

  json rep{{"orientation", orientation},
           {"slit_width_mm", width},
           {"slope", scan.fit.slope},
           {"intercept", scan.fit.intercept},
           {"r", scan.fit.r}};
  write_text(ctx.out_dir / "slit_fit.json", rep.dump(2) + "\n");
  add_output(ctx, "slit_fit.json");
  write_manifest(ctx);
  std::cout << "slit-scan: slope = " << scan.fit.slope << "  r = " << scan.fit.r
            << "\n";
  return 0;
}

int cmd_pattern_generate(const std::string& kind, double square_mm,
                         int n_squares, double phase_rad,
                         const std::string& out_path) {
  qci::pattern::PhasePattern p;
  if (kind == "checkerboard")
    p = qci::pattern::generate_checkerboard(square_mm, n_squares);
  else if (kind == "uniform")
    p = qci::pattern::generate_uniform(square_mm, n_squares, phase_rad);
  else if (kind == "frames")
    p = qci::pattern::generate_frames(square_mm, n_squares);
  else
    throw qci::ConfigError("pattern: kind must be checkerboard|uniform|frames");
  qci::pattern::save_pattern(p, out_path);
  std::cout << "pattern: wrote " << out_path << " (" << p.cells.nx << "x"
            << p.cells.ny << " cells, " << square_mm << " mm pitch)\n";
  return 0;
}

int cmd_pattern_convert(const std::string& in_path, const std::string& out_path,
                        double pitch_mm, const std::string& mapping,
                        int threshold) {
  qci::pattern::GrayMapping map;
  if (mapping == "binary")
    map.kind = qci::pattern::GrayMapping::BinaryThreshold;
  else if (mapping == "linear")
    map.kind = qci::pattern::GrayMapping::Linear;
  else
    throw qci::ConfigError("pattern: mapping must be binary|linear");
  map.threshold = threshold;
  qci::pattern::PhasePattern p;
  try {
    p = qci::pattern::load_pattern(in_path, pitch_mm, map);
  } catch (const std::exception& e) {
    throw qci::ConfigError(e.what());
  }
  qci::pattern::save_pattern(p, out_path);
  std::cout << "pattern: converted " << in_path << " -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coincidence imaging simulator for hyper-entangled photon pairs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", backend;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  int workers = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config file")
        ->required();
    sub->add_option("-o,--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--backend", backend, "analytic or mc (overrides)");
    sub->add_option("--set", overrides,
                    "table.key=value override, may repeat");
    sub->add_option("--workers", workers, "Monte Carlo worker threads");
  };

  auto* image = app.add_subcommand("image", "imaging run: raw, background, corrected frames");
  add_common(image);

  auto* chsh = app.add_subcommand("chsh", "polarization correlation test over four angle pairs");
  add_common(chsh);
  std::string angles = "0,45,22.5,67.5";
  chsh->add_option("--angles", angles, "d1,d1',d2,d2' in degrees");

  auto* fringe = app.add_subcommand("fringe", "coincidence fringe versus polarizer-1 angle");
  add_common(fringe);
  double delta2 = -45.0, sweep_start = -90.0, sweep_stop = 90.0, sweep_step = 15.0;
  fringe->add_option("--delta2", delta2, "fixed polarizer-2 angle, deg");
  fringe->add_option("--start", sweep_start, "sweep start, deg");
  fringe->add_option("--stop", sweep_stop, "sweep stop, deg");
  fringe->add_option("--step", sweep_step, "sweep step, deg");

  auto* slit = app.add_subcommand("slit-scan", "spatial correlation scan with a translated slit");
  add_common(slit);
  std::string orientation = "h";
  std::string positions = "-6,-4.5,-3,-1.5,0,1.5,3,4.5,6";
  double slit_width = 0.8;
  slit->add_option("--orientation", orientation, "h (scan vertical axis) or v");
  slit->add_option("--positions", positions, "slit positions, mm, comma list");
  slit->add_option("--width", slit_width, "slit width, mm");

  auto* pat = app.add_subcommand("pattern", "generate or convert phase masks");
  pat->require_subcommand(1);
  auto* gen = pat->add_subcommand("generate", "write a generated mask");
  std::string kind = "checkerboard", pattern_out = "pattern.pgm";
  double square_mm = 1.0, phase_rad = 0.0;
  int n_squares = 4;
  gen->add_option("--kind", kind, "checkerboard|uniform|frames");
  gen->add_option("--square-mm", square_mm, "cell size, mm");
  gen->add_option("--n-squares", n_squares, "cells per side");
  gen->add_option("--phase-rad", phase_rad, "phase for uniform masks");
  gen->add_option("-o,--out", pattern_out, "output .pgm or .csv")->required();
  auto* conv = pat->add_subcommand("convert", "convert between mask formats");
  std::string conv_in, conv_out, mapping = "binary";
  double conv_pitch = 0.05;
  int threshold = 128;
  conv->add_option("-i,--in", conv_in, "input .pgm or .csv")->required();
  conv->add_option("-o,--out", conv_out, "output .pgm or .csv")->required();
  conv->add_option("--pitch-mm", conv_pitch, "cell pitch of the input, mm");
  conv->add_option("--mapping", mapping, "binary|linear gray mapping");
  conv->add_option("--threshold", threshold, "binary threshold, 0-255");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(image))
      return cmd_image(config_path, out_dir, overrides, seed, backend, workers);
    if (app.got_subcommand(chsh))
      return cmd_chsh(config_path, out_dir, angles, overrides, seed, backend,
                      workers);
    if (app.got_subcommand(fringe))
      return cmd_fringe(config_path, out_dir, delta2, sweep_start, sweep_stop,
                        sweep_step, overrides, seed, backend, workers);
    if (app.got_subcommand(slit))
      return cmd_slit_scan(config_path, out_dir, orientation, positions,
                           slit_width, overrides, seed, backend, workers);
    if (app.got_subcommand(pat)) {
      if (pat->got_subcommand(gen))
        return cmd_pattern_generate(kind, square_mm, n_squares, phase_rad,
                                    pattern_out);
      return cmd_pattern_convert(conv_in, conv_out, conv_pitch, mapping,
                                 threshold);
    }
    return 1;
  } catch (const qci::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
