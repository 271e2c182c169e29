#include "flowpersp/app.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowpersp/errors.hpp"
#include "flowpersp/format.hpp"
#include "flowpersp/hash.hpp"
#include "flowpersp/scene.hpp"

namespace flowpersp::app {

const char* to_string(Method m) {
  switch (m) {
    case Method::kDense:
      return "dense";
    case Method::kCoarse:
      return "coarse";
    case Method::kBoth:
      return "both";
  }
  return "unknown";
}

MethodResult run_estimators(const FlowSequence& seq, Method method,
                            const EstimatorOptions& options) {
  const FlowSequence input = apply_threshold(seq, options.threshold);
  MethodResult result;
  if (method != Method::kCoarse) {
    result.dense = estimate_dense(input, options.dense);
  }
  if (method != Method::kDense) {
    const GridSpec grid = parse_grid(options.grid, seq.width(), seq.height());
    result.coarse = estimate_coarse(input, grid, options.coarse);
  }
  return result;
}

std::vector<double> default_fractions() {
  std::vector<double> out;
  for (int k = 1; k <= 8; ++k) out.push_back(0.125 * k);
  return out;
}

std::vector<double> parse_fractions(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw ArgumentError("invalid fraction '" + s + "' in '" + text + "'");
    }
    return x;
  };

  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) {
      throw ArgumentError("fraction range must be start:step:stop");
    }
    const double start = number(parts[0]);
    const double step = number(parts[1]);
    const double stop = number(parts[2]);
    if (!(step > 0.0)) throw ArgumentError("fraction step must be positive");
    for (int k = 0;; ++k) {
      const double f = start + k * step;
      if (f > stop + 1e-9) break;
      out.push_back(std::min(f, 1.0));
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw ArgumentError("no fractions given");
  for (double f : out) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw ArgumentError("fractions must lie in (0, 1]");
    }
  }
  return out;
}

std::vector<ConvergenceRow> run_convergence(
    const FlowSequence& seq, Method method, const EstimatorOptions& options,
    const std::vector<double>& fractions, std::optional<double> reference) {
  if (method == Method::kBoth) {
    throw ArgumentError("convergence runs one method at a time");
  }
  std::vector<std::future<ConvergenceRow>> jobs;
  jobs.reserve(fractions.size());
  for (double fraction : fractions) {
    jobs.push_back(std::async(std::launch::async, [&, fraction] {
      const FlowSequence prefix = slice_fraction(seq, fraction);
      const MethodResult r = run_estimators(prefix, method, options);
      ConvergenceRow row;
      row.fraction = fraction;
      row.frames = prefix.frame_count();
      row.zeta = r.dense ? r.dense->zeta : r.coarse->omega.zeta;
      if (reference && *reference != 0.0) {
        row.relative_error = std::abs(row.zeta - *reference) / std::abs(*reference);
      }
      return row;
    }));
  }
  std::vector<ConvergenceRow> rows;
  rows.reserve(jobs.size());
  for (auto& job : jobs) rows.push_back(job.get());
  return rows;
}

void write_convergence_csv(const std::vector<ConvergenceRow>& rows,
                           std::ostream& out) {
  out << "fraction,frames,zeta,relative_error\n";
  for (const auto& r : rows) {
    out << format_sig(r.fraction) << ',' << r.frames << ','
        << format_sig(r.zeta) << ','
        << (r.relative_error ? format_sig(*r.relative_error) : std::string{})
        << '\n';
  }
}

std::vector<NormalizationRow> normalization_map(double zeta, int frame_height) {
  if (frame_height <= 0) throw ArgumentError("frame height must be positive");
  if (!std::isfinite(zeta)) throw ArgumentError("zeta must be finite");
  const int reference_row = frame_height - 1;
  std::vector<NormalizationRow> rows;
  rows.reserve(static_cast<std::size_t>(frame_height));
  for (int v = 0; v < frame_height; ++v) {
    rows.push_back({v, std::exp(zeta * static_cast<double>(v - reference_row))});
  }
  return rows;
}

void write_normalization_csv(const std::vector<NormalizationRow>& rows,
                             std::ostream& out) {
  out << "row,factor\n";
  for (const auto& r : rows) out << r.row << ',' << format_sig(r.factor) << '\n';
}

// --- CLI --------------------------------------------------------------------

namespace {

std::string num(double x) { return format_sig(x, 10); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path + "'");
}

template <typename Fn>
void write_to(const std::string& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text_file(path, ss.str());
}

struct EstimatorFlags {
  std::string method = "both";
  std::string solver = "closed-form";
  std::string denominator = "transitions";
  int cell_size = 4;
  double trim = kDefaultTrim;
  std::uint64_t min_samples = 10;
  double velocity_epsilon = 0.2;
  double velocity_exponent = 2.0;
  std::uint64_t min_block_count = kDefaultMinBlockCount;
  double threshold = kDefaultThreshold;
  std::string grid = "10x10";

  void attach(CLI::App* cmd, bool allow_both) {
    cmd->add_option("--method", method, "Estimator")
        ->check(allow_both ? CLI::IsMember({"dense", "coarse", "both"})
                           : CLI::IsMember({"dense", "coarse"}))
        ->capture_default_str();
    cmd->add_option("--grid", grid, "Coarse grid ROWSxCOLS")
        ->capture_default_str();
    cmd->add_option("--cell-size", cell_size, "Dense cell size in pixels")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--trim", trim, "Trim fraction per tail")
        ->check(CLI::Range(0.0, 0.4999999))
        ->capture_default_str();
    cmd->add_option("--threshold", threshold,
                    "Ignore vectors with magnitude <= PX")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--min-samples", min_samples,
                    "Minimum vectors per dense cell")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--velocity-epsilon", velocity_epsilon,
                    "Minimum |mean dv| per dense cell, px/frame")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--velocity-exponent", velocity_exponent,
                    "Power relating vertical image speed to scale")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--solver", solver, "Coarse solver")
        ->check(CLI::IsMember({"closed-form", "iterative"}))
        ->capture_default_str();
    cmd->add_option("--rho-denominator", denominator,
                    "Transition proportion denominator")
        ->check(CLI::IsMember({"transitions", "all"}))
        ->capture_default_str();
    cmd->add_option("--min-block-count", min_block_count,
                    "Minimum vectors per coarse block")
        ->capture_default_str();
  }

  Method parsed_method() const {
    if (method == "dense") return Method::kDense;
    if (method == "coarse") return Method::kCoarse;
    return Method::kBoth;
  }

  EstimatorOptions options() const {
    EstimatorOptions o;
    o.grid = grid;
    o.threshold = threshold;
    o.dense.cell_size = cell_size;
    o.dense.min_samples = min_samples;
    o.dense.velocity_epsilon = velocity_epsilon;
    o.dense.velocity_exponent = velocity_exponent;
    o.dense.trim = trim;
    o.coarse.solver = solver == "iterative" ? SolverKind::kIterative
                                            : SolverKind::kClosedForm;
    o.coarse.denominator = denominator == "all" ? RhoDenominator::kAll
                                                : RhoDenominator::kTransitions;
    o.coarse.min_block_count = min_block_count;
    return o;
  }

  void echo(std::ostream& out) const {
    out << "config.method: " << method << '\n'
        << "config.threshold: " << num(threshold) << '\n';
    const Method m = parsed_method();
    if (m != Method::kCoarse) {
      out << "config.cell_size: " << cell_size << '\n'
          << "config.trim: " << num(trim) << '\n'
          << "config.min_samples: " << min_samples << '\n'
          << "config.velocity_epsilon: " << num(velocity_epsilon) << '\n'
          << "config.velocity_exponent: " << num(velocity_exponent) << '\n';
    }
    if (m != Method::kDense) {
      out << "config.grid: " << grid << '\n'
          << "config.solver: " << solver << '\n'
          << "config.rho_denominator: " << denominator << '\n'
          << "config.min_block_count: " << min_block_count << '\n';
    }
  }
};

void report_input(std::ostream& out, const std::string& path,
                  const FlowSequence& seq) {
  out << "input: " << path << '\n'
      << "input_sha256: " << sha256_file(path) << '\n'
      << "frame_size: " << seq.width() << 'x' << seq.height() << '\n'
      << "frame_rate: " << num(seq.frame_rate()) << '\n'
      << "frames: " << seq.frame_count() << '\n'
      << "vectors: " << seq.vector_count() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App cli{"Perspective scale estimation from sparse motion vectors",
               "flowpersp"};
  cli.require_subcommand(1);

  // simulate
  auto* simulate_cmd =
      cli.add_subcommand("simulate", "Render a scene script to FLOWLOG");
  std::string script_path;
  std::string sim_out;
  std::string oracle_out;
  std::uint64_t seed = 0;
  std::optional<double> sim_threshold;
  simulate_cmd->add_option("script", script_path, "Scene script")->required();
  simulate_cmd->add_option("--seed", seed, "Noise seed")->capture_default_str();
  simulate_cmd->add_option("--out", sim_out, "Output FLOWLOG path")->required();
  simulate_cmd->add_option("--threshold", sim_threshold,
                           "Override the script's sparsification threshold");
  simulate_cmd->add_option("--oracle-out", oracle_out,
                           "Also write the reference zeta record here");

  // estimate
  auto* estimate_cmd =
      cli.add_subcommand("estimate", "Estimate zeta from a FLOWLOG file");
  std::string input;
  EstimatorFlags est_flags;
  std::string field_csv;
  std::string blocks_csv;
  std::string omega_json;
  std::optional<double> reference;
  bool timing = false;
  estimate_cmd->add_option("input", input, "FLOWLOG file")->required();
  est_flags.attach(estimate_cmd, true);
  estimate_cmd->add_option("--field-csv", field_csv,
                           "Write the dense local zeta field");
  estimate_cmd->add_option("--blocks-csv", blocks_csv,
                           "Write per-block statistics");
  estimate_cmd->add_option("--omega-json", omega_json,
                           "Write the coarse omega estimate");
  estimate_cmd->add_option("--reference", reference,
                           "Known zeta, for relative errors");
  estimate_cmd->add_flag("--timing", timing, "Report wall-clock time");

  // convergence
  auto* conv_cmd = cli.add_subcommand(
      "convergence", "Estimate on growing temporal prefixes of the data");
  EstimatorFlags conv_flags;
  conv_flags.method = "dense";
  std::string conv_input;
  std::string fractions_text = "0.125:0.125:1";
  std::optional<double> conv_reference;
  std::string conv_out;
  conv_cmd->add_option("input", conv_input, "FLOWLOG file")->required();
  conv_flags.attach(conv_cmd, false);
  conv_cmd->add_option("--fractions", fractions_text,
                       "start:step:stop or comma list")
      ->capture_default_str();
  conv_cmd->add_option("--reference", conv_reference,
                       "Known zeta, for relative errors");
  conv_cmd->add_option("--out", conv_out, "CSV path (default: stdout)");

  // normalize
  auto* norm_cmd = cli.add_subcommand(
      "normalize", "Per-row threshold factors for a given zeta");
  std::string norm_input;
  int norm_height = 0;
  double norm_zeta = 0.0;
  std::string norm_out;
  norm_cmd->add_option("input", norm_input,
                       "FLOWLOG file supplying the frame height");
  norm_cmd->add_option("--height", norm_height, "Frame height in pixels")
      ->check(CLI::PositiveNumber);
  norm_cmd->add_option("--zeta", norm_zeta, "Perspective coefficient")
      ->required();
  norm_cmd->add_option("--out", norm_out, "CSV path (default: stdout)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // help and version requests exit 0, everything else is a usage error
    return cli.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (simulate_cmd->parsed()) {
      SceneScript script = read_scene_file(script_path);
      if (sim_threshold) {
        script.threshold = *sim_threshold;
        script.validate();
      }
      const SimulationResult sim = simulate(script, seed);
      const std::string text = write_flow_stream(sim.flow);
      write_text_file(sim_out, text);
      std::ostringstream record;
      record << "reference_row: " << num(script.camera.image_height / 2.0)
             << '\n'
             << "reference_zeta: " << num(sim.reference_zeta) << '\n';
      if (!oracle_out.empty()) write_text_file(oracle_out, record.str());
      out << "command: simulate\n"
          << "script: " << script_path << '\n'
          << "script_sha256: " << sha256_file(script_path) << '\n'
          << "seed: " << seed << '\n'
          << "threshold: " << num(script.threshold) << '\n'
          << "noise_std: " << num(script.noise_std) << '\n'
          << "objects: " << script.objects.size() << '\n'
          << "frames: " << sim.flow.frame_count() << '\n'
          << "vectors: " << sim.flow.vector_count() << '\n'
          << record.str() << "output: " << sim_out << '\n'
          << "output_sha256: " << sha256_hex(text) << '\n';
      return 0;
    }

    if (estimate_cmd->parsed()) {
      const auto started = std::chrono::steady_clock::now();
      const FlowSequence seq = read_flow_file(input);
      const Method method = est_flags.parsed_method();
      const MethodResult r = run_estimators(seq, method, est_flags.options());

      std::ostringstream report;
      report << "command: estimate\n";
      report_input(report, input, seq);
      est_flags.echo(report);
      if (r.dense) {
        report << "dense.zeta: " << num(r.dense->zeta) << '\n'
               << "dense.valid_cells: " << r.dense->consensus.valid_cells << '\n'
               << "dense.trimmed_per_tail: "
               << r.dense->consensus.trimmed_per_tail << '\n';
        if (!field_csv.empty()) {
          write_to(field_csv,
                   [&](std::ostream& s) { write_field_csv(r.dense->field, s); });
        }
      }
      if (r.coarse) {
        const OmegaEstimate& o = r.coarse->omega;
        report << "coarse.zeta: " << num(o.zeta) << '\n'
               << "coarse.omega: " << num(o.omega) << '\n'
               << "coarse.delta_omega: " << num(o.delta_omega) << '\n'
               << "coarse.block_height: " << num(o.block_height) << '\n'
               << "coarse.residual: " << num(o.residual) << '\n'
               << "coarse.constraints: " << o.constraints << '\n'
               << "coarse.solver: " << to_string(o.solver) << '\n'
               << "coarse.iterations: " << o.iterations << '\n';
        if (!blocks_csv.empty()) {
          write_to(blocks_csv,
                   [&](std::ostream& s) { write_blocks_csv(r.coarse->blocks, s); });
        }
        if (!omega_json.empty()) write_text_file(omega_json, to_json(o) + "\n");
      }
      if (r.dense && r.coarse) {
        report << "agreement.relative_difference: "
               << num(std::abs(r.coarse->omega.zeta - r.dense->zeta) /
                      std::abs(r.dense->zeta))
               << '\n';
      }
      if (reference) {
        report << "reference_zeta: " << num(*reference) << '\n';
        if (*reference != 0.0) {
          if (r.dense) {
            report << "dense.relative_error: "
                   << num(std::abs(r.dense->zeta - *reference) /
                          std::abs(*reference))
                   << '\n';
          }
          if (r.coarse) {
            report << "coarse.relative_error: "
                   << num(std::abs(r.coarse->omega.zeta - *reference) /
                          std::abs(*reference))
                   << '\n';
          }
        }
      }
      if (timing) {
        const std::chrono::duration<double> took =
            std::chrono::steady_clock::now() - started;
        report << "wall_seconds: " << format_sig(took.count(), 4) << '\n';
      }
      out << report.str();
      return 0;
    }

    if (conv_cmd->parsed()) {
      const FlowSequence seq = read_flow_file(conv_input);
      const auto rows =
          run_convergence(seq, conv_flags.parsed_method(), conv_flags.options(),
                          parse_fractions(fractions_text), conv_reference);
      std::ostringstream csv;
      write_convergence_csv(rows, csv);
      if (conv_out.empty()) {
        out << csv.str();
      } else {
        write_text_file(conv_out, csv.str());
        out << "command: convergence\n";
        report_input(out, conv_input, seq);
        conv_flags.echo(out);
        out << "fractions: " << rows.size() << '\n'
            << "output: " << conv_out << '\n';
      }
      return 0;
    }

    if (norm_cmd->parsed()) {
      int height = norm_height;
      if (!norm_input.empty()) height = read_flow_file(norm_input).height();
      if (height <= 0) {
        err << "normalize: give a FLOWLOG input or --height\n";
        return 2;
      }
      std::ostringstream csv;
      write_normalization_csv(normalization_map(norm_zeta, height), csv);
      if (norm_out.empty()) {
        out << csv.str();
      } else {
        write_text_file(norm_out, csv.str());
        out << "command: normalize\n"
            << "zeta: " << num(norm_zeta) << '\n'
            << "height: " << height << '\n'
            << "reference_row: " << height - 1 << '\n'
            << "output: " << norm_out << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("flowpersp");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace flowpersp::app
