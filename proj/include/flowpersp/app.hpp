// Command-line front end: simulate, estimate, convergence, normalize.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowpersp/coarse.hpp"
#include "flowpersp/dense.hpp"
#include "flowpersp/flow.hpp"

namespace flowpersp::app {

// Runs the CLI. Returns the process exit code: 0 when a report was produced,
// 1 on a runtime error, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

enum class Method { kDense, kCoarse, kBoth };

const char* to_string(Method m);

struct EstimatorOptions {
  std::string grid = "10x10";
  DenseConfig dense;
  CoarseConfig coarse;
  double threshold = kDefaultThreshold;
};

struct MethodResult {
  std::optional<DenseEstimate> dense;
  std::optional<CoarseEstimate> coarse;
};

// Applies the threshold, then runs the requested estimators.
MethodResult run_estimators(const FlowSequence& seq, Method method,
                            const EstimatorOptions& options);

struct ConvergenceRow {
  double fraction = 0.0;
  std::size_t frames = 0;
  double zeta = 0.0;
  std::optional<double> relative_error;
};

// 0.125, 0.25, ..., 1.0
std::vector<double> default_fractions();

// "a:step:b" or a comma-separated list.
std::vector<double> parse_fractions(const std::string& text);

// One estimate per temporal prefix. Fractions are evaluated concurrently.
// `method` must be kDense or kCoarse.
std::vector<ConvergenceRow> run_convergence(
    const FlowSequence& seq, Method method, const EstimatorOptions& options,
    const std::vector<double>& fractions, std::optional<double> reference);

void write_convergence_csv(const std::vector<ConvergenceRow>& rows,
                           std::ostream& out);

struct NormalizationRow {
  int row = 0;
  double factor = 1.0;
};

// Location-dependent threshold factors exp(zeta * (v - v_ref)) with v_ref
// the bottom row.
std::vector<NormalizationRow> normalization_map(double zeta, int frame_height);

void write_normalization_csv(const std::vector<NormalizationRow>& rows,
                             std::ostream& out);

}  // namespace flowpersp::app
