#include "flowpersp/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "flowpersp/errors.hpp"
#include "flowpersp/format.hpp"
#include "flowpersp/robust_stats.hpp"

namespace flowpersp {

namespace {

constexpr double kMicro = 1e6;
constexpr std::array<const char*, kDirectionCount> kDirectionNames = {
    "tl", "t", "tr", "l", "r", "bl", "b", "br"};

}  // namespace

const char* to_string(Direction d) {
  return kDirectionNames[static_cast<std::size_t>(d)];
}

std::optional<Direction> direction_toward(int row, int col, int from_row,
                                          int from_col) {
  const int di = from_row - row;
  const int dj = from_col - col;
  if (std::abs(di) > 1 || std::abs(dj) > 1 || (di == 0 && dj == 0)) {
    return std::nullopt;
  }
  static constexpr Direction table[3][3] = {
      {Direction::kTopLeft, Direction::kTop, Direction::kTopRight},
      {Direction::kLeft, Direction::kLeft /* unused */, Direction::kRight},
      {Direction::kBottomLeft, Direction::kBottom, Direction::kBottomRight}};
  return table[di + 1][dj + 1];
}

double BlockCell::mean_magnitude() const noexcept {
  return count == 0 ? 0.0
                    : static_cast<double>(sum_magnitude_micro) /
                          (kMicro * static_cast<double>(count));
}

std::uint64_t BlockCell::transition_total() const noexcept {
  return std::accumulate(transitions.begin(), transitions.end(),
                         std::uint64_t{0});
}

BlockStats::BlockStats(GridSpec grid)
    : grid_(grid),
      cells_(static_cast<std::size_t>(grid.rows()) * grid.cols()) {}

std::vector<std::pair<int, int>> trace_segment(const GridSpec& grid, double u,
                                               double v, double du, double dv) {
  // Amanatides-Woo traversal in block units. A crossing in the negative
  // direction only counts if it happens strictly before the end point, so
  // the final block always agrees with floor() of the end point.
  const double bw = grid.block_width();
  const double bh = grid.block_height();
  const double x0 = u / bw;
  const double y0 = v / bh;
  const double dx = du / bw;
  const double dy = dv / bh;
  int i = grid.row_of(v);
  int j = grid.col_of(u);
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  double t_max_x = step_x > 0   ? (j + 1 - x0) / dx
                   : step_x < 0 ? (x0 - j) / -dx
                                : inf;
  double t_max_y = step_y > 0   ? (i + 1 - y0) / dy
                   : step_y < 0 ? (y0 - i) / -dy
                                : inf;
  const double t_delta_x = step_x != 0 ? 1.0 / std::abs(dx) : inf;
  const double t_delta_y = step_y != 0 ? 1.0 / std::abs(dy) : inf;

  std::vector<std::pair<int, int>> entered;
  for (;;) {
    const bool due_x = step_x > 0 ? t_max_x <= 1.0 : t_max_x < 1.0;
    const bool due_y = step_y > 0 ? t_max_y <= 1.0 : t_max_y < 1.0;
    if (!due_x && !due_y) break;
    if (due_x && due_y && t_max_x == t_max_y) {
      j += step_x;
      i += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    } else if (due_x && (!due_y || t_max_x < t_max_y)) {
      j += step_x;
      t_max_x += t_delta_x;
    } else {
      i += step_y;
      t_max_y += t_delta_y;
    }
    if (i < 0 || j < 0 || i >= grid.rows() || j >= grid.cols()) break;
    entered.emplace_back(i, j);
  }
  return entered;
}

void BlockStats::add(const MotionVector& mv) {
  const int i0 = grid_.row_of(mv.v);
  const int j0 = grid_.col_of(mv.u);
  BlockCell& start = cells_[static_cast<std::size_t>(i0) * grid_.cols() + j0];
  start.count += 1;
  start.sum_magnitude_micro += std::llround(mv.magnitude() * kMicro);

  const auto entered = trace_segment(grid_, mv.u, mv.v, mv.du, mv.dv);
  if (entered.empty()) {
    const double eu = mv.u + mv.du;
    const double ev = mv.v + mv.dv;
    // Ends in its own block unless it leaves the frame straight away.
    if (eu >= 0.0 && ev >= 0.0 && eu < grid_.frame_width() &&
        ev < grid_.frame_height()) {
      start.intra += 1;
    }
    return;
  }
  for (const auto& [i, j] : entered) {
    const auto dir = direction_toward(i, j, i0, j0);
    if (!dir) continue;  // long vectors: origin is not an 8-neighbour
    cells_[static_cast<std::size_t>(i) * grid_.cols() + j]
        .transitions[static_cast<std::size_t>(*dir)] += 1;
  }
}

void BlockStats::accumulate(std::span<const MotionVector> frame) {
  for (const auto& mv : frame) {
    if (!(mv.u >= 0.0 && mv.v >= 0.0 && mv.u < grid_.frame_width() &&
          mv.v < grid_.frame_height())) {
      std::ostringstream msg;
      msg << "vector outside block grid in frame " << mv.t << " at (" << mv.u
          << ", " << mv.v << ")";
      throw ValidationError(msg.str());
    }
  }
  for (const auto& mv : frame) add(mv);
}

void BlockStats::accumulate(const FlowSequence& seq) {
  if (seq.width() != grid_.frame_width() ||
      seq.height() != grid_.frame_height()) {
    throw ArgumentError("sequence and grid frame sizes differ");
  }
  for (const auto& frame : seq.frames()) accumulate(frame.vectors);
}

void BlockStats::merge(const BlockStats& other) {
  if (!(other.grid_ == grid_)) {
    throw ArgumentError("cannot merge block stats over different grids");
  }
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    BlockCell& a = cells_[k];
    const BlockCell& b = other.cells_[k];
    a.count += b.count;
    a.sum_magnitude_micro += b.sum_magnitude_micro;
    a.intra += b.intra;
    for (int d = 0; d < kDirectionCount; ++d) {
      a.transitions[static_cast<std::size_t>(d)] +=
          b.transitions[static_cast<std::size_t>(d)];
    }
  }
}

BlockStats accumulate_blocks(BlockStats stats,
                             std::span<const MotionVector> frame) {
  stats.accumulate(frame);
  return stats;
}

const char* to_string(RhoDenominator d) {
  return d == RhoDenominator::kAll ? "all" : "transitions";
}

double BlockProportions::rho_sum() const noexcept {
  return std::accumulate(rho.begin(), rho.end(), 0.0);
}

double BlockProportions::top() const noexcept {
  return at(Direction::kTopLeft) + at(Direction::kTop) + at(Direction::kTopRight);
}

double BlockProportions::bottom() const noexcept {
  return at(Direction::kBottomLeft) + at(Direction::kBottom) +
         at(Direction::kBottomRight);
}

FinalizedBlocks finalize_proportions(const BlockStats& stats,
                                     RhoDenominator denominator) {
  FinalizedBlocks out{stats, denominator, {}};
  const GridSpec& grid = stats.grid();
  out.proportions.resize(static_cast<std::size_t>(grid.rows()) * grid.cols());
  for (int i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < grid.cols(); ++j) {
      const BlockCell& cell = stats.at(i, j);
      BlockProportions& p =
          out.proportions[static_cast<std::size_t>(i) * grid.cols() + j];
      const std::uint64_t transitions = cell.transition_total();
      const std::uint64_t ending = transitions + cell.intra;
      if (ending > 0) {
        p.intra = static_cast<double>(cell.intra) / static_cast<double>(ending);
      }
      const std::uint64_t denom =
          denominator == RhoDenominator::kAll ? ending : transitions;
      if (denom == 0) continue;
      p.empty = false;
      for (int d = 0; d < kDirectionCount; ++d) {
        p.rho[static_cast<std::size_t>(d)] =
            static_cast<double>(cell.transitions[static_cast<std::size_t>(d)]) /
            static_cast<double>(denom);
      }
    }
  }
  return out;
}

std::vector<BlockConstraint> build_constraints(const FinalizedBlocks& blocks,
                                               std::uint64_t min_block_count) {
  const GridSpec& grid = blocks.stats.grid();
  std::vector<BlockConstraint> out;
  for (int i = 1; i + 1 < grid.rows(); ++i) {
    for (int j = 1; j + 1 < grid.cols(); ++j) {
      const BlockCell& cell = blocks.stats.at(i, j);
      const BlockProportions& p = blocks.at(i, j);
      if (cell.count < min_block_count || p.empty) continue;
      const double m = cell.mean_magnitude();
      if (!(m > 0.0) || p.top() + p.bottom() == 0.0) continue;

      BlockConstraint c;
      c.row = i;
      c.col = j;
      c.m = m;
      c.lateral = p.at(Direction::kLeft) * blocks.stats.at(i, j - 1).mean_magnitude() +
                  p.at(Direction::kRight) * blocks.stats.at(i, j + 1).mean_magnitude();
      c.top = p.top() * blocks.stats.at(i - 1, j).mean_magnitude();
      c.bottom = p.bottom() * blocks.stats.at(i + 1, j).mean_magnitude();
      c.a = c.top - c.bottom;
      c.b = m - c.lateral - c.top - c.bottom;
      out.push_back(c);
    }
  }
  if (out.empty()) {
    throw InsufficientDataError(0, "no usable block constraints");
  }
  return out;
}

const char* to_string(SolverKind s) {
  return s == SolverKind::kClosedForm ? "closed-form" : "iterative";
}

double zeta_from_omega(double omega, double block_height) {
  return (1.0 - 1.0 / std::sqrt(omega)) / block_height;
}

OmegaEstimate make_omega_estimate(double omega, double block_height) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw DivergenceError("scale factor omega = " + std::to_string(omega) +
                          " is not positive");
  }
  if (!(block_height > 0.0)) throw ArgumentError("block height must be positive");
  OmegaEstimate est;
  est.omega = omega;
  est.delta_omega = omega - 1.0;
  est.block_height = block_height;
  est.zeta = zeta_from_omega(omega, block_height);
  return est;
}

OmegaEstimate solve_closed_form(std::span<const BlockConstraint> constraints,
                                double block_height) {
  std::vector<LsqPair> pairs;
  pairs.reserve(constraints.size());
  for (const auto& c : constraints) pairs.push_back({c.a, c.b});
  double delta = 0.0;
  try {
    delta = scalar_lsq(pairs);
  } catch (const DegenerateSystemError&) {
    throw DegenerateSystemError(
        "no vertical transition signal: every constraint has a = 0");
  }
  OmegaEstimate est = make_omega_estimate(1.0 + delta, block_height);
  est.residual = std::sqrt(lsq_objective(pairs, delta));
  est.constraints = constraints.size();
  est.solver = SolverKind::kClosedForm;
  return est;
}

double mixture_objective(std::span<const BlockConstraint> constraints,
                         double omega) {
  double sum = 0.0;
  for (const auto& c : constraints) {
    const double r = c.residual(omega);
    sum += r * r;
  }
  return sum;
}

namespace {

double golden_section(std::span<const BlockConstraint> constraints, double lo,
                      double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = mixture_objective(constraints, c);
  double fd = mixture_objective(constraints, d);
  for (int k = 0; k < 200 && b - a > 1e-15 * std::max(1.0, b); ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = mixture_objective(constraints, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = mixture_objective(constraints, d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

OmegaEstimate solve_iterative(std::span<const BlockConstraint> constraints,
                              double block_height,
                              const IterativeOptions& options) {
  if (constraints.empty()) {
    throw InsufficientDataError(0, "no block constraints");
  }
  if (std::all_of(constraints.begin(), constraints.end(),
                  [](const BlockConstraint& c) {
                    return c.top == 0.0 && c.bottom == 0.0;
                  })) {
    throw DegenerateSystemError(
        "no vertical transition signal: every constraint has top = bottom = 0");
  }

  double omega = 1.0;
  double objective = mixture_objective(constraints, omega);
  int iterations = 0;
  bool converged = false;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    // r = m - lateral - top w - bottom / w
    double grad = 0.0;
    double hess = 0.0;
    for (const auto& c : constraints) {
      const double r = c.residual(omega);
      const double dr = -c.top + c.bottom / (omega * omega);
      const double d2r = -2.0 * c.bottom / (omega * omega * omega);
      grad += 2.0 * r * dr;
      hess += 2.0 * (dr * dr + r * d2r);
    }
    if (grad == 0.0) {
      converged = true;
      break;
    }

    double candidate = omega;
    double cand_objective = objective;
    bool accepted = false;
    if (hess > 0.0) {
      const double step = -grad / hess;
      double scale = 1.0;
      for (int k = 0; k < 60; ++k, scale *= 0.5) {
        const double w = omega + scale * step;
        if (!(w > 0.0)) continue;
        const double f = mixture_objective(constraints, w);
        if (f <= objective) {
          candidate = w;
          cand_objective = f;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      const double w = golden_section(constraints, 0.5 * omega, 2.0 * omega);
      const double f = mixture_objective(constraints, w);
      if (f <= objective) {
        candidate = w;
        cand_objective = f;
      }
    }

    const double change = std::abs(objective - cand_objective);
    omega = candidate;
    objective = cand_objective;
    iterations = iter;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NonConvergenceError(omega, "iterative omega solver did not converge");
  }
  OmegaEstimate est = make_omega_estimate(omega, block_height);
  est.residual = std::sqrt(objective);
  est.constraints = constraints.size();
  est.solver = SolverKind::kIterative;
  est.iterations = iterations;
  return est;
}

CoarseEstimate estimate_coarse(const BlockStats& stats,
                               const CoarseConfig& config) {
  CoarseEstimate out{{}, finalize_proportions(stats, config.denominator)};
  const auto constraints = build_constraints(out.blocks, config.min_block_count);
  const double h = stats.grid().block_height();
  out.omega = config.solver == SolverKind::kClosedForm
                  ? solve_closed_form(constraints, h)
                  : solve_iterative(constraints, h);
  return out;
}

CoarseEstimate estimate_coarse(const FlowSequence& seq, const GridSpec& grid,
                               const CoarseConfig& config) {
  if (seq.empty()) throw InsufficientDataError(0, "empty flow sequence");
  BlockStats stats(grid);
  stats.accumulate(seq);
  return estimate_coarse(stats, config);
}

void write_blocks_csv(const FinalizedBlocks& blocks, std::ostream& out) {
  out << "i,j,count,m";
  for (const char* name : kDirectionNames) out << ",rho_" << name;
  out << ",rho_intra,transitions,intra\n";
  const GridSpec& grid = blocks.stats.grid();
  for (int i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < grid.cols(); ++j) {
      const BlockCell& cell = blocks.stats.at(i, j);
      const BlockProportions& p = blocks.at(i, j);
      out << i << ',' << j << ',' << cell.count << ','
          << format_sig(cell.mean_magnitude());
      for (double r : p.rho) out << ',' << format_sig(r);
      out << ',' << format_sig(p.intra) << ',' << cell.transition_total() << ','
          << cell.intra << '\n';
    }
  }
}

std::string to_json(const OmegaEstimate& est) {
  nlohmann::ordered_json j;
  j["omega"] = est.omega;
  j["delta_omega"] = est.delta_omega;
  j["zeta"] = est.zeta;
  j["block_height"] = est.block_height;
  j["residual"] = est.residual;
  j["constraints"] = est.constraints;
  j["solver"] = to_string(est.solver);
  j["iterations"] = est.iterations;
  return j.dump();
}

}  // namespace flowpersp
