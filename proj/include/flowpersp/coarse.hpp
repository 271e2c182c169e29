// Coarse block-level perspective estimator.
//
// The frame is split into a grid of equal blocks. For every block we keep
// the mean motion magnitude m of vectors starting in it and, for each of its
// eight neighbours, how many vectors entered it from that neighbour. A
// block's m is modelled as a mixture of its neighbours' m, with the rows
// above scaled by omega and the rows below by 1/omega:
//
//   m(i,j) = rho_l m(i,j-1) + rho_r m(i,j+1)
//          + (rho_tl + rho_t + rho_tr) m(i-1,j) * omega
//          + (rho_bl + rho_b + rho_br) m(i+1,j) / omega
//
// The least-squares omega over all interior blocks gives the per-pixel
// relative scale change zeta = (1 - omega^(-1/2)) / h for block height h.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowpersp/flow.hpp"

namespace flowpersp {

// Neighbour a vector came from, seen from the block it entered.
enum class Direction : int {
  kTopLeft = 0,
  kTop,
  kTopRight,
  kLeft,
  kRight,
  kBottomLeft,
  kBottom,
  kBottomRight,
};
inline constexpr int kDirectionCount = 8;

const char* to_string(Direction d);

// Direction pointing from block (row, col) toward an 8-neighbour
// (from_row, from_col); nullopt when it is not an 8-neighbour.
std::optional<Direction> direction_toward(int row, int col, int from_row,
                                          int from_col);

struct BlockCell {
  std::uint64_t count = 0;              // vectors starting here
  std::int64_t sum_magnitude_micro = 0;  // fixed point, micro-pixels
  std::array<std::uint64_t, kDirectionCount> transitions{};
  std::uint64_t intra = 0;  // vectors starting and ending here

  double mean_magnitude() const noexcept;
  std::uint64_t transition_total() const noexcept;
  friend bool operator==(const BlockCell&, const BlockCell&) = default;
};

// Mergeable per-block counts. Exact integer sums: accumulation order,
// partitioning and merge order never change the result.
class BlockStats {
 public:
  explicit BlockStats(GridSpec grid);

  const GridSpec& grid() const noexcept { return grid_; }
  const BlockCell& at(int row, int col) const {
    return cells_[static_cast<std::size_t>(row) * grid_.cols() + col];
  }

  // Magnitude goes to the start block. The displacement segment is traced
  // through the grid; every block it enters whose start block is an
  // 8-neighbour gets one transition from that direction. A vector that ends
  // in its start block counts as intra-block. Throws ValidationError for a
  // start point outside the frame (the stats are left unchanged).
  void accumulate(std::span<const MotionVector> frame);
  void accumulate(const FlowSequence& seq);
  void merge(const BlockStats& other);

  friend bool operator==(const BlockStats&, const BlockStats&) = default;

 private:
  void add(const MotionVector& mv);

  GridSpec grid_;
  std::vector<BlockCell> cells_;
};

BlockStats accumulate_blocks(BlockStats stats,
                             std::span<const MotionVector> frame);

// Blocks the segment (u, v) -> (u + du, v + dv) enters after leaving its
// start block, in order, limited to the grid.
std::vector<std::pair<int, int>> trace_segment(const GridSpec& grid, double u,
                                               double v, double du, double dv);

enum class RhoDenominator {
  kAll,          // eight transition counts + intra-block count
  kTransitions,  // eight transition counts only
};

const char* to_string(RhoDenominator d);

struct BlockProportions {
  std::array<double, kDirectionCount> rho{};
  double intra = 0.0;  // intra / (transitions + intra), either denominator
  bool empty = true;   // nothing ended here (or no transitions, for
                       // kTransitions)

  double rho_sum() const noexcept;
  double top() const noexcept;     // tl + t + tr
  double bottom() const noexcept;  // bl + b + br
  double at(Direction d) const noexcept { return rho[static_cast<int>(d)]; }
};

struct FinalizedBlocks {
  BlockStats stats;
  RhoDenominator denominator = RhoDenominator::kTransitions;
  std::vector<BlockProportions> proportions;

  const BlockProportions& at(int row, int col) const {
    return proportions[static_cast<std::size_t>(row) * stats.grid().cols() + col];
  }
};

FinalizedBlocks finalize_proportions(
    const BlockStats& stats,
    RhoDenominator denominator = RhoDenominator::kTransitions);

// One interior block's equation. `top`, `bottom` and `lateral` are the
// rho-weighted neighbour magnitudes; `m` is the block's own.
struct BlockConstraint {
  int row = 0;
  int col = 0;
  double m = 0.0;
  double lateral = 0.0;
  double top = 0.0;
  double bottom = 0.0;
  double a = 0.0;  // top - bottom
  double b = 0.0;  // m - lateral - top - bottom

  // Exact mixture residual at scale factor omega.
  double residual(double omega) const noexcept {
    return m - lateral - top * omega - bottom / omega;
  }
};

inline constexpr std::uint64_t kDefaultMinBlockCount = 5;

// One equation per interior block with at least `min_block_count` vectors,
// m > 0 and some vertical transition. Linearized around omega = 1 as
// a * delta_omega = b. Throws InsufficientDataError if none qualify.
std::vector<BlockConstraint> build_constraints(
    const FinalizedBlocks& blocks,
    std::uint64_t min_block_count = kDefaultMinBlockCount);

enum class SolverKind { kClosedForm, kIterative };

const char* to_string(SolverKind s);

struct OmegaEstimate {
  double omega = 1.0;
  double delta_omega = 0.0;
  double zeta = 0.0;  // per pixel
  double block_height = 0.0;
  double residual = 0.0;  // L2 norm of the solver's residual vector
  std::size_t constraints = 0;
  SolverKind solver = SolverKind::kClosedForm;
  int iterations = 0;
};

double zeta_from_omega(double omega, double block_height);

// Builds an estimate whose zeta is derived from omega. Throws
// DivergenceError when omega <= 0.
OmegaEstimate make_omega_estimate(double omega, double block_height);

// delta_omega = sum(a b) / sum(a^2).
OmegaEstimate solve_closed_form(std::span<const BlockConstraint> constraints,
                                double block_height);

// Sum of squared exact residuals.
double mixture_objective(std::span<const BlockConstraint> constraints,
                         double omega);

struct IterativeOptions {
  int max_iterations = 100;
  double tolerance = 1e-12;  // on the absolute objective change
};

// Damped Newton on the exact objective over omega > 0 starting at 1, with a
// golden-section fallback where Newton cannot descend. Throws
// NonConvergenceError after max_iterations.
OmegaEstimate solve_iterative(std::span<const BlockConstraint> constraints,
                              double block_height,
                              const IterativeOptions& options = {});

struct CoarseConfig {
  SolverKind solver = SolverKind::kClosedForm;
  RhoDenominator denominator = RhoDenominator::kTransitions;
  std::uint64_t min_block_count = kDefaultMinBlockCount;
};

struct CoarseEstimate {
  OmegaEstimate omega;
  FinalizedBlocks blocks;
};

CoarseEstimate estimate_coarse(const BlockStats& stats,
                               const CoarseConfig& config = {});
CoarseEstimate estimate_coarse(const FlowSequence& seq, const GridSpec& grid,
                               const CoarseConfig& config = {});

// CSV: i,j,count,m,rho_tl..rho_br,rho_intra,transitions,intra
void write_blocks_csv(const FinalizedBlocks& blocks, std::ostream& out);

// Single-line JSON object: omega, delta_omega, zeta, block_height, residual,
// constraints, solver, iterations.
std::string to_json(const OmegaEstimate& est);

}  // namespace flowpersp
