// Dense per-locus perspective estimator.
//
// Each cell of a fine grid keeps the time-averaged vertical image velocity
// of the vectors that start in it. The relative spatial rate of change of
// that average, (d vbar / dv) / vbar, is a local perspective estimate; the
// global estimate is a trimmed mean over all valid cells.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowpersp/flow.hpp"
#include "flowpersp/robust_stats.hpp"

namespace flowpersp {

// Per-cell running sums in fixed point (milli-pixels for dv, micro-pixels for
// speed) so that accumulation is exact: the result never depends on the
// order of vectors, frames or merges.
struct DenseCell {
  std::uint64_t count = 0;
  std::int64_t sum_dv_milli = 0;
  std::int64_t sum_speed_micro = 0;

  double mean_dv() const noexcept;
  double mean_speed() const noexcept;
  friend bool operator==(const DenseCell&, const DenseCell&) = default;
};

class DenseAccumulator {
 public:
  DenseAccumulator(int frame_width, int frame_height, int cell_size = 4);

  int frame_width() const noexcept { return frame_width_; }
  int frame_height() const noexcept { return frame_height_; }
  int cell_size() const noexcept { return cell_size_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::uint64_t total_count() const noexcept;

  const DenseCell& cell(int row, int col) const {
    return cells_[static_cast<std::size_t>(row) * cols_ + col];
  }

  // Adds a frame's vectors. Throws ValidationError for a vector outside the
  // frame; the accumulator is left unchanged in that case.
  void accumulate(std::span<const MotionVector> frame);
  void accumulate(const FlowSequence& seq);

  // Adds another accumulator's sums. Throws ArgumentError on a geometry
  // mismatch.
  void merge(const DenseAccumulator& other);

  friend bool operator==(const DenseAccumulator&,
                         const DenseAccumulator&) = default;

 private:
  int frame_width_;
  int frame_height_;
  int cell_size_;
  int rows_;
  int cols_;
  std::vector<DenseCell> cells_;
};

DenseAccumulator accumulate(DenseAccumulator acc,
                            std::span<const MotionVector> frame);
DenseAccumulator merge(DenseAccumulator a, const DenseAccumulator& b);

enum class CellStatus {
  kValid,
  kInsufficientSamples,
  kLowVelocity,
  kNoVerticalNeighbour,
};

const char* to_string(CellStatus status);

struct LocalZeta {
  std::optional<double> zeta;  // per pixel, present iff status == kValid
  CellStatus status = CellStatus::kInsufficientSamples;
  std::uint64_t count = 0;
  double mean_dv = 0.0;
};

struct LocalZetaField {
  int rows = 0;
  int cols = 0;
  int cell_size = 0;
  int frame_width = 0;
  int frame_height = 0;
  std::vector<LocalZeta> cells;

  const LocalZeta& at(int row, int col) const {
    return cells[static_cast<std::size_t>(row) * cols + col];
  }
  double centre_u(int col) const;
  double centre_v(int row) const;
  std::vector<double> valid_values() const;
  std::size_t valid_count() const;
};

struct DenseConfig {
  int cell_size = 4;
  std::uint64_t min_samples = 10;
  double velocity_epsilon = 0.2;  // pixels per frame
  // Power law between perceived scale and vertical image speed. Vertical
  // image motion of ground-plane movement is foreshortened, so its speed
  // goes as scale^2; 1 treats speed as proportional to scale.
  double velocity_exponent = 2.0;
  double trim = kDefaultTrim;
};

// Per-cell estimates. Mean vertical velocity per cell, finite difference
// across vertically adjacent valid cells (one-sided at the edge of the valid
// region), divided by the exponent times the cell's own mean.
LocalZetaField local_zeta_field(const DenseAccumulator& acc,
                                std::uint64_t min_samples = 10,
                                double velocity_epsilon = 0.2,
                                double velocity_exponent = 2.0);

struct ConsensusResult {
  double zeta = 0.0;
  std::size_t valid_cells = 0;
  std::size_t trimmed_per_tail = 0;
};

// Trimmed mean of the valid cells. Requires at least
// max(3, ceil(1 / (1 - 2 trim))) valid cells.
ConsensusResult trimmed_consensus(const LocalZetaField& field,
                                  double trim = kDefaultTrim);

struct DenseEstimate {
  double zeta = 0.0;
  ConsensusResult consensus;
  LocalZetaField field;
};

DenseEstimate estimate_dense(const FlowSequence& seq,
                             const DenseConfig& config = {});
DenseEstimate estimate_dense(const DenseAccumulator& acc,
                             const DenseConfig& config = {});

// CSV: cell_row,cell_col,centre_u,centre_v,zeta,reason
void write_field_csv(const LocalZetaField& field, std::ostream& out);

}  // namespace flowpersp
