#include "flowpersp/dense.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "flowpersp/errors.hpp"
#include "flowpersp/format.hpp"

namespace flowpersp {

namespace {

constexpr double kMilli = 1e3;
constexpr double kMicro = 1e6;

}  // namespace

double DenseCell::mean_dv() const noexcept {
  return count == 0 ? 0.0
                    : static_cast<double>(sum_dv_milli) /
                          (kMilli * static_cast<double>(count));
}

double DenseCell::mean_speed() const noexcept {
  return count == 0 ? 0.0
                    : static_cast<double>(sum_speed_micro) /
                          (kMicro * static_cast<double>(count));
}

DenseAccumulator::DenseAccumulator(int frame_width, int frame_height,
                                   int cell_size)
    : frame_width_(frame_width),
      frame_height_(frame_height),
      cell_size_(cell_size) {
  if (frame_width <= 0 || frame_height <= 0) {
    throw ArgumentError("frame dimensions must be positive");
  }
  if (cell_size <= 0) throw ArgumentError("cell size must be positive");
  rows_ = (frame_height + cell_size - 1) / cell_size;
  cols_ = (frame_width + cell_size - 1) / cell_size;
  cells_.resize(static_cast<std::size_t>(rows_) * cols_);
}

std::uint64_t DenseAccumulator::total_count() const noexcept {
  std::uint64_t n = 0;
  for (const auto& c : cells_) n += c.count;
  return n;
}

void DenseAccumulator::accumulate(std::span<const MotionVector> frame) {
  for (const auto& mv : frame) {
    if (!(mv.u >= 0.0 && mv.v >= 0.0 && mv.u < frame_width_ &&
          mv.v < frame_height_)) {
      std::ostringstream msg;
      msg << "vector outside accumulator frame in frame " << mv.t << " at ("
          << mv.u << ", " << mv.v << ")";
      throw ValidationError(msg.str());
    }
  }
  for (const auto& mv : frame) {
    const int row = static_cast<int>(mv.v) / cell_size_;
    const int col = static_cast<int>(mv.u) / cell_size_;
    auto& cell = cells_[static_cast<std::size_t>(row) * cols_ + col];
    cell.count += 1;
    cell.sum_dv_milli += std::llround(mv.dv * kMilli);
    cell.sum_speed_micro += std::llround(mv.magnitude() * kMicro);
  }
}

void DenseAccumulator::accumulate(const FlowSequence& seq) {
  if (seq.width() != frame_width_ || seq.height() != frame_height_) {
    throw ArgumentError("sequence and accumulator frame sizes differ");
  }
  for (const auto& frame : seq.frames()) accumulate(frame.vectors);
}

void DenseAccumulator::merge(const DenseAccumulator& other) {
  if (other.frame_width_ != frame_width_ ||
      other.frame_height_ != frame_height_ ||
      other.cell_size_ != cell_size_) {
    throw ArgumentError("cannot merge accumulators with different geometry");
  }
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    cells_[k].count += other.cells_[k].count;
    cells_[k].sum_dv_milli += other.cells_[k].sum_dv_milli;
    cells_[k].sum_speed_micro += other.cells_[k].sum_speed_micro;
  }
}

DenseAccumulator accumulate(DenseAccumulator acc,
                            std::span<const MotionVector> frame) {
  acc.accumulate(frame);
  return acc;
}

DenseAccumulator merge(DenseAccumulator a, const DenseAccumulator& b) {
  a.merge(b);
  return a;
}

const char* to_string(CellStatus status) {
  switch (status) {
    case CellStatus::kValid:
      return "ok";
    case CellStatus::kInsufficientSamples:
      return "insufficient_samples";
    case CellStatus::kLowVelocity:
      return "low_velocity";
    case CellStatus::kNoVerticalNeighbour:
      return "no_vertical_neighbour";
  }
  return "unknown";
}

double LocalZetaField::centre_u(int col) const {
  const double lo = static_cast<double>(col) * cell_size;
  const double hi = std::min<double>((col + 1.0) * cell_size, frame_width);
  return 0.5 * (lo + hi);
}

double LocalZetaField::centre_v(int row) const {
  const double lo = static_cast<double>(row) * cell_size;
  const double hi = std::min<double>((row + 1.0) * cell_size, frame_height);
  return 0.5 * (lo + hi);
}

std::vector<double> LocalZetaField::valid_values() const {
  std::vector<double> out;
  for (const auto& c : cells) {
    if (c.zeta) out.push_back(*c.zeta);
  }
  return out;
}

std::size_t LocalZetaField::valid_count() const {
  return static_cast<std::size_t>(std::count_if(
      cells.begin(), cells.end(), [](const LocalZeta& c) { return c.zeta; }));
}

LocalZetaField local_zeta_field(const DenseAccumulator& acc,
                                std::uint64_t min_samples,
                                double velocity_epsilon,
                                double velocity_exponent) {
  if (min_samples < 1) throw ArgumentError("min_samples must be >= 1");
  if (!(velocity_epsilon > 0.0)) {
    throw ArgumentError("velocity_epsilon must be positive");
  }
  if (!(velocity_exponent > 0.0)) {
    throw ArgumentError("velocity_exponent must be positive");
  }

  LocalZetaField field;
  field.rows = acc.rows();
  field.cols = acc.cols();
  field.cell_size = acc.cell_size();
  field.frame_width = acc.frame_width();
  field.frame_height = acc.frame_height();
  field.cells.resize(static_cast<std::size_t>(field.rows) * field.cols);

  std::vector<std::optional<double>> column(static_cast<std::size_t>(field.rows));
  for (int col = 0; col < field.cols; ++col) {
    for (int row = 0; row < field.rows; ++row) {
      const DenseCell& cell = acc.cell(row, col);
      LocalZeta& out = field.cells[static_cast<std::size_t>(row) * field.cols + col];
      out.count = cell.count;
      out.mean_dv = cell.mean_dv();
      column[static_cast<std::size_t>(row)].reset();
      if (cell.count < min_samples) {
        out.status = CellStatus::kInsufficientSamples;
      } else if (std::abs(out.mean_dv) < velocity_epsilon) {
        out.status = CellStatus::kLowVelocity;
      } else {
        out.status = CellStatus::kValid;
        column[static_cast<std::size_t>(row)] = out.mean_dv;
      }
    }
    const auto slope = central_diff(column, static_cast<double>(field.cell_size));
    for (int row = 0; row < field.rows; ++row) {
      LocalZeta& out = field.cells[static_cast<std::size_t>(row) * field.cols + col];
      if (out.status != CellStatus::kValid) continue;
      const auto& d = slope[static_cast<std::size_t>(row)];
      if (!d) {
        out.status = CellStatus::kNoVerticalNeighbour;
        continue;
      }
      out.zeta = *d / (velocity_exponent * out.mean_dv);
    }
  }
  return field;
}

ConsensusResult trimmed_consensus(const LocalZetaField& field, double trim) {
  const TrimSpec spec(trim);
  const std::vector<double> values = field.valid_values();
  const auto needed = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::ceil(1.0 / (1.0 - 2.0 * trim) - 1e-12)));
  if (values.size() < needed) {
    throw InsufficientDataError(values.size(),
                                "too few valid cells for trimmed consensus");
  }
  ConsensusResult result;
  result.zeta = trimmed_mean(values, spec);
  result.valid_cells = values.size();
  result.trimmed_per_tail = spec.per_tail(values.size());
  return result;
}

DenseEstimate estimate_dense(const DenseAccumulator& acc,
                             const DenseConfig& config) {
  DenseEstimate est;
  est.field = local_zeta_field(acc, config.min_samples, config.velocity_epsilon,
                               config.velocity_exponent);
  est.consensus = trimmed_consensus(est.field, config.trim);
  est.zeta = est.consensus.zeta;
  return est;
}

DenseEstimate estimate_dense(const FlowSequence& seq,
                             const DenseConfig& config) {
  if (seq.empty()) {
    throw InsufficientDataError(0, "empty flow sequence");
  }
  DenseAccumulator acc(seq.width(), seq.height(), config.cell_size);
  acc.accumulate(seq);
  return estimate_dense(acc, config);
}

void write_field_csv(const LocalZetaField& field, std::ostream& out) {
  out << "cell_row,cell_col,centre_u,centre_v,zeta,reason\n";
  for (int row = 0; row < field.rows; ++row) {
    for (int col = 0; col < field.cols; ++col) {
      const LocalZeta& c = field.at(row, col);
      out << row << ',' << col << ',' << format_sig(field.centre_u(col)) << ','
          << format_sig(field.centre_v(row)) << ','
          << (c.zeta ? format_sig(*c.zeta) : std::string{}) << ','
          << to_string(c.status) << '\n';
    }
  }
}

}  // namespace flowpersp
