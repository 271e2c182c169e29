// Motion-vector data model, the FLOWLOG text format, threshold/NMS
// sparsification and temporal slicing.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowpersp {

// Default sparsification threshold in pixels per frame interval.
inline constexpr double kDefaultThreshold = 1.5;

// Resolution of the stream format: 3 decimals.
inline constexpr double kMilliPixel = 1e-3;

// Rounds to the nearest milli-pixel. The result is the double a FLOWLOG
// reader would produce for the same value, so quantized data round-trips
// exactly. Negative zero is normalized to zero.
double quantize(double value);

// One sparse flow observation. Displacements are per frame interval.
struct MotionVector {
  std::int64_t t = 0;
  double u = 0.0;
  double v = 0.0;
  double du = 0.0;
  double dv = 0.0;

  double magnitude() const;
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

// Canonical order inside a frame: (v, u), then displacement.
bool canonical_less(const MotionVector& a, const MotionVector& b);

struct Frame {
  std::int64_t index = 0;
  std::vector<MotionVector> vectors;

  friend bool operator==(const Frame&, const Frame&) = default;
};

// Time-ordered frames of motion vectors plus acquisition metadata.
//
// Immutable once constructed. The constructor enforces the invariants: frame
// indices strictly increasing, every vector's t equal to its frame index,
// every position inside [0, width) x [0, height). Frames that carry no
// vectors are not stored. Vectors inside a frame are kept in canonical order.
class FlowSequence {
 public:
  FlowSequence(int width, int height, double frame_rate,
               std::vector<Frame> frames = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double frame_rate() const noexcept { return frame_rate_; }
  double frame_interval() const noexcept { return 1.0 / frame_rate_; }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  std::size_t frame_count() const noexcept { return frames_.size(); }
  std::size_t vector_count() const noexcept;
  bool empty() const noexcept { return frames_.empty(); }

  bool contains(double u, double v) const noexcept;

  friend bool operator==(const FlowSequence&, const FlowSequence&) = default;

 private:
  int width_;
  int height_;
  double frame_rate_;
  std::vector<Frame> frames_;
};

// Block/cell grid over a frame. Block height h = frame height / rows.
class GridSpec {
 public:
  GridSpec(int rows, int cols, int frame_width, int frame_height);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int frame_width() const noexcept { return frame_width_; }
  int frame_height() const noexcept { return frame_height_; }
  double block_height() const noexcept {
    return static_cast<double>(frame_height_) / rows_;
  }
  double block_width() const noexcept {
    return static_cast<double>(frame_width_) / cols_;
  }

  // Block containing an in-frame point; points on the far edge fall into the
  // last row/column.
  int row_of(double v) const noexcept;
  int col_of(double u) const noexcept;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int rows_;
  int cols_;
  int frame_width_;
  int frame_height_;
};

// Parses "ROWSxCOLS" (e.g. "10x10").
GridSpec parse_grid(std::string_view text, int frame_width, int frame_height);

// --- FLOWLOG v1 -------------------------------------------------------------

FlowSequence parse_flow_stream(std::istream& in);
FlowSequence parse_flow_stream(std::string_view text);
FlowSequence read_flow_file(const std::string& path);

void write_flow_stream(const FlowSequence& seq, std::ostream& out);
std::string write_flow_stream(const FlowSequence& seq);
void write_flow_file(const FlowSequence& seq, const std::string& path);

// --- Sparsification ---------------------------------------------------------

// Per-pixel flow for one frame, row-major.
struct DenseFlowField {
  int width = 0;
  int height = 0;
  std::vector<double> du;
  std::vector<double> dv;

  DenseFlowField(int w, int h);
  double& at_du(int x, int y) { return du[static_cast<std::size_t>(y) * width + x]; }
  double& at_dv(int x, int y) { return dv[static_cast<std::size_t>(y) * width + x]; }
  double magnitude(int x, int y) const;
};

// Keeps pixels with magnitude > threshold, then suppresses every kept pixel
// that has a kept neighbour (Chebyshev distance <= radius) with a larger
// magnitude, or with an equal magnitude at a lexicographically smaller (v, u)
// position. Output is in canonical order.
std::vector<MotionVector> sparsify(const DenseFlowField& field,
                                   std::int64_t frame_index, double threshold,
                                   int radius = 1);

// Drops vectors whose magnitude is <= threshold (frames left empty vanish).
FlowSequence apply_threshold(const FlowSequence& seq, double threshold);

// Temporal prefix holding the first ceil(fraction * frame_count) frames.
FlowSequence slice_fraction(const FlowSequence& seq, double fraction);

}  // namespace flowpersp
