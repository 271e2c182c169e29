#include "flowpersp/flow.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "flowpersp/errors.hpp"

namespace flowpersp {

double quantize(double value) {
  return std::round(value * 1000.0) / 1000.0 + 0.0;
}

double MotionVector::magnitude() const { return std::hypot(du, dv); }

bool canonical_less(const MotionVector& a, const MotionVector& b) {
  if (a.v != b.v) return a.v < b.v;
  if (a.u != b.u) return a.u < b.u;
  if (a.du != b.du) return a.du < b.du;
  return a.dv < b.dv;
}

FlowSequence::FlowSequence(int width, int height, double frame_rate,
                           std::vector<Frame> frames)
    : width_(width), height_(height), frame_rate_(frame_rate) {
  if (width <= 0 || height <= 0) {
    throw ValidationError("frame dimensions must be positive");
  }
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) {
    throw ValidationError("frame rate must be positive");
  }
  frames_.reserve(frames.size());
  for (auto& frame : frames) {
    if (frame.vectors.empty()) continue;
    if (frame.index < 0) {
      throw ValidationError("negative frame index " +
                            std::to_string(frame.index));
    }
    if (!frames_.empty() && frame.index <= frames_.back().index) {
      throw OrderingError("frame index " + std::to_string(frame.index) +
                          " does not follow " +
                          std::to_string(frames_.back().index));
    }
    for (const auto& mv : frame.vectors) {
      if (mv.t != frame.index) {
        throw ValidationError("vector with t=" + std::to_string(mv.t) +
                              " stored in frame " +
                              std::to_string(frame.index));
      }
      if (!contains(mv.u, mv.v)) {
        std::ostringstream msg;
        msg << "vector outside frame bounds in frame " << frame.index
            << " at (" << mv.u << ", " << mv.v << ")";
        throw ValidationError(msg.str());
      }
      if (!std::isfinite(mv.du) || !std::isfinite(mv.dv)) {
        throw ValidationError("non-finite displacement in frame " +
                              std::to_string(frame.index));
      }
    }
    std::sort(frame.vectors.begin(), frame.vectors.end(), canonical_less);
    frames_.push_back(std::move(frame));
  }
}

std::size_t FlowSequence::vector_count() const noexcept {
  std::size_t n = 0;
  for (const auto& f : frames_) n += f.vectors.size();
  return n;
}

bool FlowSequence::contains(double u, double v) const noexcept {
  return u >= 0.0 && v >= 0.0 && u < width_ && v < height_;
}

GridSpec::GridSpec(int rows, int cols, int frame_width, int frame_height)
    : rows_(rows),
      cols_(cols),
      frame_width_(frame_width),
      frame_height_(frame_height) {
  if (rows < 3 || cols < 3) {
    throw ArgumentError("grid needs at least 3x3 blocks, got " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (frame_width <= 0 || frame_height <= 0) {
    throw ArgumentError("grid frame dimensions must be positive");
  }
}

int GridSpec::row_of(double v) const noexcept {
  const int i = static_cast<int>(std::floor(v / block_height()));
  return std::clamp(i, 0, rows_ - 1);
}

int GridSpec::col_of(double u) const noexcept {
  const int j = static_cast<int>(std::floor(u / block_width()));
  return std::clamp(j, 0, cols_ - 1);
}

GridSpec parse_grid(std::string_view text, int frame_width, int frame_height) {
  const auto x = text.find_first_of("xX");
  int rows = 0;
  int cols = 0;
  if (x == std::string_view::npos) {
    throw ArgumentError("grid must look like ROWSxCOLS, got '" +
                        std::string(text) + "'");
  }
  const auto r = std::from_chars(text.data(), text.data() + x, rows);
  const auto c =
      std::from_chars(text.data() + x + 1, text.data() + text.size(), cols);
  if (r.ec != std::errc{} || r.ptr != text.data() + x || c.ec != std::errc{} ||
      c.ptr != text.data() + text.size()) {
    throw ArgumentError("grid must look like ROWSxCOLS, got '" +
                        std::string(text) + "'");
  }
  return GridSpec(rows, cols, frame_width, frame_height);
}

// --- FLOWLOG ----------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  // from_chars rejects a leading '+'; the format never writes one but
  // hand-authored fixtures might.
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

bool skippable(std::string_view line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '#';
}

void append_fixed3(std::string& out, double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::fixed, 3);
  out.append(buf.data(), res.ptr);
}

}  // namespace

FlowSequence parse_flow_stream(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  int width = 0;
  int height = 0;
  double frame_rate = 0.0;
  std::vector<Frame> frames;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    const auto fields = split_fields(line);

    if (!have_header) {
      int version = 0;
      if (fields.size() != 5 || fields[0] != "FLOWLOG") {
        throw FormatError(line_no,
                          "expected header 'FLOWLOG 1 <width> <height> "
                          "<frame_rate>'");
      }
      if (!parse_number(fields[1], version) || version != 1) {
        throw FormatError(line_no, "unsupported FLOWLOG version '" +
                                       std::string(fields[1]) + "'");
      }
      if (!parse_number(fields[2], width) || !parse_number(fields[3], height) ||
          !parse_number(fields[4], frame_rate) || width <= 0 || height <= 0 ||
          !(frame_rate > 0.0)) {
        throw FormatError(line_no, "invalid header dimensions or frame rate");
      }
      have_header = true;
      continue;
    }

    if (fields.size() != 5) {
      throw FormatError(line_no, "expected 5 fields '<t> <u> <v> <du> <dv>'");
    }
    MotionVector mv;
    if (!parse_number(fields[0], mv.t) || mv.t < 0) {
      throw FormatError(line_no, "invalid frame index '" +
                                     std::string(fields[0]) + "'");
    }
    double values[4];
    for (int k = 0; k < 4; ++k) {
      if (!parse_number(fields[k + 1], values[k]) ||
          !std::isfinite(values[k])) {
        throw FormatError(line_no,
                          "invalid number '" + std::string(fields[k + 1]) + "'");
      }
    }
    mv.u = quantize(values[0]);
    mv.v = quantize(values[1]);
    mv.du = quantize(values[2]);
    mv.dv = quantize(values[3]);

    if (mv.u < 0.0 || mv.v < 0.0 || mv.u >= width || mv.v >= height) {
      std::ostringstream msg;
      msg << "vector outside frame bounds in frame " << mv.t << " at ("
          << fields[1] << ", " << fields[2] << ")";
      throw ValidationError(msg.str());
    }
    if (frames.empty() || frames.back().index < mv.t) {
      frames.push_back(Frame{mv.t, {}});
    } else if (frames.back().index > mv.t) {
      throw OrderingError("line " + std::to_string(line_no) + ": frame index " +
                          std::to_string(mv.t) + " after " +
                          std::to_string(frames.back().index));
    }
    frames.back().vectors.push_back(mv);
  }
  if (!have_header) {
    throw FormatError(line_no, "missing FLOWLOG header");
  }
  return FlowSequence(width, height, frame_rate, std::move(frames));
}

FlowSequence parse_flow_stream(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_flow_stream(in);
}

FlowSequence read_flow_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_flow_stream(in);
}

void write_flow_stream(const FlowSequence& seq, std::ostream& out) {
  std::string buf;
  buf.reserve(1 << 16);
  buf += "FLOWLOG 1 ";
  buf += std::to_string(seq.width());
  buf += ' ';
  buf += std::to_string(seq.height());
  buf += ' ';
  {
    std::array<char, 64> rate{};
    const auto res =
        std::to_chars(rate.data(), rate.data() + rate.size(), seq.frame_rate());
    buf.append(rate.data(), res.ptr);
  }
  buf += '\n';
  for (const auto& frame : seq.frames()) {
    for (const auto& mv : frame.vectors) {
      buf += std::to_string(mv.t);
      buf += ' ';
      append_fixed3(buf, quantize(mv.u));
      buf += ' ';
      append_fixed3(buf, quantize(mv.v));
      buf += ' ';
      append_fixed3(buf, quantize(mv.du));
      buf += ' ';
      append_fixed3(buf, quantize(mv.dv));
      buf += '\n';
      if (buf.size() > (1 << 16) - 128) {
        out << buf;
        buf.clear();
      }
    }
  }
  out << buf;
}

std::string write_flow_stream(const FlowSequence& seq) {
  std::ostringstream out;
  write_flow_stream(seq, out);
  return out.str();
}

void write_flow_file(const FlowSequence& seq, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_flow_stream(seq, out);
  if (!out) throw Error("write failed for '" + path + "'");
}

// --- Sparsification ---------------------------------------------------------

DenseFlowField::DenseFlowField(int w, int h)
    : width(w),
      height(h),
      du(static_cast<std::size_t>(w) * h, 0.0),
      dv(static_cast<std::size_t>(w) * h, 0.0) {
  if (w <= 0 || h <= 0) throw ArgumentError("flow field must be non-empty");
}

double DenseFlowField::magnitude(int x, int y) const {
  const auto k = static_cast<std::size_t>(y) * width + x;
  return std::hypot(du[k], dv[k]);
}

std::vector<MotionVector> sparsify(const DenseFlowField& field,
                                   std::int64_t frame_index, double threshold,
                                   int radius) {
  if (!(threshold > 0.0)) throw ArgumentError("threshold must be positive");
  if (radius < 1) throw ArgumentError("NMS radius must be at least 1");

  const int w = field.width;
  const int h = field.height;
  std::vector<double> mag(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = field.magnitude(x, y);
      mag[static_cast<std::size_t>(y) * w + x] = m > threshold ? m : 0.0;
    }
  }

  std::vector<MotionVector> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag[static_cast<std::size_t>(y) * w + x];
      if (m == 0.0) continue;
      bool suppressed = false;
      for (int ny = std::max(0, y - radius);
           ny <= std::min(h - 1, y + radius) && !suppressed; ++ny) {
        for (int nx = std::max(0, x - radius); nx <= std::min(w - 1, x + radius);
             ++nx) {
          if (nx == x && ny == y) continue;
          const double n = mag[static_cast<std::size_t>(ny) * w + nx];
          if (n > m || (n == m && (ny < y || (ny == y && nx < x)))) {
            suppressed = true;
            break;
          }
        }
      }
      if (suppressed) continue;
      const auto k = static_cast<std::size_t>(y) * w + x;
      out.push_back(MotionVector{frame_index, static_cast<double>(x),
                                 static_cast<double>(y), field.du[k],
                                 field.dv[k]});
    }
  }
  return out;
}

FlowSequence apply_threshold(const FlowSequence& seq, double threshold) {
  if (!(threshold >= 0.0)) throw ArgumentError("threshold must be >= 0");
  std::vector<Frame> frames;
  frames.reserve(seq.frame_count());
  for (const auto& frame : seq.frames()) {
    Frame kept{frame.index, {}};
    for (const auto& mv : frame.vectors) {
      if (mv.magnitude() > threshold) kept.vectors.push_back(mv);
    }
    frames.push_back(std::move(kept));
  }
  return FlowSequence(seq.width(), seq.height(), seq.frame_rate(),
                      std::move(frames));
}

FlowSequence slice_fraction(const FlowSequence& seq, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ArgumentError("fraction must lie in (0, 1], got " +
                        std::to_string(fraction));
  }
  const std::size_t total = seq.frame_count();
  // The relative guard keeps products such as 0.1 * 30 from rounding up to
  // an extra frame.
  auto keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(total) * (1.0 - 1e-12)));
  keep = std::min(keep, total);
  if (total > 0) keep = std::max<std::size_t>(keep, 1);
  std::vector<Frame> frames(seq.frames().begin(),
                            seq.frames().begin() + static_cast<long>(keep));
  return FlowSequence(seq.width(), seq.height(), seq.frame_rate(),
                      std::move(frames));
}

}  // namespace flowpersp
