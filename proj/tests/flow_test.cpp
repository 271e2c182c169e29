#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "flowpersp/errors.hpp"
#include "flowpersp/flow.hpp"
#include "test_support.hpp"

namespace flowpersp {
namespace {

using testing::random_sequence;

TEST(FlowlogParse, HeaderOnly) {
  const FlowSequence seq = parse_flow_stream("FLOWLOG 1 352 288 15\n");
  EXPECT_EQ(seq.width(), 352);
  EXPECT_EQ(seq.height(), 288);
  EXPECT_DOUBLE_EQ(seq.frame_rate(), 15.0);
  EXPECT_DOUBLE_EQ(seq.frame_interval(), 1.0 / 15.0);
  EXPECT_EQ(seq.frame_count(), 0u);
  EXPECT_TRUE(seq.empty());
}

TEST(FlowlogParse, EmptyBodyWithoutTrailingNewline) {
  const FlowSequence seq = parse_flow_stream("FLOWLOG 1 64 48 25");
  EXPECT_TRUE(seq.empty());
  EXPECT_EQ(seq.vector_count(), 0u);
}

TEST(FlowlogParse, CommentsAndBlankLinesIgnored) {
  const FlowSequence seq = parse_flow_stream(
      "# leading comment\n"
      "FLOWLOG 1 100 100 10\n"
      "\n"
      "# a record follows\n"
      "0 1.000 2.000 3.000 4.000\n");
  ASSERT_EQ(seq.frame_count(), 1u);
  EXPECT_EQ(seq.frames()[0].vectors[0], (MotionVector{0, 1, 2, 3, 4}));
}

TEST(FlowlogParse, RecordsGroupIntoFrames) {
  const FlowSequence seq = parse_flow_stream(
      "FLOWLOG 1 100 100 10\n"
      "2 5.000 9.000 1.000 0.000\n"
      "2 1.000 3.000 0.000 1.000\n"
      "7 0.500 0.500 -1.000 -2.500\n");
  ASSERT_EQ(seq.frame_count(), 2u);
  EXPECT_EQ(seq.frames()[0].index, 2);
  EXPECT_EQ(seq.frames()[1].index, 7);
  // canonical order: by v first
  EXPECT_DOUBLE_EQ(seq.frames()[0].vectors[0].v, 3.0);
  EXPECT_EQ(seq.vector_count(), 3u);
}

TEST(FlowlogParse, MalformedHeaderNamesLine) {
  try {
    parse_flow_stream("# c\nFLOWLAG 1 10 10 15\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_flow_stream("FLOWLOG 2 10 10 15\n"), FormatError);
  EXPECT_THROW(parse_flow_stream("FLOWLOG 1 0 10 15\n"), FormatError);
  EXPECT_THROW(parse_flow_stream("FLOWLOG 1 10 10 -1\n"), FormatError);
  EXPECT_THROW(parse_flow_stream(""), FormatError);
}

TEST(FlowlogParse, MalformedRecord) {
  try {
    parse_flow_stream("FLOWLOG 1 10 10 15\n0 1.000 2.000 3.000\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_flow_stream("FLOWLOG 1 10 10 15\nx 1 2 3 4\n"),
               FormatError);
  EXPECT_THROW(parse_flow_stream("FLOWLOG 1 10 10 15\n0 1 2 3 nanx\n"),
               FormatError);
}

TEST(FlowlogParse, OutOfFrameVectorIsValidationError) {
  try {
    parse_flow_stream("FLOWLOG 1 10 10 15\n3 10.000 2.000 0.000 0.000\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3"), std::string::npos);
    EXPECT_NE(msg.find("10"), std::string::npos);
  }
  EXPECT_THROW(
      parse_flow_stream("FLOWLOG 1 10 10 15\n0 -0.001 2.000 0.000 0.000\n"),
      ValidationError);
}

TEST(FlowlogParse, DecreasingFrameIndexIsOrderingError) {
  EXPECT_THROW(parse_flow_stream("FLOWLOG 1 10 10 15\n"
                                 "4 1.000 1.000 0.000 0.000\n"
                                 "3 1.000 1.000 0.000 0.000\n"),
               OrderingError);
}

TEST(FlowlogWrite, EmptySequenceIsHeaderOnly) {
  EXPECT_EQ(write_flow_stream(FlowSequence(352, 288, 15.0)),
            "FLOWLOG 1 352 288 15\n");
  EXPECT_EQ(write_flow_stream(FlowSequence(10, 20, 29.97)),
            "FLOWLOG 1 10 20 29.97\n");
}

TEST(FlowlogWrite, SingleVectorRecord) {
  const FlowSequence seq(352, 288, 15.0, {Frame{0, {{0, 10, 20, 2, 1}}}});
  EXPECT_EQ(write_flow_stream(seq),
            "FLOWLOG 1 352 288 15\n0 10.000 20.000 2.000 1.000\n");
}

TEST(FlowlogWrite, NegativeZeroPrintsAsZero) {
  const FlowSequence seq(10, 10, 15.0, {Frame{0, {{0, 1, 1, -0.0, -0.0001}}}});
  EXPECT_EQ(write_flow_stream(seq),
            "FLOWLOG 1 10 10 15\n0 1.000 1.000 0.000 0.000\n");
}

TEST(FlowlogRoundTrip, ThreeFrames) {
  const FlowSequence seq(
      64, 48, 15.0,
      {Frame{0, {{0, 1.5, 2.25, 3, -4}, {0, 10, 2.25, 0.125, 0}}},
       Frame{1, {{1, 63.999, 47.999, -0.001, 0.001}}},
       Frame{5, {{5, 0, 0, 12.5, 7.75}}}});
  const FlowSequence back = parse_flow_stream(write_flow_stream(seq));
  EXPECT_EQ(back, seq);
  ASSERT_EQ(back.frame_count(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.frames()[i].index, seq.frames()[i].index);
    EXPECT_EQ(back.frames()[i].vectors, seq.frames()[i].vectors);
  }
}

TEST(FlowlogRoundTrip, ThousandRandomSequences) {
  std::mt19937_64 rng(20240501);
  for (int i = 0; i < 1000; ++i) {
    const FlowSequence seq = random_sequence(rng);
    const std::string text = write_flow_stream(seq);
    const FlowSequence back = parse_flow_stream(text);
    ASSERT_EQ(back, seq) << "sequence " << i;
    ASSERT_EQ(write_flow_stream(back), text) << "sequence " << i;
  }
}

TEST(FlowlogRoundTrip, CanonicalReencodingOfShuffledInput) {
  const std::string shuffled =
      "FLOWLOG 1 20 20 15\n"
      "1 5.0 3.0 1 1\n"
      "1 2.0 3.0 1 1\n"
      "1 9.0 1.0 1 1\n";
  const std::string canonical =
      "FLOWLOG 1 20 20 15\n"
      "1 9.000 1.000 1.000 1.000\n"
      "1 2.000 3.000 1.000 1.000\n"
      "1 5.000 3.000 1.000 1.000\n";
  EXPECT_EQ(write_flow_stream(parse_flow_stream(shuffled)), canonical);
}

TEST(FlowSequenceCtor, RejectsBadInput) {
  EXPECT_THROW(FlowSequence(0, 10, 15.0), ValidationError);
  EXPECT_THROW(FlowSequence(10, 10, 0.0), ValidationError);
  EXPECT_THROW(FlowSequence(10, 10, 15.0,
                            {Frame{2, {{2, 1, 1, 0, 0}}},
                             Frame{2, {{2, 1, 1, 0, 0}}}}),
               OrderingError);
  EXPECT_THROW(FlowSequence(10, 10, 15.0, {Frame{2, {{3, 1, 1, 0, 0}}}}),
               ValidationError);
  EXPECT_THROW(FlowSequence(10, 10, 15.0, {Frame{0, {{0, 1, 10, 0, 0}}}}),
               ValidationError);
}

TEST(FlowSequenceCtor, DropsEmptyFrames) {
  const FlowSequence seq(10, 10, 15.0,
                         {Frame{0, {}}, Frame{1, {{1, 1, 1, 0, 0}}}});
  ASSERT_EQ(seq.frame_count(), 1u);
  EXPECT_EQ(seq.frames()[0].index, 1);
}

// brute force over a 3x3 window: a pixel survives when it clears the
// threshold and no window neighbour beats it (ties to the smaller (v, u))
std::vector<std::pair<int, int>> brute_nms(const DenseFlowField& f,
                                           double thr) {
  std::vector<std::pair<int, int>> keep;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const double m = f.magnitude(x, y);
      if (!(m > thr)) continue;
      bool best = true;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= f.width ||
              ny >= f.height) {
            continue;
          }
          const double n = f.magnitude(nx, ny);
          if (!(n > thr)) continue;
          if (n > m || (n == m && std::pair(ny, nx) < std::pair(y, x))) {
            best = false;
          }
        }
      }
      if (best) keep.emplace_back(y, x);
    }
  }
  return keep;
}

TEST(Sparsify, AllZeroFieldIsEmpty) {
  DenseFlowField f(16, 12);
  EXPECT_TRUE(sparsify(f, 0, 1.5).empty());
}

TEST(Sparsify, SinglePixelSurvives) {
  DenseFlowField f(9, 9);
  f.at_du(4, 6) = 2.0;
  const auto out = sparsify(f, 3, 1.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (MotionVector{3, 4, 6, 2.0, 0.0}));
}

TEST(Sparsify, CornerBeatsCentre) {
  DenseFlowField f(3, 3);
  f.at_dv(1, 1) = 1.6;
  f.at_du(2, 0) = 1.8;
  const auto out = sparsify(f, 0, 1.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].u, 2.0);
  EXPECT_DOUBLE_EQ(out[0].v, 0.0);
  EXPECT_EQ(brute_nms(f, 1.5), (std::vector<std::pair<int, int>>{{0, 2}}));
}

TEST(Sparsify, MagnitudeAtThresholdIsDropped) {
  DenseFlowField f(3, 3);
  f.at_du(1, 1) = 1.5;
  EXPECT_TRUE(sparsify(f, 0, 1.5).empty());
}

TEST(Sparsify, TieKeepsLexicographicallySmallest) {
  DenseFlowField f(4, 4);
  f.at_du(2, 1) = 3.0;
  f.at_du(1, 2) = 3.0;
  const auto out = sparsify(f, 0, 1.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].v, 1.0);
  EXPECT_DOUBLE_EQ(out[0].u, 2.0);
}

TEST(Sparsify, RejectsBadParameters) {
  DenseFlowField f(3, 3);
  EXPECT_THROW(sparsify(f, 0, 0.0), ArgumentError);
  EXPECT_THROW(sparsify(f, 0, 1.5, 0), ArgumentError);
}

TEST(Sparsify, LargerRadiusSuppressesMore) {
  DenseFlowField f(7, 1);
  f.at_du(0, 0) = 3.0;
  f.at_du(2, 0) = 2.0;
  EXPECT_EQ(sparsify(f, 0, 1.5, 1).size(), 2u);
  EXPECT_EQ(sparsify(f, 0, 1.5, 2).size(), 1u);
}

TEST(SparsifyProperty, MatchesBruteForceAndKeepsInvariants) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 14);
  std::uniform_int_distribution<int> level(0, 8);
  for (int trial = 0; trial < 300; ++trial) {
    DenseFlowField f(dim(rng), dim(rng));
    for (int y = 0; y < f.height; ++y) {
      for (int x = 0; x < f.width; ++x) {
        // coarse levels make ties common
        f.at_du(x, y) = 0.5 * level(rng);
        f.at_dv(x, y) = 0.0;
      }
    }
    const double thr = 1.5;
    const auto out = sparsify(f, trial, thr);
    std::vector<std::pair<int, int>> got;
    for (const auto& mv : out) {
      EXPECT_GT(mv.magnitude(), thr);
      EXPECT_EQ(mv.t, trial);
      got.emplace_back(static_cast<int>(mv.v), static_cast<int>(mv.u));
    }
    EXPECT_EQ(got, brute_nms(f, thr)) << "trial " << trial;
    for (const auto& a : out) {
      for (const auto& b : out) {
        if (&a == &b) continue;
        const bool adjacent =
            std::abs(a.u - b.u) <= 1.0 && std::abs(a.v - b.v) <= 1.0;
        if (adjacent) EXPECT_EQ(a.magnitude(), b.magnitude());
      }
    }
  }
}

FlowSequence numbered_frames(int n) {
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) frames.push_back(Frame{i, {{i, 1, 1, 2, 0}}});
  return FlowSequence(8, 8, 15.0, std::move(frames));
}

TEST(SliceFraction, FullFractionIsIdentity) {
  const FlowSequence seq = numbered_frames(9);
  EXPECT_EQ(slice_fraction(seq, 1.0), seq);
}

TEST(SliceFraction, CeilRule) {
  EXPECT_EQ(slice_fraction(numbered_frames(8), 0.125).frame_count(), 1u);
  EXPECT_EQ(slice_fraction(numbered_frames(9), 0.5).frame_count(), 5u);
  // enumerate the ceil rule for 9 frames
  const FlowSequence nine = numbered_frames(9);
  for (int k = 1; k <= 9; ++k) {
    const double f = k / 9.0;
    EXPECT_EQ(slice_fraction(nine, f).frame_count(), static_cast<std::size_t>(k));
  }
  EXPECT_EQ(slice_fraction(nine, 0.01).frame_count(), 1u);
}

TEST(SliceFraction, KeepsMetadata) {
  const FlowSequence s = slice_fraction(numbered_frames(4), 0.5);
  EXPECT_EQ(s.width(), 8);
  EXPECT_EQ(s.height(), 8);
  EXPECT_DOUBLE_EQ(s.frame_rate(), 15.0);
}

TEST(SliceFraction, RejectsOutOfRange) {
  const FlowSequence seq = numbered_frames(3);
  EXPECT_THROW(slice_fraction(seq, 0.0), ArgumentError);
  EXPECT_THROW(slice_fraction(seq, 1.01), ArgumentError);
  EXPECT_THROW(slice_fraction(seq, -0.5), ArgumentError);
  EXPECT_THROW(slice_fraction(seq, std::nan("")), ArgumentError);
}

TEST(SliceFractionProperty, Monotone) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> frac(1e-6, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const FlowSequence seq = random_sequence(rng, 20, 2);
    double f1 = frac(rng);
    double f2 = frac(rng);
    if (f1 > f2) std::swap(f1, f2);
    const auto a = slice_fraction(seq, f1).frames();
    const auto b = slice_fraction(seq, f2).frames();
    ASSERT_LE(a.size(), b.size());
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(ApplyThreshold, KeepsStrictlyLargerMagnitudes) {
  const FlowSequence seq(10, 10, 15.0,
                         {Frame{0, {{0, 1, 1, 1.5, 0}, {0, 2, 2, 0, 1.501}}},
                          Frame{1, {{1, 1, 1, 1, 1}}}});
  const FlowSequence out = apply_threshold(seq, 1.5);
  ASSERT_EQ(out.frame_count(), 1u);
  ASSERT_EQ(out.frames()[0].vectors.size(), 1u);
  EXPECT_DOUBLE_EQ(out.frames()[0].vectors[0].dv, 1.501);
}

TEST(GridSpec, Geometry) {
  const GridSpec g(10, 10, 352, 288);
  EXPECT_DOUBLE_EQ(g.block_height(), 28.8);
  EXPECT_DOUBLE_EQ(g.block_width(), 35.2);
  EXPECT_EQ(g.row_of(0.0), 0);
  EXPECT_EQ(g.row_of(28.79), 0);
  EXPECT_EQ(g.row_of(28.8), 1);
  EXPECT_EQ(g.row_of(287.999), 9);
  EXPECT_EQ(g.col_of(351.9), 9);
}

TEST(GridSpec, ParseAndReject) {
  EXPECT_EQ(parse_grid("10x10", 352, 288), GridSpec(10, 10, 352, 288));
  EXPECT_EQ(parse_grid("4x6", 352, 288).cols(), 6);
  EXPECT_THROW(parse_grid("2x10", 352, 288), ArgumentError);
  EXPECT_THROW(parse_grid("10", 352, 288), ArgumentError);
  EXPECT_THROW(parse_grid("ax3", 352, 288), ArgumentError);
  EXPECT_THROW(GridSpec(3, 3, 0, 10), ArgumentError);
}

TEST(Quantize, MilliPixelLattice) {
  EXPECT_DOUBLE_EQ(quantize(1.23449), 1.234);
  EXPECT_DOUBLE_EQ(quantize(-2.0006), -2.001);
  EXPECT_FALSE(std::signbit(quantize(-0.0001)));
}

}  // namespace
}  // namespace flowpersp
