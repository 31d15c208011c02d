#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rppg/error.hpp"
#include "rppg/postproc.hpp"
#include "rppg/pulse.hpp"

using namespace rppg;

namespace {

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no rppg::Error thrown";
  return ErrorKind::kIo;
}

ColorEmbedding Vector(const std::vector<double>& v) {
  ColorEmbedding e;
  e.values = v;
  e.values.resize(ColorEmbedding::ExpectedLength(EmbeddingMode::kBackground), 0.0);
  return e;
}

std::vector<double> RandomValues(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 255.0);
  std::vector<double> v(900);
  for (double& x : v) x = u(rng);
  return v;
}

ColorEmbedding Jitter(const std::vector<double>& base, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> v = base;
  for (double& x : v) x += n(rng);
  return Vector(v);
}

Image Halves(int w, int h, std::array<std::uint8_t, 3> left, std::array<std::uint8_t, 3> right) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = x < w / 2 ? left[c] : right[c];
  return img;
}

Image Textured(int w, int h, std::uint64_t seed) {
  return fixture::RandomClip(w, h, 1, seed).frames[0];
}

}  // namespace

TEST(BackgroundEmbedding, UniformFrame) {
  const ColorEmbedding e = BackgroundEmbedding(fixture::Solid(320, 240, 10, 20, 30));
  ASSERT_EQ(e.values.size(), 900u);
  EXPECT_FALSE(e.clipped);
  for (std::size_t i = 0; i < 900; ++i) EXPECT_EQ(e.values[i], (i % 3 + 1) * 10.0);
  const ColorEmbedding gray = BackgroundEmbedding(fixture::Solid(320, 240, 90, 90, 90));
  EXPECT_EQ(KindOf([&] { PearsonDistance(gray, e); }), ErrorKind::kDegenerateEmbedding);
}

TEST(BackgroundEmbedding, LeftRedRightBlue) {
  const ColorEmbedding e = BackgroundEmbedding(Halves(300, 100, {255, 0, 0}, {0, 0, 255}));
  for (std::size_t i = 0; i < 900; ++i) {
    const std::size_t c = i % 3;
    const double expect = i < 450 ? (c == 0 ? 255.0 : 0.0) : (c == 2 ? 255.0 : 0.0);
    EXPECT_EQ(e.values[i], expect) << i;
  }
}

TEST(BackgroundEmbedding, TexturedMatchesBlockMeans) {
  const Image img = Textured(400, 220, 5);
  const ColorEmbedding e = BackgroundEmbedding(img);
  auto left = oracle::BlockMeans(img, {0, 0, 150, 100}, 10, 15);
  const auto right = oracle::BlockMeans(img, {250, 0, 150, 100}, 10, 15);
  left.insert(left.end(), right.begin(), right.end());
  ASSERT_EQ(left.size(), e.values.size());
  for (std::size_t i = 0; i < left.size(); ++i) EXPECT_NEAR(e.values[i], left[i], 1e-9);
}

TEST(BackgroundEmbedding, SmallFramesAreClippedOrRejected) {
  const Image img = Textured(64, 64, 6);
  const ColorEmbedding e = BackgroundEmbedding(img);
  EXPECT_TRUE(e.clipped);
  EXPECT_EQ(e.values.size(), 900u);
  auto left = oracle::BlockMeans(img, {0, 0, 32, 64}, 10, 15);
  const auto right = oracle::BlockMeans(img, {32, 0, 32, 64}, 10, 15);
  left.insert(left.end(), right.begin(), right.end());
  for (std::size_t i = 0; i < left.size(); ++i) EXPECT_NEAR(e.values[i], left[i], 1e-9);
  EXPECT_EQ(KindOf([] { BackgroundEmbedding(fixture::Solid(20, 8, 1, 2, 3)); }), ErrorKind::kGeometry);
}

TEST(ChestEmbedding, UniformAndTwoTone) {
  const ColorEmbedding u = ChestEmbedding(fixture::Solid(1080, 500, 7, 8, 9));
  ASSERT_EQ(u.values.size(), 480u);
  EXPECT_FALSE(u.clipped);
  for (std::size_t i = 0; i < 480; ++i) EXPECT_EQ(u.values[i], 7.0 + i % 3);

  Image img = fixture::Solid(1080, 500, 0, 0, 0);
  for (int y = 500 - 210; y < 500; ++y)
    for (int x = 0; x < 1080; ++x) img.at(x, y, 1) = 200;
  for (int y = 80; y < 290; ++y)
    for (int x = 0; x < 1080; ++x) img.at(x, y, 0) = 100;
  const ColorEmbedding t = ChestEmbedding(img);
  for (std::size_t i = 0; i < 480; ++i) {
    const std::size_t c = i % 3;
    const double expect = i < 240 ? (c == 0 ? 100.0 : 0.0) : (c == 1 ? 200.0 : 0.0);
    EXPECT_EQ(t.values[i], expect) << i;
  }
}

TEST(ChestEmbedding, TexturedMatchesBlockMeans) {
  const Image img = Textured(640, 430, 7);
  const ColorEmbedding e = ChestEmbedding(img);
  EXPECT_TRUE(e.clipped);
  const auto expect = oracle::BlockMeans(img, {0, 10, 640, 420}, 8, 20);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(e.values[i], expect[i], 1e-9);
  EXPECT_EQ(KindOf([] { ChestEmbedding(fixture::Solid(1080, 419, 1, 2, 3)); }), ErrorKind::kGeometry);
}

TEST(PearsonDistance, Examples) {
  std::mt19937_64 rng(1);
  const auto a = RandomValues(rng);
  std::vector<double> neg(a.size()), affine(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    neg[i] = 300.0 - a[i];
    affine[i] = 3.0 * a[i] + 7.0;
  }
  EXPECT_NEAR(PearsonDistance(Vector(a), Vector(a)), 0.0, 1e-12);
  EXPECT_NEAR(PearsonDistance(Vector(a), Vector(neg)), 2.0, 1e-12);
  EXPECT_NEAR(PearsonDistance(Vector(a), Vector(affine)), 0.0, 1e-12);
}

TEST(PearsonDistance, SymmetricBoundedAffineInvariant) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto a = RandomValues(rng), b = RandomValues(rng);
    const double d = PearsonDistance(Vector(a), Vector(b));
    EXPECT_EQ(d, PearsonDistance(Vector(b), Vector(a)));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    std::vector<double> a2(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) a2[k] = 0.5 * a[k] - 11.0;
    EXPECT_NEAR(PearsonDistance(Vector(a2), Vector(b)), d, 1e-12);
  }
}

TEST(PearsonDistance, ModeMismatch) {
  ColorEmbedding a = Vector(std::vector<double>(900, 1.0));
  ColorEmbedding b;
  b.mode = EmbeddingMode::kChest;
  b.values.assign(480, 1.0);
  EXPECT_EQ(KindOf([&] { PearsonDistance(a, b); }), ErrorKind::kParameter);
}

TEST(GeometricSchedule, Endpoints) {
  const auto s = GeometricSchedule();
  ASSERT_EQ(s.size(), 40u);
  EXPECT_DOUBLE_EQ(s.front(), 0.01);
  EXPECT_DOUBLE_EQ(s.back(), 0.4);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_NEAR(s[i] / s[i - 1], std::pow(40.0, 1.0 / 39.0), 1e-12);
}

TEST(Dbscan, HandWorkedLine) {
  // Points on a line: {0, 1, 2} dense, {10} isolated, {20, 20.5} too sparse for min_pts 3.
  const std::vector<double> x = {0, 1, 2, 10, 20, 20.5};
  std::vector<std::vector<double>> d(x.size(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) d[i][j] = std::abs(x[i] - x[j]);
  std::vector<std::size_t> all = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(Dbscan(d, all, 1.0, 3), (std::vector<int>{0, 0, 0, -1, -1, -1}));
  EXPECT_EQ(Dbscan(d, all, 1.0, 2), (std::vector<int>{0, 0, 0, -1, 1, 1}));
  EXPECT_EQ(Dbscan(d, {3, 4, 5}, 10.0, 3), (std::vector<int>{0, 0, 0}));
}

TEST(GroupByDbscan, TwoPlantedGroups) {
  std::mt19937_64 rng(3);
  const auto g0 = RandomValues(rng), g1 = RandomValues(rng);
  std::vector<ColorEmbedding> e;
  std::vector<int> truth;
  for (int i = 0; i < 10; ++i) {
    e.push_back(Jitter(i % 2 ? g1 : g0, 0.5, rng));
    truth.push_back(i % 2);
  }
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double d = PearsonDistance(e[i], e[j]);
      if (truth[i] == truth[j]) ASSERT_LT(d, 0.005);
      else ASSERT_GT(d, 0.5);
    }
  const ClusterAssignment a = GroupByDbscan(e);
  ASSERT_EQ(a.complete_groups.size(), 2u);
  for (const auto& g : a.complete_groups) {
    ASSERT_EQ(g.size(), 5u);
    for (std::size_t i : g) EXPECT_EQ(truth[i], truth[g[0]]);
  }
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_TRUE(a.assigned(i));
}

TEST(GroupByDbscan, MutuallyDistantAllUnassigned) {
  std::mt19937_64 rng(4);
  std::vector<ColorEmbedding> e;
  for (int i = 0; i < 12; ++i) e.push_back(Vector(RandomValues(rng)));
  const ClusterAssignment a = GroupByDbscan(e);
  EXPECT_TRUE(a.complete_groups.empty());
  for (int l : a.labels) EXPECT_EQ(l, -1);
}

TEST(GroupByDbscan, OneGroupPlusStragglers) {
  std::mt19937_64 rng(5);
  const auto g = RandomValues(rng);
  std::vector<ColorEmbedding> e;
  for (int i = 0; i < 3; ++i) e.push_back(Vector(RandomValues(rng)));
  for (int i = 0; i < 5; ++i) e.push_back(Jitter(g, 0.5, rng));
  const ClusterAssignment a = GroupByDbscan(e);
  ASSERT_EQ(a.complete_groups.size(), 1u);
  EXPECT_EQ(a.complete_groups[0], (std::vector<std::size_t>{3, 4, 5, 6, 7}));
  for (int i = 0; i < 3; ++i) EXPECT_FALSE(a.assigned(i));
}

TEST(GroupByDbscan, DisjointAndDeterministic) {
  std::mt19937_64 rng(6);
  std::vector<std::vector<double>> bases;
  for (int s = 0; s < 6; ++s) bases.push_back(RandomValues(rng));
  std::vector<ColorEmbedding> e;
  for (int c = 0; c < 5; ++c)
    for (int s = 0; s < 6; ++s) e.push_back(Jitter(bases[s], 2.0 + 4.0 * s, rng));
  const ClusterAssignment a = GroupByDbscan(e, 5, GeometricSchedule(), 1);
  const ClusterAssignment b = GroupByDbscan(e, 5, GeometricSchedule(), 3);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.complete_groups, b.complete_groups);
  std::set<std::size_t> seen;
  for (std::size_t g = 0; g < a.complete_groups.size(); ++g)
    for (std::size_t i : a.complete_groups[g]) {
      EXPECT_TRUE(seen.insert(i).second) << "clip " << i << " in two groups";
      EXPECT_EQ(a.labels[i], static_cast<int>(g));
    }
}

TEST(MedianFuse, Examples) {
  const auto f = MedianFuse({70, 71, 72, 73, 90});
  EXPECT_NEAR(f[4], 72.18, 1e-12);
  EXPECT_NEAR(f[0], 0.01 * 70 + 0.99 * 72, 1e-12);
  for (double v : MedianFuse({80, 80, 80, 80, 80})) EXPECT_EQ(v, 80.0);
  const auto g = MedianFuse({60, 60, 60, 60, 120});
  EXPECT_NEAR(g[4], 60.6, 1e-12);
  EXPECT_LE(std::abs(g[4] - 60.0), 1.0);
  EXPECT_EQ(KindOf([] { MedianFuse({1, 2, 3, 4}); }), ErrorKind::kParameter);
}

TEST(MedianFuse, BoundedByRange) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(40, 180);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(5);
    for (double& v : p) v = u(rng);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    for (double v : MedianFuse(p)) {
      EXPECT_GE(v, *lo - 1e-12);
      EXPECT_LE(v, *hi + 1e-12);
    }
  }
}

TEST(FuseGroups, OnlyCompleteGroupsFused) {
  ClusterAssignment a;
  a.labels = {0, -1, 0, 0, 0, 0};
  a.complete_groups = {{0, 2, 3, 4, 5}};
  const std::vector<double> p = {70, 150, 71, 72, 73, 90};
  const auto f = FuseGroups(p, a);
  EXPECT_EQ(f[1], 150.0);
  EXPECT_NEAR(f[5], 72.18, 1e-12);
}

TEST(WriteGrouping, CsvLayout) {
  ClusterAssignment a;
  a.labels = {-1, 0};
  a.complete_groups = {{1}};
  fixture::TempDir dir("group");
  WriteGrouping({"x", "y"}, a, dir / "g.csv");
  std::ifstream in(dir / "g.csv");
  std::string l0, l1, l2;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(l0, "sample_id,cluster_id,status");
  EXPECT_EQ(l1.substr(0, 5), "x,-1,");
  EXPECT_EQ(l2.substr(0, 4), "y,0,");
}

TEST(FrequencyMorph, IdentityAndArithmetic) {
  const FrameSequence seq = fixture::RandomClip(4, 4, 20, 8);
  const MorphResult same = FrequencyMorph(seq, 1.0, 72.0);
  EXPECT_EQ(same.clip, seq);
  EXPECT_EQ(same.hr_bpm, 72.0);
  const MorphResult slow = FrequencyMorph(seq, 0.5, 100.0);
  EXPECT_EQ(slow.hr_bpm, 50.0);
  EXPECT_EQ(slow.clip.frame_count(), 40u);
  EXPECT_EQ(slow.clip.fps, seq.fps);
  EXPECT_TRUE(FrequencyMorph(seq, 2.0, 100.0).out_of_band);
  EXPECT_FALSE(FrequencyMorph(seq, 1.5, 100.0).out_of_band);
  EXPECT_EQ(KindOf([&] { FrequencyMorph(seq, 2.5, 72.0); }), ErrorKind::kParameter);
  EXPECT_EQ(KindOf([&] { FrequencyMorph(seq, 0.49, 72.0); }), ErrorKind::kParameter);
}

TEST(FrequencyMorph, ForwardThenInverse) {
  const FrameSequence seq = fixture::RandomClip(3, 3, 250, 9);
  for (double f : {0.5, 0.8, 1.25, 1.6, 2.0}) {
    const MorphResult there = FrequencyMorph(seq, f, 72.0);
    const MorphResult back = FrequencyMorph(there.clip, 1.0 / f, there.hr_bpm);
    EXPECT_DOUBLE_EQ(back.hr_bpm, 72.0) << f;
    EXPECT_LE(std::abs(back.clip.duration_s() - seq.duration_s()), 1.0 / seq.fps.value()) << f;
  }
}

TEST(FrequencyMorph, LandmarksFollowClip) {
  const FrameSequence seq = fixture::RandomClip(8, 8, 10, 10);
  LandmarkTrack track;
  for (int t = 0; t < 10; ++t) {
    FaceLandmarks p{};
    for (auto& q : p) q = {static_cast<double>(t), 2.0 * t};
    track.frames.push_back(p);
  }
  const MorphResult m = FrequencyMorph(seq, 1.25, 72.0, &track);
  ASSERT_TRUE(m.landmarks.has_value());
  ASSERT_EQ(m.landmarks->frame_count(), m.clip.frame_count());
  EXPECT_DOUBLE_EQ(m.landmarks->frames[4][0].x, 5.0);
  EXPECT_DOUBLE_EQ(m.landmarks->frames[4][0].y, 10.0);
}

TEST(HFlip, InvolutionAndLayout) {
  const FrameSequence seq = fixture::RandomClip(7, 5, 3, 11);
  EXPECT_EQ(HFlip(HFlip(seq)), seq);
  const FrameSequence rb = fixture::Repeat(Halves(6, 2, {255, 0, 0}, {0, 0, 255}), 1);
  EXPECT_EQ(HFlip(rb).frames[0], Halves(6, 2, {0, 0, 255}, {255, 0, 0}));
}

TEST(HFlip, SymmetricMaskPoolingUnchanged) {
  const FrameSequence seq = fixture::RandomClip(9, 6, 4, 12);
  RoiMask mask;
  mask.width = 9;
  mask.height = 6;
  std::vector<std::uint8_t> m(54, 0);
  for (int y = 1; y < 5; ++y)
    for (int x = 0; x < 9; ++x) m[y * 9 + x] = std::abs(x - 4) <= y;
  mask.frames.assign(4, m);
  mask.valid.assign(4, true);
  const RgbTrace a = PoolChannels(seq, mask), b = PoolChannels(HFlip(seq), mask);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_NEAR(a.r[t], b.r[t], 1e-12);
    EXPECT_NEAR(a.g[t], b.g[t], 1e-12);
    EXPECT_NEAR(a.b[t], b.b[t], 1e-12);
  }
}

TEST(HFlip, LandmarksMirrorAboutFrameCenter) {
  LandmarkTrack t;
  FaceLandmarks p{};
  for (int i = 0; i < kLandmarkCount; ++i) p[i] = {0.25 * i, 1.0 + 0.5 * i};
  t.frames.push_back(p);
  const LandmarkTrack f = HFlip(t, 64);
  EXPECT_EQ(f.frames[0][4].x, 63.0);
  EXPECT_EQ(f.frames[0][4].y, 3.0);
  EXPECT_EQ(HFlip(f, 64), t);
}
