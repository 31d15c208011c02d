#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rppg/error.hpp"
#include "rppg/synth.hpp"
#include "rppg/videoio.hpp"

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

FaceLandmarks BoxLandmarks(double x0, double y0, double x1, double y1) {
  FaceLandmarks p{};
  for (int i = 0; i < kLandmarkCount; ++i) {
    const double u = (i % 17) / 16.0;
    const double v = (i / 17) / 3.0;
    p[i] = {x0 + u * (x1 - x0), y0 + v * (y1 - y0)};
  }
  return p;
}

}  // namespace

TEST(Rvid, TwoFrameFixtureRoundTrip) {
  const FrameSequence seq = fixture::RandomClip(4, 4, 2, 11);
  fixture::TempDir dir("rvid");
  WriteClip(seq, dir / "a.rvid");
  const FrameSequence back = ReadClip(dir / "a.rvid");
  EXPECT_EQ(back.width, 4);
  EXPECT_EQ(back.height, 4);
  EXPECT_EQ(back.frame_count(), 2u);
  EXPECT_EQ(back, seq);
}

TEST(Rvid, EmptyFileIsFormatError) {
  fixture::TempDir dir("rvid");
  std::ofstream(dir / "empty.rvid").close();
  EXPECT_EQ(KindOf([&] { ReadClip(dir / "empty.rvid"); }), ErrorKind::kFormat);
}

TEST(Rvid, SingleBlackPixelLayout) {
  FrameSequence seq = fixture::Repeat(Image(1, 1, 0), 1, {30000, 1001});
  const auto bytes = EncodeRvid(seq);
  ASSERT_EQ(bytes.size(), 25u + 3u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RVID");
  EXPECT_EQ(bytes[4], 1);
  // width, height, fps_num, fps_den, frame_count as little-endian u32
  const std::uint32_t expect[5] = {1, 1, 30000, 1001, 1};
  for (int f = 0; f < 5; ++f) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[5 + 4 * f + b]) << (8 * b);
    EXPECT_EQ(v, expect[f]) << "field " << f;
  }
  EXPECT_EQ(bytes[25], 0);
  EXPECT_EQ(bytes[26], 0);
  EXPECT_EQ(bytes[27], 0);
}

TEST(Rvid, RandomClipsRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FrameSequence seq = fixture::RandomClip(8, 8, 10, seed, {static_cast<std::uint32_t>(seed + 1), 2});
    EXPECT_EQ(DecodeRvid(EncodeRvid(seq)), seq) << "seed " << seed;
  }
}

TEST(Rvid, CorruptHeaderAndPayload) {
  auto bytes = EncodeRvid(fixture::RandomClip(3, 2, 2, 5));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(KindOf([&] { DecodeRvid(bad_magic); }), ErrorKind::kFormat);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_EQ(KindOf([&] { DecodeRvid(truncated); }), ErrorKind::kFormat);
  auto version = bytes;
  version[4] = 2;
  EXPECT_EQ(KindOf([&] { DecodeRvid(version); }), ErrorKind::kFormat);
}

TEST(Rvid, SynthClipRoundTrip) {
  SynthSpec spec;
  spec.noise_sigma = 2.0;
  const SynthClip clip = Generate(spec);
  ASSERT_EQ(clip.frames.frame_count(), 250u);
  fixture::TempDir dir("rvid");
  WriteClip(clip.frames, dir / "s.rvid");
  EXPECT_EQ(ReadClip(dir / "s.rvid"), clip.frames);
}

TEST(Rvid, InconsistentFrameSizeIsInvariantError) {
  FrameSequence seq = fixture::RandomClip(4, 4, 3, 1);
  seq.frames[1] = Image(5, 4);
  EXPECT_EQ(KindOf([&] { seq.Validate(); }), ErrorKind::kInvariant);
  fixture::TempDir dir("rvid");
  EXPECT_EQ(KindOf([&] { WriteClip(seq, dir / "x.rvid"); }), ErrorKind::kInvariant);
}

TEST(PpmDirectory, RoundTrip) {
  const FrameSequence seq = fixture::RandomClip(6, 5, 4, 3, {30, 1});
  fixture::TempDir dir("ppm");
  WritePpmDirectory(seq, dir / "clip");
  EXPECT_EQ(ReadClip(dir / "clip"), seq);
}

TEST(PpmDirectory, MissingMetadataIsFormatError) {
  fixture::TempDir dir("ppm");
  std::filesystem::create_directories(dir / "clip");
  EXPECT_EQ(KindOf([&] { ReadClip(dir / "clip"); }), ErrorKind::kFormat);
}

TEST(ResampleFps, ThirtyToTwentyFive) {
  const FrameSequence seq = fixture::RandomClip(3, 3, 300, 7, {30, 1});
  const FrameSequence out = ResampleFps(seq, {25, 1});
  EXPECT_EQ(out.frame_count(), 250u);
  EXPECT_EQ(out.fps, (Rational{25, 1}));
  EXPECT_LE(std::abs(out.duration_s() - seq.duration_s()), 1.0 / 25.0);
}

TEST(ResampleFps, DurationPreservedAcrossRates) {
  const FrameSequence seq = fixture::RandomClip(2, 2, 97, 8, {30000, 1001});
  for (Rational target : {Rational{25, 1}, Rational{24, 1}, Rational{60, 1}, Rational{7, 2}}) {
    const FrameSequence out = ResampleFps(seq, target);
    EXPECT_LE(std::abs(out.duration_s() - seq.duration_s()), 1.0 / target.value())
        << target.num << "/" << target.den;
  }
}

TEST(ResampleFps, SameRateIsIdentity) {
  const FrameSequence seq = fixture::RandomClip(5, 4, 12, 9, {25, 1});
  EXPECT_EQ(ResampleFps(seq, {25, 1}), seq);
  EXPECT_EQ(ResampleFps(seq, {50, 2}).frames, seq.frames);
}

TEST(ResampleFps, ConstantClipStaysConstant) {
  const FrameSequence seq = fixture::Repeat(fixture::Solid(4, 4, 17, 200, 99), 30, {30, 1});
  for (const Image& img : ResampleFps(seq, {25, 1}).frames) EXPECT_EQ(img, seq.frames[0]);
}

TEST(ResampleFps, TooFewFramesIsInsufficientData) {
  const FrameSequence seq = fixture::RandomClip(2, 2, 3, 1);
  EXPECT_EQ(KindOf([&] { ResampleFps(seq, {30, 1}); }), ErrorKind::kInsufficientData);
}

TEST(ResampleFps, SinusoidFrequencyPreserved) {
  const double f = 2.0;
  FrameSequence seq;
  seq.width = seq.height = 1;
  seq.fps = {30, 1};
  for (int t = 0; t < 300; ++t) {
    Image img(1, 1);
    const auto v = static_cast<std::uint8_t>(std::lround(128 + 100 * std::sin(2 * std::numbers::pi * f * t / 30.0)));
    img.data = {v, v, v};
    seq.frames.push_back(img);
  }
  const FrameSequence out = ResampleFps(seq, {25, 1});
  std::vector<double> series;
  for (const Image& img : out.frames) series.push_back(img.data[1] - 128.0);
  const std::size_t pad = 512;
  const auto p = oracle::NaiveHannSpectrum(series, pad, 25.0);
  const auto k = std::max_element(p.begin(), p.end()) - p.begin();
  EXPECT_LE(std::abs(k * 25.0 / pad - f), 25.0 / pad);
}

TEST(CropRoiPool, UniformRegionPoolsToSameGray) {
  const FrameSequence seq = fixture::Repeat(fixture::Solid(100, 90, 77, 77, 77), 2);
  LandmarkTrack track;
  track.frames.assign(2, BoxLandmarks(20, 15, 70, 80));
  const FrameSequence out = CropRoiPool(seq, track);
  EXPECT_EQ(out.width, 36);
  EXPECT_EQ(out.height, 36);
  for (const Image& img : out.frames)
    for (std::uint8_t v : img.data) EXPECT_EQ(v, 77);
}

TEST(CropRoiPool, TwoByTwoBlockMeans) {
  // Landmarks spanning 60 px give a 72 px box after the 10% margins.
  const FrameSequence seq = fixture::RandomClip(90, 90, 1, 21);
  LandmarkTrack track;
  track.frames.push_back(BoxLandmarks(10, 10, 70, 70));
  const Rect box = LandmarkBox(track.frames[0], 90, 90);
  ASSERT_EQ(box, (Rect{4, 4, 72, 72}));
  const FrameSequence out = CropRoiPool(seq, track, 36, 36);
  const auto expect = oracle::BlockMeans(seq.frames[0], box, 36, 36);
  for (int y = 0; y < 36; ++y)
    for (int x = 0; x < 36; ++x)
      for (int c = 0; c < 3; ++c) {
        const double e = expect[(static_cast<std::size_t>(y) * 36 + x) * 3 + c];
        EXPECT_EQ(out.frames[0].at(x, y, c), static_cast<std::uint8_t>(std::lround(e)));
      }
}

TEST(CropRoiPool, MeanConservedWithinOneGrayLevel) {
  const FrameSequence seq = fixture::RandomClip(120, 100, 3, 5);
  LandmarkTrack track;
  track.frames.assign(3, BoxLandmarks(13.3, 17.9, 88.1, 71.4));
  const FrameSequence out = CropRoiPool(seq, track);
  for (std::size_t t = 0; t < 3; ++t) {
    const Rect box = LandmarkBox(track.frames[t], seq.width, seq.height);
    double in_sum = 0.0;
    for (int y = box.y; y < box.y + box.height; ++y)
      for (int x = box.x; x < box.x + box.width; ++x) in_sum += seq.frames[t].at(x, y, 1);
    double out_sum = 0.0;
    for (int y = 0; y < 36; ++y)
      for (int x = 0; x < 36; ++x) out_sum += out.frames[t].at(x, y, 1);
    EXPECT_NEAR(out_sum / (36.0 * 36.0), in_sum / box.area(), 1.0);
  }
}

TEST(CropRoiPool, DegenerateBoxIsGeometryError) {
  const FrameSequence seq = fixture::RandomClip(20, 20, 1, 5);
  LandmarkTrack track;
  track.frames.push_back(BoxLandmarks(5, 5, 5, 15));
  EXPECT_EQ(KindOf([&] { CropRoiPool(seq, track); }), ErrorKind::kGeometry);
}

TEST(Landmarks, TwoFrameFixtureRoundTrip) {
  LandmarkTrack track;
  track.frames.push_back(BoxLandmarks(1.25, 2.5, 30.75, 40.125));
  track.frames.push_back(BoxLandmarks(2.0, 3.0, 31.0, 41.0));
  fixture::TempDir dir("lm");
  WriteLandmarks(track, dir / "lm.csv");
  const LandmarkTrack back = ReadLandmarks(dir / "lm.csv", 2);
  EXPECT_EQ(back.frame_count(), 2u);
  EXPECT_EQ(back, track);
}

TEST(Landmarks, MissingPointIsFormatError) {
  fixture::TempDir dir("lm");
  {
    std::ofstream out(dir / "lm.csv");
    out << "frame,point,x,y\n";
    for (int p = 0; p < 67; ++p) out << "0," << p << ",1,2\n";
  }
  EXPECT_EQ(KindOf([&] { ReadLandmarks(dir / "lm.csv", 1); }), ErrorKind::kFormat);
}

TEST(Landmarks, SynthTrackRoundTrip) {
  SynthSpec spec;
  spec.duration_s = 1.0;
  spec.skin_shape = {31.7, 33.3, 17.9, 21.1};
  const SynthClip clip = Generate(spec);
  fixture::TempDir dir("lm");
  WriteLandmarks(clip.landmarks, dir / "lm.csv");
  EXPECT_EQ(ReadLandmarks(dir / "lm.csv", clip.frames.frame_count()), clip.landmarks);
}

TEST(Manifest, RoundTripAndDuplicates) {
  std::vector<ClipRecord> recs = {
      {"a", "a.rvid", "a.csv", DatabaseTag::kA, 72.5},
      {"b", "b.rvid", "", DatabaseTag::kB, std::nullopt},
  };
  fixture::TempDir dir("manifest");
  WriteManifest(recs, dir / "m.csv");
  EXPECT_EQ(ReadManifest(dir / "m.csv"), recs);
  recs[1].sample_id = "a";
  WriteManifest(recs, dir / "dup.csv");
  EXPECT_EQ(KindOf([&] { ReadManifest(dir / "dup.csv"); }), ErrorKind::kValidation);
}

TEST(FormatDouble, ShortestRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(ParseDouble(FormatDouble(v)), v);
  }
  EXPECT_EQ(FormatDouble(72.0), "72");
}
