#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rppg {

struct Rational {
  std::uint32_t num = 25;
  std::uint32_t den = 1;

  double value() const { return static_cast<double>(num) / den; }
  bool operator==(const Rational&) const = default;
};

// Interleaved RGB8 image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + c;
  }
  std::uint8_t at(int x, int y, int c) const { return data[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c) { return data[index(x, y, c)]; }

  bool operator==(const Image&) const = default;
};

struct FrameSequence {
  int width = 0;
  int height = 0;
  Rational fps;
  std::vector<Image> frames;

  std::size_t frame_count() const { return frames.size(); }
  double duration_s() const { return frames.size() / fps.value(); }

  // Throws kInvariant when dimensions disagree, the clip is empty or fps is 0.
  void Validate() const;

  bool operator==(const FrameSequence&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

inline constexpr int kLandmarkCount = 68;
using FaceLandmarks = std::array<Point2, kLandmarkCount>;

// 68-point face alignment convention.
namespace landmark_index {
inline constexpr int kJawBegin = 0, kJawEnd = 17;
inline constexpr int kLeftEyeBegin = 36, kLeftEyeEnd = 42;
inline constexpr int kRightEyeBegin = 42, kRightEyeEnd = 48;
inline constexpr int kOuterMouthBegin = 48, kOuterMouthEnd = 60;
}  // namespace landmark_index

struct LandmarkTrack {
  std::vector<FaceLandmarks> frames;

  std::size_t frame_count() const { return frames.size(); }
  bool operator==(const LandmarkTrack&) const = default;
};

// Integer pixel rectangle [x, x + width) x [y, y + height).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  long area() const { return static_cast<long>(width) * height; }
  bool operator==(const Rect&) const = default;
};

enum class DatabaseTag { kA, kB };

std::string ToString(DatabaseTag tag);
DatabaseTag ParseDatabaseTag(const std::string& text);

struct ClipRecord {
  std::string sample_id;
  std::string path;
  std::string landmarks_path;
  DatabaseTag database_tag = DatabaseTag::kA;
  std::optional<double> ground_truth_hr;

  bool operator==(const ClipRecord&) const = default;
};

// Clip I/O. A path naming a directory is read as PPM frames plus meta.txt;
// anything else is read as an RVID container.
FrameSequence ReadClip(const std::filesystem::path& path);
void WriteClip(const FrameSequence& seq, const std::filesystem::path& path);
void WritePpmDirectory(const FrameSequence& seq, const std::filesystem::path& dir);

// RVID (de)serialization on in-memory buffers.
std::vector<std::uint8_t> EncodeRvid(const FrameSequence& seq);
FrameSequence DecodeRvid(const std::vector<std::uint8_t>& bytes);

// Temporal Catmull-Rom resampling to a new frame rate. Edge frames replicate.
FrameSequence ResampleFps(const FrameSequence& seq, Rational target_fps);

// Resamples so that output frame j is taken at source frame position
// j * step; `out_frames` frames are produced and fps is left unchanged.
FrameSequence ResampleByStep(const FrameSequence& seq, double step,
                             std::size_t out_frames);

// Linear resampling of landmark positions at source positions j * step.
LandmarkTrack ResampleTrack(const LandmarkTrack& track, double step,
                            std::size_t out_frames);

// Average-pools the landmark bounding box (plus 10% margin per side, clipped
// to the frame) of every frame onto an out_w x out_h grid.
FrameSequence CropRoiPool(const FrameSequence& seq, const LandmarkTrack& track,
                          int out_w = 36, int out_h = 36);

// Expanded, clipped pixel box used by CropRoiPool for one frame.
Rect LandmarkBox(const FaceLandmarks& points, int frame_width, int frame_height,
                 double margin = 0.1);

LandmarkTrack ReadLandmarks(const std::filesystem::path& path,
                            std::size_t frame_count);
void WriteLandmarks(const LandmarkTrack& track, const std::filesystem::path& path);

std::vector<ClipRecord> ReadManifest(const std::filesystem::path& path);
void WriteManifest(const std::vector<ClipRecord>& records,
                   const std::filesystem::path& path);

// Splits one CSV line on commas. No quoting support; none of the formats
// here need it.
std::vector<std::string> SplitCsvLine(const std::string& line);

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);
double ParseDouble(const std::string& text);

}  // namespace rppg
