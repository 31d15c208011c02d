#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rppg/synth.hpp"
#include "rppg/videoio.hpp"

namespace fixture {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

rppg::Image Solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

rppg::FrameSequence RandomClip(int w, int h, int frames, std::uint64_t seed,
                               rppg::Rational fps = {25, 1});

rppg::FrameSequence Repeat(const rppg::Image& img, int frames, rppg::Rational fps = {25, 1});

// Frame with a skin-colored ellipse on a distinct background.
rppg::Image EllipseFrame(int w, int h, const rppg::Ellipse& e, const rppg::Rgb& skin,
                         const rppg::Rgb& bg, double noise_sigma, std::uint64_t seed);

std::vector<std::uint8_t> EllipseMask(int w, int h, const rppg::Ellipse& e);

double IoU(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

}  // namespace fixture
