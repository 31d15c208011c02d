#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <unistd.h>

namespace fixture {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("rppg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

rppg::Image Solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  rppg::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  return img;
}

rppg::FrameSequence RandomClip(int w, int h, int frames, std::uint64_t seed, rppg::Rational fps) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  rppg::FrameSequence seq;
  seq.width = w;
  seq.height = h;
  seq.fps = fps;
  for (int t = 0; t < frames; ++t) {
    rppg::Image img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(byte(rng));
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

rppg::FrameSequence Repeat(const rppg::Image& img, int frames, rppg::Rational fps) {
  rppg::FrameSequence seq;
  seq.width = img.width;
  seq.height = img.height;
  seq.fps = fps;
  seq.frames.assign(static_cast<std::size_t>(frames), img);
  return seq;
}

rppg::Image EllipseFrame(int w, int h, const rppg::Ellipse& e, const rppg::Rgb& skin,
                         const rppg::Rgb& bg, double noise_sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  rppg::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool in = e.Contains(x + 0.5, y + 0.5);
      for (int c = 0; c < 3; ++c) {
        double v = in ? skin[c] : bg[c];
        if (noise_sigma > 0) v += noise_sigma * noise(rng);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  return img;
}

std::vector<std::uint8_t> EllipseMask(int w, int h, const rppg::Ellipse& e) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m[static_cast<std::size_t>(y) * w + x] = e.Contains(x + 0.5, y + 0.5);
  return m;
}

double IoU(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    uni += (a[i] || b[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

}  // namespace fixture
