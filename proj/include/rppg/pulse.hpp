#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <vector>

#include "rppg/skinseg.hpp"
#include "rppg/videoio.hpp"

namespace rppg {

struct RgbTrace {
  std::vector<double> r, g, b;
  double sample_rate = 25.0;

  std::size_t size() const { return r.size(); }
};

struct PulseTrace {
  std::vector<double> samples;
  double sample_rate = 25.0;

  std::size_t size() const { return samples.size(); }
  void Validate() const;
};

struct PoolingReport {
  std::size_t interpolated_frames = 0;
};

// Per-frame channel means over mask pixels. Frames without any mask pixel are
// filled by linear interpolation from the nearest valid neighbors.
RgbTrace PoolChannels(const FrameSequence& seq, const RoiMask& mask,
                      PoolingReport* report = nullptr);

struct ChromReport {
  std::size_t windows = 0;
  std::size_t degenerate_windows = 0;  // sigma_Y == 0, alpha forced to 0
};

inline constexpr double kDefaultChromWindowS = 1.6;

// Windowed CHROM projection with 50% Hann overlap-add.
PulseTrace ChromProject(const RgbTrace& trace, double window_s = kDefaultChromWindowS,
                        ChromReport* report = nullptr);

struct Biquad {
  std::array<double, 3> b;
  std::array<double, 3> a;  // a[0] == 1
};

// Digital Butterworth band-pass as cascaded second-order sections, designed
// through the bilinear transform with pre-warped band edges.
class ButterworthBandpass {
 public:
  ButterworthBandpass(int order, double low_hz, double high_hz, double sample_rate);

  const std::vector<Biquad>& sections() const { return sections_; }
  std::complex<double> Response(double freq_hz) const;

  // Single causal pass; `initial` scales the steady-state section state.
  std::vector<double> Filter(const std::vector<double>& x, double initial = 0.0) const;
  // Forward-backward pass with odd-extension padding.
  std::vector<double> FiltFilt(const std::vector<double>& x) const;

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> steady_state_;
  double sample_rate_;
};

inline constexpr double kDefaultLowBpm = 45.0;
inline constexpr double kDefaultHighBpm = 180.0;
inline constexpr int kButterworthOrder = 4;

PulseTrace Bandpass(const PulseTrace& trace, double low_bpm = kDefaultLowBpm,
                    double high_bpm = kDefaultHighBpm);

// Real-valued video volume, layout [frame][y][x][channel].
struct RealVolume {
  int width = 0;
  int height = 0;
  std::size_t frames = 0;
  double sample_rate = 25.0;
  std::vector<double> data;

  std::size_t index(std::size_t t, int x, int y, int c) const {
    return ((t * height + y) * static_cast<std::size_t>(width) + x) * 3 + c;
  }
  double at(std::size_t t, int x, int y, int c) const { return data[index(t, x, y, c)]; }
};

RealVolume PixelwiseBandpass(const FrameSequence& seq, double low_bpm = kDefaultLowBpm,
                             double high_bpm = kDefaultHighBpm);

// Mask-mean pooling over a real volume (used after pixelwise filtering).
RgbTrace PoolChannels(const RealVolume& volume, const RoiMask& mask,
                      PoolingReport* report = nullptr);

// CSV `index,value` with a leading `# sample_rate_hz=<float>` comment.
void WritePulseTrace(const PulseTrace& trace, const std::filesystem::path& path);
PulseTrace ReadPulseTrace(const std::filesystem::path& path);

}  // namespace rppg
