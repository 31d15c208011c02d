#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "rppg/error.hpp"
#include "rppg/pulse.hpp"

namespace rppg {
namespace {

void CheckMask(int width, int height, std::size_t frames, const RoiMask& mask) {
  Require(mask.width == width && mask.height == height && mask.frame_count() == frames,
          ErrorKind::kInvariant, "mask does not match the clip");
}

// Fills frames with no ROI pixels by linear interpolation between valid
// neighbors; leading/trailing gaps copy the nearest valid frame.
void FillInvalid(RgbTrace& trace, const std::vector<bool>& valid, PoolingReport* report) {
  const std::size_t n = valid.size();
  std::vector<std::size_t> good;
  for (std::size_t t = 0; t < n; ++t)
    if (valid[t]) good.push_back(t);
  if (good.empty()) Fail(ErrorKind::kEmptyRoi, "no frame has any ROI pixel");
  std::size_t filled = 0;
  for (std::vector<double>* ch : {&trace.r, &trace.g, &trace.b}) {
    auto& v = *ch;
    for (std::size_t t = 0; t < good.front(); ++t) v[t] = v[good.front()];
    for (std::size_t t = good.back() + 1; t < n; ++t) v[t] = v[good.back()];
    for (std::size_t k = 0; k + 1 < good.size(); ++k) {
      const std::size_t a = good[k], b = good[k + 1];
      for (std::size_t t = a + 1; t < b; ++t) {
        const double u = static_cast<double>(t - a) / static_cast<double>(b - a);
        v[t] = v[a] + u * (v[b] - v[a]);
      }
    }
  }
  filled = n - good.size();
  if (report) report->interpolated_frames = filled;
}

template <typename PixelFn>
RgbTrace PoolImpl(std::size_t frames, int width, int height, double rate, const RoiMask& mask,
                  PixelFn pixel, PoolingReport* report) {
  CheckMask(width, height, frames, mask);
  RgbTrace trace;
  trace.sample_rate = rate;
  trace.r.assign(frames, 0.0);
  trace.g.assign(frames, 0.0);
  trace.b.assign(frames, 0.0);
  std::vector<bool> valid(frames, false);
  for (std::size_t t = 0; t < frames; ++t) {
    double sum[3] = {0.0, 0.0, 0.0};
    std::size_t count = 0;
    const auto& m = mask.frames[t];
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!m[static_cast<std::size_t>(y) * width + x]) continue;
        for (int c = 0; c < 3; ++c) sum[c] += pixel(t, x, y, c);
        ++count;
      }
    }
    if (count == 0) continue;
    valid[t] = true;
    trace.r[t] = sum[0] / count;
    trace.g[t] = sum[1] / count;
    trace.b[t] = sum[2] / count;
  }
  FillInvalid(trace, valid, report);
  return trace;
}

double Mean(const double* v, std::size_t n) { return std::accumulate(v, v + n, 0.0) / n; }

double StdDev(const std::vector<double>& v) {
  const double m = Mean(v.data(), v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

}  // namespace

void PulseTrace::Validate() const {
  Require(samples.size() >= 2, ErrorKind::kInsufficientData, "pulse trace needs >= 2 samples");
  Require(sample_rate > 0.0, ErrorKind::kInvariant, "sample rate must be positive");
  for (double v : samples) Require(std::isfinite(v), ErrorKind::kInvariant, "non-finite pulse sample");
}

RgbTrace PoolChannels(const FrameSequence& seq, const RoiMask& mask, PoolingReport* report) {
  seq.Validate();
  return PoolImpl(
      seq.frame_count(), seq.width, seq.height, seq.fps.value(), mask,
      [&](std::size_t t, int x, int y, int c) { return static_cast<double>(seq.frames[t].at(x, y, c)); },
      report);
}

RgbTrace PoolChannels(const RealVolume& volume, const RoiMask& mask, PoolingReport* report) {
  return PoolImpl(
      volume.frames, volume.width, volume.height, volume.sample_rate, mask,
      [&](std::size_t t, int x, int y, int c) { return volume.at(t, x, y, c); }, report);
}

PulseTrace ChromProject(const RgbTrace& trace, double window_s, ChromReport* report) {
  const std::size_t n = trace.size();
  Require(trace.g.size() == n && trace.b.size() == n, ErrorKind::kInvariant,
          "RGB channels differ in length");
  Require(trace.sample_rate > 0.0 && window_s > 0.0, ErrorKind::kParameter,
          "sample rate and window must be positive");
  const std::size_t len =
      std::max<std::size_t>(2, 2 * static_cast<std::size_t>(std::lround(window_s * trace.sample_rate / 2.0)));
  Require(n >= len, ErrorKind::kInsufficientData, "trace shorter than one CHROM window");
  const std::size_t hop = len / 2;

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + len <= n; s += hop) starts.push_back(s);
  if (starts.back() + len < n) starts.push_back(n - len);

  std::vector<double> hann(len);
  for (std::size_t i = 0; i < len; ++i) {
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / len));
  }

  ChromReport local;
  ChromReport& rep = report ? *report : local;
  rep = {};
  std::vector<double> acc(n, 0.0), weight(n, 0.0);
  std::vector<double> xs(len), ys(len);
  for (std::size_t start : starts) {
    const double mr = Mean(trace.r.data() + start, len);
    const double mg = Mean(trace.g.data() + start, len);
    const double mb = Mean(trace.b.data() + start, len);
    if (!(mr > 0.0 && mg > 0.0 && mb > 0.0)) {
      Fail(ErrorKind::kInvariant, "CHROM needs strictly positive channel means");
    }
    for (std::size_t i = 0; i < len; ++i) {
      const double rn = trace.r[start + i] / mr;
      const double gn = trace.g[start + i] / mg;
      const double bn = trace.b[start + i] / mb;
      xs[i] = 3.0 * rn - 2.0 * gn;
      ys[i] = 1.5 * rn + gn - 1.5 * bn;
    }
    const double sx = StdDev(xs);
    const double sy = StdDev(ys);
    double alpha = 0.0;
    if (sy > 1e-12) {
      alpha = sx / sy;
    } else {
      ++rep.degenerate_windows;
    }
    std::vector<double> s(len);
    for (std::size_t i = 0; i < len; ++i) s[i] = xs[i] - alpha * ys[i];
    const double ms = Mean(s.data(), len);
    for (std::size_t i = 0; i < len; ++i) {
      acc[start + i] += hann[i] * (s[i] - ms);
      weight[start + i] += hann[i];
    }
    ++rep.windows;
  }

  PulseTrace out;
  out.sample_rate = trace.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = weight[i] > 1e-9 ? acc[i] / weight[i] : 0.0;
  return out;
}

PulseTrace Bandpass(const PulseTrace& trace, double low_bpm, double high_bpm) {
  trace.Validate();
  const double nyquist_bpm = 60.0 * trace.sample_rate / 2.0;
  if (!(low_bpm > 0.0 && low_bpm < high_bpm && high_bpm < nyquist_bpm)) {
    Fail(ErrorKind::kParameter, "band must satisfy 0 < low < high < Nyquist (" +
                                    FormatDouble(nyquist_bpm) + " bpm)");
  }
  const ButterworthBandpass filter(kButterworthOrder, low_bpm / 60.0, high_bpm / 60.0, trace.sample_rate);
  return {filter.FiltFilt(trace.samples), trace.sample_rate};
}

RealVolume PixelwiseBandpass(const FrameSequence& seq, double low_bpm, double high_bpm) {
  seq.Validate();
  const double rate = seq.fps.value();
  const double nyquist_bpm = 60.0 * rate / 2.0;
  if (!(low_bpm > 0.0 && low_bpm < high_bpm && high_bpm < nyquist_bpm)) {
    Fail(ErrorKind::kParameter, "band must satisfy 0 < low < high < Nyquist");
  }
  const ButterworthBandpass filter(kButterworthOrder, low_bpm / 60.0, high_bpm / 60.0, rate);
  RealVolume vol;
  vol.width = seq.width;
  vol.height = seq.height;
  vol.frames = seq.frame_count();
  vol.sample_rate = rate;
  vol.data.resize(vol.frames * static_cast<std::size_t>(seq.width) * seq.height * 3);
  std::vector<double> series(vol.frames);
  for (int y = 0; y < seq.height; ++y) {
    for (int x = 0; x < seq.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < vol.frames; ++t) series[t] = seq.frames[t].at(x, y, c);
        const std::vector<double> filtered = filter.FiltFilt(series);
        for (std::size_t t = 0; t < vol.frames; ++t) vol.data[vol.index(t, x, y, c)] = filtered[t];
      }
    }
  }
  return vol;
}

void WritePulseTrace(const PulseTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "# sample_rate_hz=" << FormatDouble(trace.sample_rate) << "\n";
  out << "index,value\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << FormatDouble(trace.samples[i]) << '\n';
}

PulseTrace ReadPulseTrace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  PulseTrace trace;
  std::string line;
  bool have_rate = false;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# sample_rate_hz=";
      if (line.rfind(key, 0) == 0) {
        trace.sample_rate = ParseDouble(line.substr(key.size()));
        have_rate = true;
      }
      continue;
    }
    if (!have_header) {
      if (SplitCsvLine(line) != std::vector<std::string>{"index", "value"}) {
        Fail(ErrorKind::kFormat, path.string() + ": expected header 'index,value'");
      }
      have_header = true;
      continue;
    }
    const auto fields = SplitCsvLine(line);
    if (fields.size() != 2) Fail(ErrorKind::kFormat, path.string() + ": bad row");
    trace.samples.push_back(ParseDouble(fields[1]));
  }
  if (!have_rate) Fail(ErrorKind::kFormat, path.string() + ": missing sample_rate_hz comment");
  return trace;
}

}  // namespace rppg
