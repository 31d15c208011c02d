#include <algorithm>
#include <cmath>
#include <numbers>

#include "rppg/error.hpp"
#include "rppg/pulse.hpp"

namespace rppg {
namespace {

using Complex = std::complex<double>;

Biquad PoleSection(Complex z) {
  return {{1.0, 0.0, -1.0}, {1.0, -2.0 * z.real(), std::norm(z)}};
}

Complex SectionResponse(const Biquad& s, Complex zinv) {
  return (s.b[0] + zinv * (s.b[1] + zinv * s.b[2])) / (s.a[0] + zinv * (s.a[1] + zinv * s.a[2]));
}

}  // namespace

ButterworthBandpass::ButterworthBandpass(int order, double low_hz, double high_hz, double fs)
    : sample_rate_(fs) {
  Require(order >= 1, ErrorKind::kParameter, "filter order must be >= 1");
  Require(fs > 0.0, ErrorKind::kParameter, "sample rate must be positive");
  Require(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0, ErrorKind::kParameter,
          "band edges must satisfy 0 < low < high < Nyquist");
  const double two_fs = 2.0 * fs;
  const double w1 = two_fs * std::tan(std::numbers::pi * low_hz / fs);
  const double w2 = two_fs * std::tan(std::numbers::pi * high_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;
  auto bilinear = [&](Complex s) { return (two_fs + s) / (two_fs - s); };

  for (int k = 0; k < order; ++k) {
    const Complex p = std::polar(1.0, std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order));
    if (p.imag() < -1e-12) continue;  // conjugate of an already handled pole
    const Complex pb = p * bw;
    const Complex root = std::sqrt(pb * pb - 4.0 * w0 * w0);
    const Complex s1 = 0.5 * (pb + root);
    const Complex s2 = 0.5 * (pb - root);
    if (std::abs(p.imag()) <= 1e-12) {
      // Real prototype pole: s1, s2 form a conjugate pair.
      sections_.push_back(PoleSection(bilinear(s1)));
    } else {
      sections_.push_back(PoleSection(bilinear(s1)));
      sections_.push_back(PoleSection(bilinear(s2)));
    }
  }

  // Unit gain at the digital image of the analog band center.
  const double center_hz = fs / std::numbers::pi * std::atan(w0 / two_fs);
  const double gain = 1.0 / std::abs(Response(center_hz));
  for (double& b : sections_.front().b) b *= gain;

  double input_level = 1.0;
  for (const Biquad& s : sections_) {
    const double dc = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
    steady_state_.push_back({(dc - s.b[0]) * input_level, (s.b[2] - s.a[2] * dc) * input_level});
    input_level *= dc;
  }
}

std::complex<double> ButterworthBandpass::Response(double freq_hz) const {
  const Complex zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate_);
  Complex h = 1.0;
  for (const Biquad& s : sections_) h *= SectionResponse(s, zinv);
  return h;
}

std::vector<double> ButterworthBandpass::Filter(const std::vector<double>& x, double initial) const {
  std::vector<double> y = x;
  for (std::size_t k = 0; k < sections_.size(); ++k) {
    const Biquad& s = sections_[k];
    double z1 = steady_state_[k][0] * initial;
    double z2 = steady_state_[k][1] * initial;
    for (double& v : y) {
      const double in = v;
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[1] * out + z2;
      z2 = s.b[2] * in - s.a[2] * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> ButterworthBandpass::FiltFilt(const std::vector<double>& x) const {
  if (x.empty()) return {};
  const std::size_t n = x.size();
  const std::size_t padlen = std::min<std::size_t>(3 * (2 * sections_.size() + 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

  std::vector<double> y = Filter(ext, ext.front());
  std::reverse(y.begin(), y.end());
  y = Filter(y, y.front());
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(padlen),
          y.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

}  // namespace rppg
