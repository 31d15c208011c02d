#include "rppg/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "rppg/error.hpp"

namespace rppg {
namespace {

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and executed on caller-owned aligned buffers.
class R2cPlanCache {
 public:
  static R2cPlanCache& Instance() {
    static R2cPlanCache cache;
    return cache;
  }

  fftw_plan Get(std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, plan);
    return plan;
  }

 private:
  R2cPlanCache() = default;
  ~R2cPlanCache() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }
  std::mutex mu_;
  std::map<std::size_t, fftw_plan> plans_;
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

bool IsPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

struct Regions {
  double signal = 0.0;
  double noise = 0.0;
  std::size_t signal_bins = 0;
  std::size_t noise_bins = 0;
};

Regions SplitBand(const Spectrum& spec, double peak_bpm, const SnrOptions& options) {
  const double low_hz = spec.low_bpm / 60.0;
  const double high_hz = spec.high_bpm / 60.0;
  const double peak_hz = peak_bpm / 60.0;
  if (!(peak_hz >= low_hz - 1e-9 && peak_hz <= high_hz + 1e-9)) {
    Fail(ErrorKind::kParameter, "peak " + FormatDouble(peak_bpm) + " bpm is outside the band");
  }
  const double half = options.half_width_bins * spec.resolution_hz;
  const double harmonic_hz = 2.0 * peak_hz;
  const bool harmonic = options.include_harmonic && harmonic_hz <= high_hz;
  Regions r;
  for (std::size_t k = spec.inband_begin; k < spec.inband_end; ++k) {
    const double f = spec.freqs_hz[k];
    const bool in_signal = std::abs(f - peak_hz) <= half || (harmonic && std::abs(f - harmonic_hz) <= half);
    if (in_signal) {
      r.signal += spec.power[k];
      ++r.signal_bins;
    } else {
      r.noise += spec.power[k];
      ++r.noise_bins;
    }
  }
  return r;
}

constexpr double kSnrFloorDb = -120.0;

}  // namespace

std::string ToString(HrMethod method) {
  return method == HrMethod::kPeak ? "peak" : "ad_tracker";
}

void Spectrum::Validate() const {
  Require(freqs_hz.size() == power.size() && !freqs_hz.empty(), ErrorKind::kInvariant,
          "spectrum grid and power differ in length");
  Require(inband_begin < inband_end && inband_end <= power.size(), ErrorKind::kInvariant,
          "spectrum has an empty band");
  for (std::size_t k = 0; k < power.size(); ++k) {
    Require(std::isfinite(power[k]) && power[k] >= 0.0, ErrorKind::kInvariant, "invalid power value");
    Require(k == 0 || freqs_hz[k] > freqs_hz[k - 1], ErrorKind::kInvariant,
            "frequencies must be strictly ascending");
  }
}

Spectrum Periodogram(const PulseTrace& trace, std::size_t pad_to, double low_bpm, double high_bpm) {
  const std::size_t n = trace.size();
  Require(n >= 16, ErrorKind::kInsufficientData, "periodogram needs >= 16 samples");
  Require(trace.sample_rate > 0.0, ErrorKind::kParameter, "sample rate must be positive");
  Require(IsPowerOfTwo(pad_to) && pad_to >= n, ErrorKind::kParameter,
          "pad_to must be a power of two >= trace length");
  Require(0.0 < low_bpm && low_bpm < high_bpm, ErrorKind::kParameter, "invalid band");

  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(pad_to));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(pad_to / 2 + 1));
  for (std::size_t i = 0; i < pad_to; ++i) {
    if (i < n) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
      in.get()[i] = w * trace.samples[i];
    } else {
      in.get()[i] = 0.0;
    }
  }
  fftw_execute_dft_r2c(R2cPlanCache::Instance().Get(pad_to), in.get(), out.get());

  Spectrum spec;
  const std::size_t bins = pad_to / 2 + 1;
  const double dt = 1.0 / trace.sample_rate;
  spec.freqs_hz.resize(bins);
  spec.power.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = out.get()[k][0];
    const double im = out.get()[k][1];
    const double fold = (k == 0 || k == pad_to / 2) ? 1.0 : 2.0;
    spec.freqs_hz[k] = static_cast<double>(k) * trace.sample_rate / static_cast<double>(pad_to);
    spec.power[k] = fold * (re * re + im * im) * dt * dt;
  }
  spec.low_bpm = low_bpm;
  spec.high_bpm = high_bpm;
  spec.resolution_hz = trace.sample_rate / static_cast<double>(n);
  const double low_hz = low_bpm / 60.0;
  const double high_hz = high_bpm / 60.0;
  spec.inband_begin = static_cast<std::size_t>(
      std::lower_bound(spec.freqs_hz.begin(), spec.freqs_hz.end(), low_hz) - spec.freqs_hz.begin());
  spec.inband_end = static_cast<std::size_t>(
      std::upper_bound(spec.freqs_hz.begin(), spec.freqs_hz.end(), high_hz) - spec.freqs_hz.begin());
  Require(spec.inband_begin < spec.inband_end, ErrorKind::kParameter,
          "band contains no frequency bins");
  return spec;
}

double ComputeSnr(const Spectrum& spec, double peak_bpm, const SnrOptions& options) {
  const Regions r = SplitBand(spec, peak_bpm, options);
  if (!(r.signal > 0.0)) return kSnrFloorDb;
  const double noise = std::max(r.noise, 1e-12 * r.signal);
  return 10.0 * std::log10(r.signal / noise);
}

double EstimateInbandSnr(const Spectrum& spec, double peak_bpm, const SnrOptions& options) {
  const Regions r = SplitBand(spec, peak_bpm, options);
  if (r.noise_bins == 0 || !(r.noise > 0.0)) return r.signal > 0.0 ? -kSnrFloorDb : kSnrFloorDb;
  const double density = r.noise / static_cast<double>(r.noise_bins);
  const double tone = r.signal - density * static_cast<double>(r.signal_bins);
  const double inband_noise = density * static_cast<double>(r.signal_bins + r.noise_bins);
  if (!(tone > 0.0)) return kSnrFloorDb;
  return std::max(kSnrFloorDb, 10.0 * std::log10(tone / inband_noise));
}

double EstimateToneSnr(const Spectrum& spec, double peak_bpm, const SnrOptions& options) {
  const double inband = EstimateInbandSnr(spec, peak_bpm, options);
  if (std::abs(inband) >= -kSnrFloorDb) return inband;
  const double band_fraction = (spec.high_bpm - spec.low_bpm) / 60.0 / spec.freqs_hz.back();
  return inband + 10.0 * std::log10(band_fraction);
}

HrEstimate PickPeak(const Spectrum& spec, const SnrOptions& snr) {
  Require(spec.inband_begin < spec.inband_end && spec.inband_end <= spec.power.size(),
          ErrorKind::kInvariant, "spectrum has an empty band");
  std::size_t best = spec.inband_begin;
  for (std::size_t k = spec.inband_begin + 1; k < spec.inband_end; ++k) {
    if (spec.power[k] > spec.power[best]) best = k;
  }
  if (!(spec.power[best] > 0.0)) Fail(ErrorKind::kNoSignal, "all in-band power is zero");

  double offset = 0.0;
  if (best > 0 && best + 1 < spec.power.size()) {
    const double a = spec.power[best - 1];
    const double b = spec.power[best];
    const double c = spec.power[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  HrEstimate est;
  est.method = HrMethod::kPeak;
  est.bpm = 60.0 * (spec.freqs_hz[best] + offset * spec.bin_width_hz());
  est.bpm = std::clamp(est.bpm, spec.low_bpm, spec.high_bpm);
  est.snr_db = ComputeSnr(spec, est.bpm, snr);
  return est;
}

std::vector<Spectrum> SlidingSpectra(const PulseTrace& trace, double window_s, double hop_s,
                                     std::size_t pad_to, double low_bpm, double high_bpm) {
  trace.Validate();
  Require(window_s > 0.0 && hop_s > 0.0, ErrorKind::kParameter, "window and hop must be positive");
  const auto len = static_cast<std::size_t>(std::lround(window_s * trace.sample_rate));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hop_s * trace.sample_rate)));
  Require(len >= 16 && len <= trace.size(), ErrorKind::kInsufficientData,
          "trace shorter than one analysis window");
  std::vector<Spectrum> out;
  for (std::size_t start = 0; start + len <= trace.size(); start += hop) {
    PulseTrace sub{{trace.samples.begin() + static_cast<std::ptrdiff_t>(start),
                    trace.samples.begin() + static_cast<std::ptrdiff_t>(start + len)},
                   trace.sample_rate};
    out.push_back(Periodogram(sub, pad_to, low_bpm, high_bpm));
  }
  return out;
}

}  // namespace rppg
