#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rppg/pulse.hpp"

namespace rppg {

struct Spectrum {
  std::vector<double> freqs_hz;
  std::vector<double> power;
  std::size_t inband_begin = 0;  // [inband_begin, inband_end)
  std::size_t inband_end = 0;
  double low_bpm = kDefaultLowBpm;
  double high_bpm = kDefaultHighBpm;
  // Native frequency resolution of the analysed trace (sample_rate / length).
  double resolution_hz = 0.0;

  double bin_width_hz() const { return freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 0.0; }
  void Validate() const;
};

enum class HrMethod { kPeak, kAdTracker };
std::string ToString(HrMethod method);

struct HrEstimate {
  double bpm = 0.0;
  double snr_db = 0.0;
  HrMethod method = HrMethod::kPeak;
};

inline constexpr std::size_t kDefaultPadTo = 4096;

// Hann-windowed, zero-padded one-sided energy spectral density:
// sum(power) * bin_width equals sum((w * x)^2) / sample_rate.
Spectrum Periodogram(const PulseTrace& trace, std::size_t pad_to = kDefaultPadTo,
                     double low_bpm = kDefaultLowBpm, double high_bpm = kDefaultHighBpm);

struct SnrOptions {
  // Half width of the signal windows, in native resolution bins.
  double half_width_bins = 3.0;
  bool include_harmonic = true;
};

// In-band argmax with parabolic refinement; ties go to the lower frequency.
HrEstimate PickPeak(const Spectrum& spec, const SnrOptions& snr = {});

// 10 log10(P_signal / P_noise) over the band.
double ComputeSnr(const Spectrum& spec, double peak_bpm, const SnrOptions& options = {});

// Estimate of tone power over in-band noise power, with the noise falling in
// the signal windows subtracted using the density measured elsewhere in the
// band.
double EstimateInbandSnr(const Spectrum& spec, double peak_bpm, const SnrOptions& options = {});

// Per-sample tone SNR (A^2 / 2 sigma^2) implied by the in-band estimate when
// the noise is white up to Nyquist. Same units as the OutlierTable SNR axis.
double EstimateToneSnr(const Spectrum& spec, double peak_bpm, const SnrOptions& options = {});

struct TraceSpec {
  double duration_s = 10.0;
  double sample_rate = 25.0;
  double low_bpm = kDefaultLowBpm;
  double high_bpm = kDefaultHighBpm;
  std::size_t pad_to = kDefaultPadTo;
};

struct OutlierTable {
  std::vector<double> snr_grid_db;
  std::vector<double> p_outlier;
  double delta_bpm = 5.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  TraceSpec trace;

  // Linear interpolation on the grid, clamped to the end points.
  double Lookup(double snr_db) const;
};

// Noise standard deviation giving a unit-amplitude tone the per-sample SNR
// A^2 / (2 sigma^2) = 10^(snr_db / 10).
double NoiseSigmaForSnr(double snr_db);

// Monte Carlo estimate of P(|estimate - truth| > delta_bpm) per SNR for a
// single tone at a uniform in-band frequency plus white Gaussian noise.
OutlierTable BuildOutlierTable(const std::vector<double>& snr_grid_db, double delta_bpm,
                               std::size_t trials, const TraceSpec& trace, std::uint64_t seed,
                               unsigned jobs = 0);

void WriteOutlierTable(const OutlierTable& table, const std::filesystem::path& path);
OutlierTable ReadOutlierTable(const std::filesystem::path& path);

struct AdParams {
  double alpha_fast = 0.5;
  double alpha_slow = 0.05;
  double p_threshold = 0.1;
  SnrOptions snr;
};

struct AdState {
  std::vector<double> smoothed;
  double alpha = 1.0;
  bool initialized = false;
};

struct AdStep {
  HrEstimate estimate;
  double inst_snr_db = 0.0;
  double p_outlier = 1.0;
  double alpha = 1.0;
};

// Two-rate exponential smoother over power spectra. The fast rate is used
// when the outlier probability at the instantaneous SNR is below threshold.
class AdTracker {
 public:
  AdTracker(OutlierTable table, AdParams params);

  AdStep Step(const Spectrum& spectrum);
  const AdState& state() const { return state_; }

 private:
  OutlierTable table_;
  AdParams params_;
  AdState state_;
  Spectrum grid_;
};

std::vector<AdStep> AdTrack(const std::vector<Spectrum>& spectra, const OutlierTable& table,
                            const AdParams& params = {});

// Periodograms of overlapping sub-windows of a trace.
std::vector<Spectrum> SlidingSpectra(const PulseTrace& trace, double window_s, double hop_s,
                                     std::size_t pad_to = kDefaultPadTo,
                                     double low_bpm = kDefaultLowBpm,
                                     double high_bpm = kDefaultHighBpm);

}  // namespace rppg
