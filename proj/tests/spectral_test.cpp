#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rppg/error.hpp"
#include "rppg/random.hpp"
#include "rppg/spectral.hpp"

using namespace rppg;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no rppg::Error thrown";
  return ErrorKind::kIo;
}

PulseTrace Tone(double bpm, double duration_s = 10.0, double fs = 25.0, double amp = 1.0,
                double phase = 0.3) {
  PulseTrace t;
  t.sample_rate = fs;
  const auto n = static_cast<std::size_t>(std::lround(duration_s * fs));
  for (std::size_t i = 0; i < n; ++i) t.samples.push_back(amp * std::sin(kTwoPi * bpm / 60.0 * i / fs + phase));
  return t;
}

PulseTrace AddNoise(PulseTrace t, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : t.samples) v += sigma * n(rng);
  return t;
}

// Hand-built spectrum on the default 10 s / 25 Hz / 4096 grid.
Spectrum Blank() {
  Spectrum s = Periodogram(Tone(72));
  std::fill(s.power.begin(), s.power.end(), 0.0);
  return s;
}

std::size_t BinOf(const Spectrum& s, double bpm) {
  return static_cast<std::size_t>(std::lround(bpm / 60.0 / s.bin_width_hz()));
}

const OutlierTable& SharedTable() {
  static const OutlierTable table = [] {
    std::vector<double> grid;
    for (int s = -30; s <= 20; s += 2) grid.push_back(s);
    return BuildOutlierTable(grid, 5.0, 1000, TraceSpec{}, 17);
  }();
  return table;
}

}  // namespace

TEST(Periodogram, ToneArgmaxWithinOneBin) {
  const Spectrum s = Periodogram(Tone(72));
  const auto k = std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
  EXPECT_LE(std::abs(s.freqs_hz[k] - 1.2), s.bin_width_hz());
  EXPECT_LE(s.bin_width_hz() * 60.0, 0.37);
}

TEST(Periodogram, ZeroInput) {
  const Spectrum s = Periodogram({std::vector<double>(250, 0.0), 25.0});
  for (double p : s.power) EXPECT_EQ(p, 0.0);
}

TEST(Periodogram, MatchesNaiveDft) {
  const PulseTrace t = AddNoise(Tone(81.3, 4.0, 30.0), 0.7, 3);
  const Spectrum s = Periodogram(t, 256);
  const auto ref = oracle::NaiveHannSpectrum(t.samples, 256, 30.0);
  ASSERT_EQ(ref.size(), s.power.size());
  double peak = 0.0;
  for (double p : ref) peak = std::max(peak, p);
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(s.power[k], ref[k], 1e-9 * peak) << k;
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_DOUBLE_EQ(s.freqs_hz[k], k * 30.0 / 256);
}

TEST(Periodogram, Parseval) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PulseTrace t = AddNoise(Tone(90), 1.0, seed);
    const Spectrum s = Periodogram(t);
    double lhs = 0.0;
    for (double p : s.power) lhs += p * s.bin_width_hz();
    const std::size_t n = t.size();
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(kTwoPi * i / (n - 1));
      rhs += w * w * t.samples[i] * t.samples[i];
    }
    rhs /= t.sample_rate;
    EXPECT_NEAR(lhs, rhs, 1e-6 * rhs);
  }
}

TEST(Periodogram, Preconditions) {
  EXPECT_EQ(KindOf([] { Periodogram({std::vector<double>(15, 1.0), 25.0}); }),
            ErrorKind::kInsufficientData);
  EXPECT_EQ(KindOf([] { Periodogram(Tone(72), 3000); }), ErrorKind::kParameter);
  EXPECT_EQ(KindOf([] { Periodogram(Tone(72), 128); }), ErrorKind::kParameter);
}

TEST(PickPeak, PlantedBinIsExact) {
  Spectrum s = Blank();
  const std::size_t k = 200;
  s.power[k] = 4.0;
  s.power[k - 1] = s.power[k + 1] = 1.0;
  EXPECT_EQ(PickPeak(s).bpm, 60.0 * s.freqs_hz[k]);

  const double f = 197 * s.bin_width_hz();
  EXPECT_NEAR(PickPeak(Periodogram(Tone(60.0 * f))).bpm, 60.0 * f, 1e-3);
}

TEST(PickPeak, OffBinToneRefined) {
  const HrEstimate e = PickPeak(Periodogram(Tone(71.7)));
  EXPECT_NEAR(e.bpm, 71.7, 0.5);
  EXPECT_EQ(e.method, HrMethod::kPeak);
}

TEST(PickPeak, TieGoesToLowerFrequency) {
  Spectrum s = Blank();
  s.power[BinOf(s, 60)] = 5.0;
  s.power[BinOf(s, 90)] = 5.0;
  EXPECT_NEAR(PickPeak(s).bpm, 60.0, s.bin_width_hz() * 60.0);
  EXPECT_EQ(PickPeak(s).bpm, 60.0 * s.freqs_hz[BinOf(s, 60)]);
}

TEST(PickPeak, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Spectrum s = Blank();
    for (double& p : s.power) p = e(rng);
    const HrEstimate base = PickPeak(s);
    Spectrum scaled = s;
    for (double& p : scaled.power) p *= 8.0;
    EXPECT_EQ(PickPeak(scaled).bpm, base.bpm);
    for (double& p : scaled.power) p *= 3.7 / 8.0;
    EXPECT_NEAR(PickPeak(scaled).bpm, base.bpm, 1e-9);
    const auto k = std::max_element(s.power.begin() + s.inband_begin, s.power.begin() + s.inband_end) -
                   s.power.begin();
    EXPECT_LE(std::abs(base.bpm - 60.0 * s.freqs_hz[k]), 60.0 * s.bin_width_hz());
  }
}

TEST(PickPeak, ZeroBandIsNoSignal) {
  EXPECT_EQ(KindOf([] { PickPeak(Blank()); }), ErrorKind::kNoSignal);
}

TEST(Snr, NoiselessToneAbove40Db) {
  for (double bpm : {50.0, 72.0, 88.8, 130.0, 170.0}) EXPECT_GE(PickPeak(Periodogram(Tone(bpm))).snr_db, 40.0) << bpm;
}

struct BandSplit {
  std::size_t signal_bins = 0;
  std::size_t noise_bins = 0;
};

BandSplit CountBins(const Spectrum& s, double peak_bpm, const SnrOptions& opt) {
  BandSplit b;
  for (std::size_t k = s.inband_begin; k < s.inband_end; ++k) {
    const double f = s.freqs_hz[k];
    const double half = opt.half_width_bins * s.resolution_hz;
    const bool in = std::abs(f - peak_bpm / 60.0) <= half ||
                    (opt.include_harmonic && 2 * peak_bpm <= s.high_bpm &&
                     std::abs(f - 2 * peak_bpm / 60.0) <= half);
    in ? ++b.signal_bins : ++b.noise_bins;
  }
  return b;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

TEST(Snr, WhiteNoiseExpectation) {
  const SnrOptions opt{2.0, false};
  const BandSplit bins = CountBins(Periodogram(Tone(72)), 100.0, opt);
  // Accumulate signal and noise power separately, recovered from the ratio
  // and the in-band total.
  double signal = 0.0, noise = 0.0;
  for (int seed = 0; seed < 400; ++seed) {
    const Spectrum s = Periodogram(AddNoise({std::vector<double>(250, 0.0), 25.0}, 1.0, seed));
    double total = 0.0;
    for (std::size_t k = s.inband_begin; k < s.inband_end; ++k) total += s.power[k];
    const double ratio = std::pow(10.0, ComputeSnr(s, 100.0, opt) / 10.0);
    signal += total * ratio / (1.0 + ratio);
    noise += total / (1.0 + ratio);
  }
  const double measured_db = 10.0 * std::log10(signal / noise);
  EXPECT_NEAR(measured_db, 10.0 * std::log10(static_cast<double>(bins.signal_bins) / bins.noise_bins), 0.5);
  // Native-bin form: five of 22.5 bins in band.
  EXPECT_NEAR(measured_db, 10.0 * std::log10(5.0 / (22.5 - 5.0)), 1.5);
}

TEST(Snr, PlantedToneAndNoise) {
  const SnrOptions opt;
  const Spectrum shape = Periodogram(Tone(84.0));
  const BandSplit bins = CountBins(shape, 84.0, opt);
  const double frac = static_cast<double>(bins.signal_bins) / (bins.signal_bins + bins.noise_bins);
  const double band_fraction = (180.0 - 45.0) / 60.0 / 12.5;
  for (double snr : {-10.0, -5.0, 0.0, 5.0}) {
    const double sigma = NoiseSigmaForSnr(snr);
    // Tone power over in-band noise power, as constructed.
    const double inband = std::pow(10.0, snr / 10.0) / band_fraction;
    const double constructed = 10.0 * std::log10((inband + frac) / (1.0 - frac));
    std::vector<double> compute, tone;
    for (int seed = 0; seed < 41; ++seed) {
      const Spectrum s = Periodogram(AddNoise(Tone(84.0), sigma, 1000 + seed));
      compute.push_back(ComputeSnr(s, 84.0, opt));
      tone.push_back(EstimateToneSnr(s, 84.0, opt));
      const double raw = EstimateInbandSnr(s, 84.0, opt);
      if (std::abs(raw) < 120.0)
        EXPECT_NEAR(tone.back(), raw + 10.0 * std::log10(band_fraction), 1e-9);
    }
    EXPECT_NEAR(Median(compute), constructed, 3.0) << snr;
    EXPECT_NEAR(Median(tone), snr, 3.0) << snr;
  }
}

TEST(Snr, DecreasesWithNoise) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double prev = PickPeak(Periodogram(Tone(75))).snr_db;
    for (double sigma : {0.2, 0.6, 1.8}) {
      const double snr = ComputeSnr(Periodogram(AddNoise(Tone(75), sigma, seed)), 75.0);
      EXPECT_LT(snr, prev) << sigma;
      prev = snr;
    }
  }
}

TEST(OutlierTable, HighAndLowSnrLimits) {
  const OutlierTable& t = SharedTable();
  EXPECT_LT(t.Lookup(20.0), 0.01);
  // Uniform-argmax limit with the window truncated at the band edges.
  const double width = 180.0 - 45.0;
  const double covered = 10.0 - 25.0 / width;
  EXPECT_NEAR(t.Lookup(-30.0), 1.0 - covered / width, 0.03);
}

TEST(OutlierTable, MonotoneWithinMonteCarloError) {
  const OutlierTable& t = SharedTable();
  const double slack = 2.0 / std::sqrt(static_cast<double>(t.trials));
  for (std::size_t i = 1; i < t.p_outlier.size(); ++i) {
    EXPECT_LE(t.p_outlier[i], t.p_outlier[i - 1] + slack) << t.snr_grid_db[i];
    EXPECT_GE(t.p_outlier[i], 0.0);
    EXPECT_LE(t.p_outlier[i], 1.0);
  }
}

TEST(OutlierTable, DeterministicAndJobIndependent) {
  const std::vector<double> grid = {-10, 0, 10};
  const OutlierTable a = BuildOutlierTable(grid, 5.0, 1000, TraceSpec{}, 99, 1);
  const OutlierTable b = BuildOutlierTable(grid, 5.0, 1000, TraceSpec{}, 99, 3);
  EXPECT_EQ(a.p_outlier, b.p_outlier);
  const OutlierTable c = BuildOutlierTable(grid, 5.0, 1000, TraceSpec{}, 100, 1);
  EXPECT_NE(a.p_outlier, c.p_outlier);
}

TEST(OutlierTable, RoundTripAndLookup) {
  const OutlierTable& t = SharedTable();
  fixture::TempDir dir("table");
  WriteOutlierTable(t, dir / "t.csv");
  const OutlierTable back = ReadOutlierTable(dir / "t.csv");
  EXPECT_EQ(back.snr_grid_db, t.snr_grid_db);
  EXPECT_EQ(back.p_outlier, t.p_outlier);
  EXPECT_EQ(back.trials, t.trials);
  EXPECT_EQ(back.seed, t.seed);
  EXPECT_EQ(back.delta_bpm, t.delta_bpm);
  EXPECT_EQ(back.trace.pad_to, t.trace.pad_to);
  EXPECT_EQ(t.Lookup(-100.0), t.p_outlier.front());
  EXPECT_EQ(t.Lookup(100.0), t.p_outlier.back());
  EXPECT_DOUBLE_EQ(t.Lookup(-29.0), 0.5 * (t.p_outlier[0] + t.p_outlier[1]));
}

TEST(OutlierTable, Preconditions) {
  EXPECT_EQ(KindOf([] { BuildOutlierTable({0.0}, 5.0, 999, TraceSpec{}, 1); }), ErrorKind::kParameter);
  EXPECT_EQ(KindOf([] { BuildOutlierTable({1.0, 0.0}, 5.0, 1000, TraceSpec{}, 1); }),
            ErrorKind::kParameter);
}

TEST(AdTrack, RepeatedSpectrumIsFixedPoint) {
  const Spectrum s = Periodogram(Tone(77.7));
  const double expect = PickPeak(s).bpm;
  const auto steps = AdTrack(std::vector<Spectrum>(8, s), SharedTable());
  for (const auto& st : steps) {
    EXPECT_EQ(st.estimate.bpm, expect);
    EXPECT_EQ(st.estimate.method, HrMethod::kAdTracker);
  }
}

TEST(AdTrack, CleanStepResponse) {
  std::vector<Spectrum> spectra;
  for (int t = 0; t < 20; ++t) spectra.push_back(Periodogram(Tone(t < 10 ? 70.0 : 85.0)));
  const auto steps = AdTrack(spectra, SharedTable());
  EXPECT_NEAR(steps[9].estimate.bpm, 70.0, 2.0);
  EXPECT_EQ(steps[10].alpha, 0.5);
  int reached = -1;
  for (int t = 10; t < 20; ++t)
    if (std::abs(steps[t].estimate.bpm - 85.0) <= 2.0) {
      reached = t;
      break;
    }
  ASSERT_GE(reached, 10);
  EXPECT_LE(reached - 9, 3);
}

TEST(AdTrack, NoisyStepHasNoJumpsToNoisePeaks) {
  const double sigma = NoiseSigmaForSnr(-10.0);
  const AdParams params;
  int clean_runs = 0;
  const int runs = 50;
  for (int run = 0; run < runs; ++run) {
    std::vector<Spectrum> spectra;
    for (int t = 0; t < 20; ++t) {
      const double bpm = t < 10 ? 70.0 : 85.0;
      spectra.push_back(Periodogram(AddNoise(Tone(bpm), sigma, MakeEngine(5, {static_cast<std::uint64_t>(run),
                                                                               static_cast<std::uint64_t>(t)})())));
    }
    const auto steps = AdTrack(spectra, SharedTable(), params);
    bool jumped = false;
    for (std::size_t t = 1; t < steps.size(); ++t) {
      const double hr = steps[t].estimate.bpm;
      const bool off_truth = std::abs(hr - 70.0) > 5.0 && std::abs(hr - 85.0) > 5.0;
      if (off_truth && std::abs(hr - steps[t - 1].estimate.bpm) > 5.0) jumped = true;
    }
    clean_runs += !jumped;
  }
  EXPECT_GE(clean_runs, runs * 9 / 10);
}

TEST(AdTrack, EqualRatesDegenerateToFixedSmoother) {
  std::vector<Spectrum> spectra;
  for (int t = 0; t < 15; ++t)
    spectra.push_back(Periodogram(AddNoise(Tone(t < 7 ? 66.0 : 95.0), 0.8, 40 + t)));
  AdParams params;
  params.alpha_fast = params.alpha_slow = 0.3;
  const auto steps = AdTrack(spectra, SharedTable(), params);
  std::vector<double> smooth = spectra[0].power;
  for (std::size_t t = 0; t < spectra.size(); ++t) {
    if (t > 0)
      for (std::size_t k = 0; k < smooth.size(); ++k)
        smooth[k] = (1.0 - 0.3) * smooth[k] + 0.3 * spectra[t].power[k];
    Spectrum ref = spectra[t];
    ref.power = smooth;
    EXPECT_EQ(steps[t].estimate.bpm, PickPeak(ref).bpm) << t;
  }
}

TEST(AdTrack, Preconditions) {
  EXPECT_EQ(KindOf([] { AdTracker(SharedTable(), AdParams{0.1, 0.2, 0.1, {}}); }), ErrorKind::kParameter);
  AdTracker tracker(SharedTable(), {});
  tracker.Step(Periodogram(Tone(72)));
  EXPECT_EQ(KindOf([&] { tracker.Step(Periodogram(Tone(72), 2048)); }), ErrorKind::kParameter);
}

TEST(SlidingSpectra, WindowCount) {
  const auto s = SlidingSpectra(Tone(72, 10.0), 4.0, 1.0);
  EXPECT_EQ(s.size(), 7u);
  for (const auto& sp : s) EXPECT_NEAR(sp.resolution_hz, 0.25, 1e-12);
  EXPECT_EQ(KindOf([] { SlidingSpectra(Tone(72, 2.0), 4.0, 1.0); }), ErrorKind::kInsufficientData);
}
