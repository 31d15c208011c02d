#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rppg/videoio.hpp"

namespace rppg {

struct Flicker {
  double freq_bpm = 30.0;
  double depth = 0.02;
};

struct Ellipse {
  double cx = 32.0;
  double cy = 34.0;
  double ax = 18.0;
  double ay = 22.0;

  bool Contains(double x, double y) const;
};

using Rgb = std::array<double, 3>;

struct SynthSpec {
  int width = 64;
  int height = 64;
  Rational fps{25, 1};
  double duration_s = 10.0;
  double hr_bpm = 72.0;
  double pulse_amp = 2.0;
  std::optional<Flicker> flicker;
  double noise_sigma = 0.0;
  Ellipse skin_shape;
  Rgb skin_color{190.0, 140.0, 115.0};
  Rgb bg_color{70.0, 90.0, 110.0};
  // Low-frequency additive background pattern, 0 for a flat background.
  double bg_texture_amp = 0.0;
  std::uint64_t bg_texture_seed = 0;
  std::uint64_t seed = 0;
  std::string sample_id = "clip";

  // Throws kParameter on an invalid spec.
  void Validate() const;
  std::size_t frame_count() const;
};

// Unit chrominance direction of the planted pulse.
Rgb PulseDirection();

struct SynthClip {
  FrameSequence frames;
  LandmarkTrack landmarks;
  ClipRecord record;
};

// Deterministic 68-point layout on the skin ellipse.
FaceLandmarks EllipseLandmarks(const Ellipse& e);

SynthClip Generate(const SynthSpec& spec);

enum class HrSampling { kTruncatedNormal, kGrid };

struct BenchmarkOptions {
  int n_subjects = 20;
  int clips_per_subject = 5;
  double hr_low = 49.0;
  double hr_high = 134.0;
  HrSampling sampling = HrSampling::kTruncatedNormal;
  double hr_mean = 80.0;
  double hr_sd = 15.0;
  double jitter_bpm = 1.0;
  double bg_texture_amp = 40.0;
  std::uint64_t seed = 0;
  // Geometry, noise and flicker for every clip; per-subject fields are
  // overwritten.
  SynthSpec base;
};

struct BenchmarkSubject {
  double hr_bpm = 0.0;
  Rgb skin_color{};
  Rgb bg_color{};
  std::uint64_t texture_seed = 0;
};

std::vector<BenchmarkSubject> SampleSubjects(const BenchmarkOptions& options);

// Per-clip specs in manifest order, sample ids s<subject>_c<clip>.
std::vector<SynthSpec> PlanBenchmark(const BenchmarkOptions& options);

// Writes <id>.rvid, <id>_landmarks.csv and manifest.csv under `dir`.
std::vector<ClipRecord> GenerateBenchmark(const BenchmarkOptions& options,
                                          const std::filesystem::path& dir, unsigned jobs = 1);

}  // namespace rppg
