#include "rppg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rppg/error.hpp"
#include "rppg/parallel.hpp"
#include "rppg/random.hpp"

namespace rppg {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct TextureWave {
  double kx, ky;
  std::array<double, 3> phase;
};

std::vector<TextureWave> MakeTexture(std::uint64_t seed) {
  std::mt19937_64 rng = MakeEngine(seed, {0x7e});
  std::uniform_real_distribution<double> wavelength(8.0, 24.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::vector<TextureWave> waves(3);
  for (auto& w : waves) {
    const double k = kTwoPi / wavelength(rng);
    const double a = angle(rng);
    w.kx = k * std::cos(a);
    w.ky = k * std::sin(a);
    for (double& p : w.phase) p = angle(rng);
  }
  return waves;
}

Point2 OnEllipse(const Ellipse& e, double theta, double sx = 1.0, double sy = 1.0) {
  return {e.cx + sx * e.ax * std::cos(theta), e.cy + sy * e.ay * std::sin(theta)};
}

double Truncated(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> dist(mean, sd);
  for (;;) {
    const double v = dist(rng);
    if (v >= lo && v <= hi) return v;
  }
}

}  // namespace

bool Ellipse::Contains(double x, double y) const {
  const double u = (x - cx) / ax;
  const double v = (y - cy) / ay;
  return u * u + v * v <= 1.0;
}

void SynthSpec::Validate() const {
  Require(width >= 8 && height >= 8, ErrorKind::kParameter, "frame must be at least 8x8");
  Require(fps.num > 0 && fps.den > 0, ErrorKind::kParameter, "fps must be positive");
  Require(duration_s > 0.0 && frame_count() >= 4, ErrorKind::kParameter, "clip too short");
  Require(hr_bpm > 30.0 && hr_bpm < 240.0, ErrorKind::kParameter, "hr_bpm must lie in (30, 240)");
  Require(pulse_amp >= 0.0 && std::isfinite(pulse_amp), ErrorKind::kParameter,
          "pulse_amp must be non-negative");
  Require(noise_sigma >= 0.0 && bg_texture_amp >= 0.0, ErrorKind::kParameter,
          "noise and texture amplitudes must be non-negative");
  if (flicker) {
    Require(flicker->freq_bpm > 0.0 && flicker->depth >= 0.0 && flicker->depth < 1.0,
            ErrorKind::kParameter, "flicker needs freq > 0 and depth in [0, 1)");
  }
  const Ellipse& e = skin_shape;
  Require(e.ax > 0.0 && e.ay > 0.0 && e.cx - e.ax >= 0.0 && e.cx + e.ax <= width &&
              e.cy - e.ay >= 0.0 && e.cy + e.ay <= height,
          ErrorKind::kParameter, "skin ellipse must lie inside the frame");
  for (const Rgb* c : {&skin_color, &bg_color})
    for (double v : *c) Require(v >= 0.0 && v <= 255.0, ErrorKind::kParameter, "color out of range");
}

std::size_t SynthSpec::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * fps.value()));
}

Rgb PulseDirection() {
  const double n = std::sqrt(0.33 * 0.33 + 0.77 * 0.77 + 0.53 * 0.53);
  return {0.33 / n, 0.77 / n, 0.53 / n};
}

FaceLandmarks EllipseLandmarks(const Ellipse& e) {
  FaceLandmarks p{};
  // Jaw: lower half, left to right.
  for (int i = 0; i < 17; ++i) p[i] = OnEllipse(e, std::numbers::pi - std::numbers::pi * i / 16.0);
  const double brow_y = e.cy - 0.45 * e.ay;
  for (int i = 0; i < 5; ++i) {
    p[17 + i] = {e.cx - e.ax * (0.8 - 0.15 * i), brow_y};
    p[22 + i] = {e.cx + e.ax * (0.2 + 0.15 * i), brow_y};
  }
  for (int i = 0; i < 4; ++i) p[27 + i] = {e.cx, e.cy - e.ay * (0.35 - 0.1 * i)};
  for (int i = 0; i < 5; ++i) p[31 + i] = {e.cx + e.ax * (-0.15 + 0.075 * i), e.cy + 0.05 * e.ay};
  for (int side = 0; side < 2; ++side) {
    const Ellipse eye{e.cx + (side == 0 ? -0.4 : 0.4) * e.ax, e.cy - 0.25 * e.ay, 0.15 * e.ax,
                      0.07 * e.ay};
    for (int i = 0; i < 6; ++i) p[36 + 6 * side + i] = OnEllipse(eye, std::numbers::pi + std::numbers::pi * i / 3.0);
  }
  const Ellipse mouth{e.cx, e.cy + 0.5 * e.ay, 0.3 * e.ax, 0.1 * e.ay};
  for (int i = 0; i < 12; ++i) p[48 + i] = OnEllipse(mouth, std::numbers::pi + kTwoPi * i / 12.0);
  for (int i = 0; i < 8; ++i) {
    p[60 + i] = OnEllipse(mouth, std::numbers::pi + kTwoPi * i / 8.0, 0.2 / 0.3, 0.5);
  }
  return p;
}

SynthClip Generate(const SynthSpec& spec) {
  spec.Validate();
  const std::size_t n = spec.frame_count();
  const double rate = spec.fps.value();
  const Rgb d = PulseDirection();
  const auto waves = MakeTexture(spec.bg_texture_seed);

  // Static background and skin membership.
  const std::size_t pixels = static_cast<std::size_t>(spec.width) * spec.height;
  std::vector<double> background(pixels * 3);
  std::vector<std::uint8_t> skin(pixels);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
      skin[i] = spec.skin_shape.Contains(x + 0.5, y + 0.5);
      for (int c = 0; c < 3; ++c) {
        double v = spec.bg_color[c];
        if (spec.bg_texture_amp > 0.0) {
          double t = 0.0;
          for (const auto& w : waves) t += std::sin(w.kx * x + w.ky * y + w.phase[c]);
          v += spec.bg_texture_amp * t / static_cast<double>(waves.size());
        }
        background[i * 3 + c] = v;
      }
    }
  }

  SynthClip clip;
  clip.frames.width = spec.width;
  clip.frames.height = spec.height;
  clip.frames.fps = spec.fps;
  clip.frames.frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    const double t = static_cast<double>(f) / rate;
    const double pulse = spec.pulse_amp * std::sin(kTwoPi * spec.hr_bpm / 60.0 * t);
    const double gain =
        spec.flicker ? 1.0 + spec.flicker->depth * std::sin(kTwoPi * spec.flicker->freq_bpm / 60.0 * t)
                     : 1.0;
    std::mt19937_64 rng = MakeEngine(spec.seed, {f});
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    Image img(spec.width, spec.height);
    for (std::size_t i = 0; i < pixels; ++i) {
      for (int c = 0; c < 3; ++c) {
        double v = skin[i] ? spec.skin_color[c] + pulse * d[c] : background[i * 3 + c];
        v *= gain;
        if (spec.noise_sigma > 0.0) v += noise(rng);
        img.data[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
    clip.frames.frames.push_back(std::move(img));
  }
  clip.landmarks.frames.assign(n, EllipseLandmarks(spec.skin_shape));
  clip.record.sample_id = spec.sample_id;
  clip.record.ground_truth_hr = spec.hr_bpm;
  return clip;
}

std::vector<BenchmarkSubject> SampleSubjects(const BenchmarkOptions& o) {
  Require(o.n_subjects >= 1 && o.clips_per_subject >= 1, ErrorKind::kParameter,
          "need at least one subject and one clip");
  Require(o.hr_low < o.hr_high, ErrorKind::kParameter, "invalid HR range");
  std::vector<BenchmarkSubject> out(static_cast<std::size_t>(o.n_subjects));
  for (int s = 0; s < o.n_subjects; ++s) {
    std::mt19937_64 rng = MakeEngine(o.seed, {0x5b, static_cast<std::uint64_t>(s)});
    BenchmarkSubject& sub = out[s];
    if (o.sampling == HrSampling::kGrid) {
      sub.hr_bpm = o.n_subjects == 1
                       ? 0.5 * (o.hr_low + o.hr_high)
                       : o.hr_low + (o.hr_high - o.hr_low) * s / (o.n_subjects - 1.0);
    } else {
      sub.hr_bpm = Truncated(rng, o.hr_mean, o.hr_sd, o.hr_low, o.hr_high);
    }
    std::uniform_real_distribution<double> skin_offset(-15.0, 15.0);
    std::uniform_real_distribution<double> bg(40.0, 200.0);
    for (int c = 0; c < 3; ++c) sub.skin_color[c] = o.base.skin_color[c] + skin_offset(rng);
    for (int c = 0; c < 3; ++c) sub.bg_color[c] = bg(rng);
    sub.texture_seed = rng();
  }
  return out;
}

std::vector<SynthSpec> PlanBenchmark(const BenchmarkOptions& o) {
  const auto subjects = SampleSubjects(o);
  std::vector<SynthSpec> specs;
  for (int s = 0; s < o.n_subjects; ++s) {
    for (int c = 0; c < o.clips_per_subject; ++c) {
      std::mt19937_64 rng = MakeEngine(o.seed, {0xc1, static_cast<std::uint64_t>(s),
                                                static_cast<std::uint64_t>(c)});
      std::uniform_real_distribution<double> jitter(-o.jitter_bpm, o.jitter_bpm);
      SynthSpec spec = o.base;
      spec.hr_bpm = std::clamp(subjects[s].hr_bpm + jitter(rng), o.hr_low, o.hr_high);
      spec.skin_color = subjects[s].skin_color;
      spec.bg_color = subjects[s].bg_color;
      spec.bg_texture_amp = o.bg_texture_amp;
      spec.bg_texture_seed = subjects[s].texture_seed;
      spec.seed = rng();
      spec.sample_id = "s" + std::to_string(s) + "_c" + std::to_string(c);
      specs.push_back(spec);
    }
  }
  return specs;
}

std::vector<ClipRecord> GenerateBenchmark(const BenchmarkOptions& o, const std::filesystem::path& dir,
                                          unsigned jobs) {
  const auto specs = PlanBenchmark(o);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + dir.string());
  std::vector<ClipRecord> records(specs.size());
  ParallelFor(specs.size(), jobs, [&](std::size_t i) {
    const SynthClip clip = Generate(specs[i]);
    const std::string id = specs[i].sample_id;
    WriteClip(clip.frames, dir / (id + ".rvid"));
    WriteLandmarks(clip.landmarks, dir / (id + "_landmarks.csv"));
    ClipRecord rec = clip.record;
    rec.path = id + ".rvid";
    rec.landmarks_path = id + "_landmarks.csv";
    rec.database_tag = (i / static_cast<std::size_t>(o.clips_per_subject)) % 2 == 0 ? DatabaseTag::kA
                                                                                    : DatabaseTag::kB;
    records[i] = rec;
  });
  WriteManifest(records, dir / "manifest.csv");
  return records;
}

}  // namespace rppg
