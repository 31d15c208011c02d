#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rppg/evalkit.hpp"
#include "rppg/postproc.hpp"
#include "rppg/skinseg.hpp"
#include "rppg/spectral.hpp"

namespace rppg {

enum class RoiMethod { kLevelset, kLandmark };
enum class Estimator { kPeak, kAd };

std::string ToString(RoiMethod m);
std::string ToString(Estimator e);

struct PipelineConfig {
  RoiMethod roi_method = RoiMethod::kLandmark;
  double low_bpm = kDefaultLowBpm;
  double high_bpm = kDefaultHighBpm;
  Estimator estimator = Estimator::kPeak;
  bool fuse = false;
  std::uint64_t seed = 0;

  double chrom_window_s = kDefaultChromWindowS;
  bool pixelwise_bandpass = false;
  std::size_t pad_to = kDefaultPadTo;
  double snr_half_width_bins = 3.0;

  int gmm_components = 3;
  LevelSetParams levelset;

  double ad_window_s = 4.0;
  double ad_hop_s = 1.0;
  double ad_alpha_fast = 0.5;
  double ad_alpha_slow = 0.05;
  double ad_p_threshold = 0.1;
  double ad_delta_bpm = 5.0;
  std::size_t ad_trials = 1000;
  // Cached OutlierTable CSV; built in memory when empty.
  std::string ad_table;

  EmbeddingMode embedding = EmbeddingMode::kBackground;
  std::size_t group_size = 5;
  double eps_first = 0.01;
  double eps_last = 0.4;
  int eps_steps = 40;

  // Throws kParameter on invalid combinations.
  void Validate() const;
  double fallback_bpm() const { return 0.5 * (low_bpm + high_bpm); }
};

// key=value lines; '#' starts a comment. Unknown keys are rejected.
std::string FormatConfig(const PipelineConfig& config);
PipelineConfig ParseConfig(const std::string& text, PipelineConfig base = {});
void SetConfigValue(PipelineConfig& config, const std::string& key, const std::string& value);
PipelineConfig ReadConfig(const std::filesystem::path& path, PipelineConfig base = {});
void WriteConfig(const PipelineConfig& config, const std::filesystem::path& path);

struct ClipInput {
  ClipRecord record;
  FrameSequence frames;
  std::optional<LandmarkTrack> landmarks;
};

ClipInput LoadClip(const ClipRecord& record, const std::filesystem::path& base_dir);

RoiMask ComputeRoi(const ClipInput& clip, const PipelineConfig& config);

// Seed rectangle for the level-set method: landmark box of frame 0, pulled
// one pixel inside the frame.
Rect SeedBoxFromLandmarks(const FaceLandmarks& points, int width, int height);

PulseTrace ExtractPulse(const FrameSequence& frames, const RoiMask& mask,
                        const PipelineConfig& config);

HrEstimate EstimateHr(const PulseTrace& pulse, const PipelineConfig& config,
                      const OutlierTable* table = nullptr);

// Monte Carlo table matching the sliding-window length at `sample_rate`.
OutlierTable DefaultOutlierTable(const PipelineConfig& config, double sample_rate,
                                 unsigned jobs = 1);

struct ClipWarning {
  std::string sample_id;
  std::string message;
};

struct PipelineResult {
  Submission submission;
  std::vector<double> raw_bpm;
  std::vector<ClipWarning> warnings;
  std::optional<ClusterAssignment> grouping;
};

// Estimates one HR per clip; failed clips fall back to the band midpoint and
// are reported as warnings. Output follows manifest order.
PipelineResult RunPipeline(const std::vector<ClipRecord>& manifest,
                           const std::filesystem::path& base_dir, const PipelineConfig& config,
                           unsigned jobs = 1);

PipelineResult RunPipeline(const std::vector<ClipInput>& clips, const PipelineConfig& config,
                           unsigned jobs = 1);

void WriteWarnings(const std::vector<ClipWarning>& warnings, const std::filesystem::path& path);

}  // namespace rppg
