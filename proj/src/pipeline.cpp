#include "rppg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include "rppg/error.hpp"
#include "rppg/parallel.hpp"

namespace rppg {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  Fail(ErrorKind::kParameter, key + ": expected true or false, got '" + v + "'");
}

std::uint64_t ParseUnsigned(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    Fail(ErrorKind::kParameter, key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    Fail(ErrorKind::kParameter, key + ": integer out of range");
  }
}

int ParseInt(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  Fail(ErrorKind::kParameter, key + ": expected an integer, got '" + v + "'");
}

double ParseReal(const std::string& key, const std::string& v) {
  try {
    return ParseDouble(v);
  } catch (const Error&) {
    Fail(ErrorKind::kParameter, key + ": expected a number, got '" + v + "'");
  }
}

// Key table shared by formatting and parsing so the two cannot drift apart.
struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

Field RealField(const char* key, double PipelineConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return FormatDouble(c.*m); },
          [m, key](PipelineConfig& c, const std::string& v) { c.*m = ParseReal(key, v); }};
}

Field LevelSetReal(const char* key, double LevelSetParams::*m) {
  return {key, [m](const PipelineConfig& c) { return FormatDouble(c.levelset.*m); },
          [m, key](PipelineConfig& c, const std::string& v) { c.levelset.*m = ParseReal(key, v); }};
}

Field LevelSetInt(const char* key, int LevelSetParams::*m) {
  return {key, [m](const PipelineConfig& c) { return std::to_string(c.levelset.*m); },
          [m, key](PipelineConfig& c, const std::string& v) { c.levelset.*m = ParseInt(key, v); }};
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"roi_method", [](const PipelineConfig& c) { return ToString(c.roi_method); },
       [](PipelineConfig& c, const std::string& v) {
         if (v == "levelset") c.roi_method = RoiMethod::kLevelset;
         else if (v == "landmark") c.roi_method = RoiMethod::kLandmark;
         else Fail(ErrorKind::kParameter, "roi_method: expected levelset or landmark");
       }},
      RealField("low_bpm", &PipelineConfig::low_bpm),
      RealField("high_bpm", &PipelineConfig::high_bpm),
      {"estimator", [](const PipelineConfig& c) { return ToString(c.estimator); },
       [](PipelineConfig& c, const std::string& v) {
         if (v == "peak") c.estimator = Estimator::kPeak;
         else if (v == "ad") c.estimator = Estimator::kAd;
         else Fail(ErrorKind::kParameter, "estimator: expected peak or ad");
       }},
      {"fuse", [](const PipelineConfig& c) { return std::string(c.fuse ? "true" : "false"); },
       [](PipelineConfig& c, const std::string& v) { c.fuse = ParseBool("fuse", v); }},
      {"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
       [](PipelineConfig& c, const std::string& v) { c.seed = ParseUnsigned("seed", v); }},
      RealField("chrom_window_s", &PipelineConfig::chrom_window_s),
      {"pixelwise_bandpass",
       [](const PipelineConfig& c) { return std::string(c.pixelwise_bandpass ? "true" : "false"); },
       [](PipelineConfig& c, const std::string& v) {
         c.pixelwise_bandpass = ParseBool("pixelwise_bandpass", v);
       }},
      {"pad_to", [](const PipelineConfig& c) { return std::to_string(c.pad_to); },
       [](PipelineConfig& c, const std::string& v) { c.pad_to = ParseUnsigned("pad_to", v); }},
      RealField("snr_half_width_bins", &PipelineConfig::snr_half_width_bins),
      {"gmm_components", [](const PipelineConfig& c) { return std::to_string(c.gmm_components); },
       [](PipelineConfig& c, const std::string& v) {
         c.gmm_components = ParseInt("gmm_components", v);
       }},
      LevelSetReal("levelset_nu", &LevelSetParams::nu),
      LevelSetReal("levelset_lambda_in", &LevelSetParams::lambda_in),
      LevelSetReal("levelset_lambda_out", &LevelSetParams::lambda_out),
      LevelSetReal("levelset_dt", &LevelSetParams::dt),
      LevelSetReal("levelset_epsilon", &LevelSetParams::epsilon),
      LevelSetInt("levelset_iterations_first", &LevelSetParams::iterations_first),
      LevelSetInt("levelset_iterations_next", &LevelSetParams::iterations_next),
      LevelSetInt("levelset_reinit_every", &LevelSetParams::reinit_every),
      LevelSetReal("levelset_ratio_clip", &LevelSetParams::ratio_clip),
      LevelSetInt("levelset_max_backtracks", &LevelSetParams::max_backtracks),
      RealField("ad_window_s", &PipelineConfig::ad_window_s),
      RealField("ad_hop_s", &PipelineConfig::ad_hop_s),
      RealField("ad_alpha_fast", &PipelineConfig::ad_alpha_fast),
      RealField("ad_alpha_slow", &PipelineConfig::ad_alpha_slow),
      RealField("ad_p_threshold", &PipelineConfig::ad_p_threshold),
      RealField("ad_delta_bpm", &PipelineConfig::ad_delta_bpm),
      {"ad_trials", [](const PipelineConfig& c) { return std::to_string(c.ad_trials); },
       [](PipelineConfig& c, const std::string& v) { c.ad_trials = ParseUnsigned("ad_trials", v); }},
      {"ad_table", [](const PipelineConfig& c) { return c.ad_table; },
       [](PipelineConfig& c, const std::string& v) { c.ad_table = v; }},
      {"embedding", [](const PipelineConfig& c) { return ToString(c.embedding); },
       [](PipelineConfig& c, const std::string& v) {
         if (v == "background") c.embedding = EmbeddingMode::kBackground;
         else if (v == "chest") c.embedding = EmbeddingMode::kChest;
         else Fail(ErrorKind::kParameter, "embedding: expected background or chest");
       }},
      {"group_size", [](const PipelineConfig& c) { return std::to_string(c.group_size); },
       [](PipelineConfig& c, const std::string& v) { c.group_size = ParseUnsigned("group_size", v); }},
      RealField("eps_first", &PipelineConfig::eps_first),
      RealField("eps_last", &PipelineConfig::eps_last),
      {"eps_steps", [](const PipelineConfig& c) { return std::to_string(c.eps_steps); },
       [](PipelineConfig& c, const std::string& v) { c.eps_steps = ParseInt("eps_steps", v); }},
  };
  return fields;
}

HrEstimate Fallback(const PipelineConfig& config) {
  HrEstimate e;
  e.bpm = config.fallback_bpm();
  e.snr_db = -120.0;
  e.method = config.estimator == Estimator::kAd ? HrMethod::kAdTracker : HrMethod::kPeak;
  return e;
}

// Outlier tables keyed by sample rate, built on first use.
class TableCache {
 public:
  TableCache(const PipelineConfig& config) : config_(config) {
    if (!config.ad_table.empty()) file_table_ = ReadOutlierTable(config.ad_table);
  }

  const OutlierTable& Get(double rate) {
    if (file_table_) return *file_table_;
    std::lock_guard<std::mutex> lock(mu_);
    auto it = tables_.find(rate);
    if (it == tables_.end()) it = tables_.emplace(rate, DefaultOutlierTable(config_, rate, 1)).first;
    return it->second;
  }

 private:
  const PipelineConfig& config_;
  std::optional<OutlierTable> file_table_;
  std::mutex mu_;
  std::map<double, OutlierTable> tables_;
};

using Loader = std::function<ClipInput(std::size_t)>;

PipelineResult RunCore(std::size_t n, const Loader& load, const std::vector<ClipRecord>& records,
                       const PipelineConfig& config, unsigned jobs) {
  config.Validate();
  std::optional<TableCache> tables;
  if (config.estimator == Estimator::kAd) tables.emplace(config);

  std::vector<HrEstimate> estimates(n);
  std::vector<std::optional<std::string>> failure(n);
  std::vector<std::optional<ColorEmbedding>> embeddings(n);
  std::vector<std::optional<std::string>> embed_failure(n);
  ParallelFor(n, jobs, [&](std::size_t i) {
    ClipInput clip;
    try {
      clip = load(i);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kIo) throw;
      failure[i] = e.what();
      estimates[i] = Fallback(config);
      return;
    }
    try {
      const RoiMask mask = ComputeRoi(clip, config);
      const PulseTrace pulse = ExtractPulse(clip.frames, mask, config);
      const OutlierTable* table = tables ? &tables->Get(pulse.sample_rate) : nullptr;
      estimates[i] = EstimateHr(pulse, config, table);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kIo) throw;
      failure[i] = e.what();
      estimates[i] = Fallback(config);
    }
    if (config.fuse) {
      try {
        ColorEmbedding emb = Embed(clip.frames.frames.front(), config.embedding);
        emb.Validate();
        embeddings[i] = std::move(emb);
      } catch (const Error& e) {
        embed_failure[i] = e.what();
      }
    }
  });

  PipelineResult result;
  for (std::size_t i = 0; i < n; ++i) {
    result.raw_bpm.push_back(estimates[i].bpm);
    if (failure[i]) result.warnings.push_back({records[i].sample_id, *failure[i]});
  }
  std::vector<double> final_bpm = result.raw_bpm;
  if (config.fuse) {
    // Group only clips with a usable embedding; the rest keep raw values.
    std::vector<std::size_t> usable;
    std::vector<ColorEmbedding> embs;
    for (std::size_t i = 0; i < n; ++i) {
      if (!embeddings[i]) {
        result.warnings.push_back({records[i].sample_id, "not grouped: " + *embed_failure[i]});
        continue;
      }
      usable.push_back(i);
      embs.push_back(*embeddings[i]);
    }
    ClusterAssignment sub;
    std::vector<std::size_t> dropped;
    try {
      sub = GroupByDbscan(embs, config.group_size,
                          GeometricSchedule(config.eps_first, config.eps_last, config.eps_steps), jobs);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerateEmbedding) throw;
      sub.labels.assign(embs.size(), -1);
      result.warnings.push_back({"", std::string("grouping skipped: ") + e.what()});
    }
    ClusterAssignment full;
    full.labels.assign(n, -1);
    for (const auto& group : sub.complete_groups) {
      std::vector<std::size_t> mapped;
      for (std::size_t k : group) mapped.push_back(usable[k]);
      const int id = static_cast<int>(full.complete_groups.size());
      for (std::size_t i : mapped) full.labels[i] = id;
      full.complete_groups.push_back(std::move(mapped));
    }
    if (config.group_size == 5) final_bpm = FuseGroups(result.raw_bpm, full);
    result.grouping = std::move(full);
  }
  for (std::size_t i = 0; i < n; ++i) {
    result.submission.entries.push_back({records[i].sample_id, final_bpm[i]});
  }
  result.submission.Validate();
  return result;
}

}  // namespace

std::string ToString(RoiMethod m) { return m == RoiMethod::kLevelset ? "levelset" : "landmark"; }
std::string ToString(Estimator e) { return e == Estimator::kPeak ? "peak" : "ad"; }

void PipelineConfig::Validate() const {
  Require(low_bpm > 0.0 && low_bpm < high_bpm, ErrorKind::kParameter, "band must satisfy 0 < low < high");
  Require(chrom_window_s > 0.0, ErrorKind::kParameter, "chrom_window_s must be positive");
  Require(pad_to >= 16 && (pad_to & (pad_to - 1)) == 0, ErrorKind::kParameter,
          "pad_to must be a power of two");
  Require(snr_half_width_bins > 0.0, ErrorKind::kParameter, "snr_half_width_bins must be positive");
  Require(gmm_components >= 1, ErrorKind::kParameter, "gmm_components must be >= 1");
  Require(ad_window_s > 0.0 && ad_hop_s > 0.0, ErrorKind::kParameter, "AD window and hop must be positive");
  Require(ad_alpha_slow > 0.0 && ad_alpha_slow <= ad_alpha_fast && ad_alpha_fast <= 1.0,
          ErrorKind::kParameter, "need 0 < ad_alpha_slow <= ad_alpha_fast <= 1");
  Require(ad_p_threshold >= 0.0 && ad_p_threshold <= 1.0, ErrorKind::kParameter,
          "ad_p_threshold must be in [0, 1]");
  Require(ad_delta_bpm > 0.0 && ad_trials >= 1000, ErrorKind::kParameter,
          "ad_delta_bpm must be positive and ad_trials >= 1000");
  Require(group_size >= 2, ErrorKind::kParameter, "group_size must be >= 2");
  Require(eps_first > 0.0 && eps_last >= eps_first && eps_steps >= 1, ErrorKind::kParameter,
          "invalid eps schedule");
}

std::string FormatConfig(const PipelineConfig& config) {
  std::string out;
  for (const Field& f : Fields()) out += std::string(f.key) + "=" + f.get(config) + "\n";
  return out;
}

void SetConfigValue(PipelineConfig& config, const std::string& key, const std::string& value) {
  for (const Field& f : Fields()) {
    if (key == f.key) {
      f.set(config, value);
      return;
    }
  }
  Fail(ErrorKind::kParameter, "unknown config key '" + key + "'");
}

PipelineConfig ParseConfig(const std::string& text, PipelineConfig config) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorKind::kParameter, "config line " + std::to_string(number) + ": expected key=value");
    }
    SetConfigValue(config, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return config;
}

PipelineConfig ReadConfig(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str(), std::move(base));
}

void WriteConfig(const PipelineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << FormatConfig(config);
}

ClipInput LoadClip(const ClipRecord& record, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  ClipInput clip;
  clip.record = record;
  clip.frames = ReadClip(resolve(record.path));
  if (!record.landmarks_path.empty()) {
    clip.landmarks = ReadLandmarks(resolve(record.landmarks_path), clip.frames.frame_count());
  }
  return clip;
}

Rect SeedBoxFromLandmarks(const FaceLandmarks& points, int width, int height) {
  const Rect box = LandmarkBox(points, width, height, 0.0);
  const int x0 = std::max(box.x, 1);
  const int y0 = std::max(box.y, 1);
  const int x1 = std::min(box.x + box.width, width - 1);
  const int y1 = std::min(box.y + box.height, height - 1);
  Require(x1 > x0 && y1 > y0, ErrorKind::kGeometry, "landmark box does not fit inside the frame");
  return {x0, y0, x1 - x0, y1 - y0};
}

RoiMask ComputeRoi(const ClipInput& clip, const PipelineConfig& config) {
  if (!clip.landmarks) {
    Fail(ErrorKind::kParameter, clip.record.sample_id + ": no landmarks for ROI selection");
  }
  const FrameSequence& seq = clip.frames;
  if (config.roi_method == RoiMethod::kLandmark) {
    return LandmarkMask(*clip.landmarks, seq.width, seq.height);
  }
  const Rect box = SeedBoxFromLandmarks(clip.landmarks->frames.front(), seq.width, seq.height);
  return SegmentClip(seq, box, config.levelset, config.gmm_components, config.seed).mask;
}

PulseTrace ExtractPulse(const FrameSequence& frames, const RoiMask& mask,
                        const PipelineConfig& config) {
  RgbTrace rgb;
  if (config.pixelwise_bandpass) {
    // Filtered pixels are zero-mean; restore each pixel's temporal mean so
    // CHROM's channel normalization stays defined.
    RealVolume vol = PixelwiseBandpass(frames, config.low_bpm, config.high_bpm);
    const std::size_t plane = static_cast<std::size_t>(frames.width) * frames.height * 3;
    std::vector<double> mean(plane, 0.0);
    for (const Image& img : frames.frames)
      for (std::size_t k = 0; k < plane; ++k) mean[k] += img.data[k];
    for (double& m : mean) m /= static_cast<double>(frames.frame_count());
    for (std::size_t t = 0; t < vol.frames; ++t)
      for (std::size_t k = 0; k < plane; ++k) vol.data[t * plane + k] += mean[k];
    rgb = PoolChannels(vol, mask);
  } else {
    rgb = PoolChannels(frames, mask);
  }
  const PulseTrace chrom = ChromProject(rgb, config.chrom_window_s);
  return Bandpass(chrom, config.low_bpm, config.high_bpm);
}

OutlierTable DefaultOutlierTable(const PipelineConfig& config, double sample_rate, unsigned jobs) {
  TraceSpec trace;
  trace.duration_s = config.ad_window_s;
  trace.sample_rate = sample_rate;
  trace.low_bpm = config.low_bpm;
  trace.high_bpm = config.high_bpm;
  trace.pad_to = config.pad_to;
  std::vector<double> grid;
  for (int s = -30; s <= 20; ++s) grid.push_back(s);
  return BuildOutlierTable(grid, config.ad_delta_bpm, config.ad_trials, trace, config.seed, jobs);
}

HrEstimate EstimateHr(const PulseTrace& pulse, const PipelineConfig& config,
                      const OutlierTable* table) {
  SnrOptions snr;
  snr.half_width_bins = config.snr_half_width_bins;
  if (config.estimator == Estimator::kPeak) {
    return PickPeak(Periodogram(pulse, config.pad_to, config.low_bpm, config.high_bpm), snr);
  }
  Require(table != nullptr, ErrorKind::kParameter, "AD estimator needs an outlier table");
  const auto spectra = SlidingSpectra(pulse, config.ad_window_s, config.ad_hop_s, config.pad_to,
                                      config.low_bpm, config.high_bpm);
  AdParams params;
  params.alpha_fast = config.ad_alpha_fast;
  params.alpha_slow = config.ad_alpha_slow;
  params.p_threshold = config.ad_p_threshold;
  params.snr = snr;
  return AdTrack(spectra, *table, params).back().estimate;
}

PipelineResult RunPipeline(const std::vector<ClipRecord>& manifest,
                           const std::filesystem::path& base_dir, const PipelineConfig& config,
                           unsigned jobs) {
  return RunCore(
      manifest.size(), [&](std::size_t i) { return LoadClip(manifest[i], base_dir); }, manifest,
      config, jobs);
}

PipelineResult RunPipeline(const std::vector<ClipInput>& clips, const PipelineConfig& config,
                           unsigned jobs) {
  std::vector<ClipRecord> records;
  for (const auto& c : clips) records.push_back(c.record);
  return RunCore(clips.size(), [&](std::size_t i) { return clips[i]; }, records, config, jobs);
}

void WriteWarnings(const std::vector<ClipWarning>& warnings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "sample_id,message\n";
  for (const auto& w : warnings) {
    std::string msg = w.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out << w.sample_id << ',' << msg << '\n';
  }
}

}  // namespace rppg
