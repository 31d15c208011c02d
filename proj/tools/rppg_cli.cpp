// rppg: command-line front end for synthesis, estimation and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rppg/error.hpp"
#include "rppg/evalkit.hpp"
#include "rppg/pipeline.hpp"
#include "rppg/postproc.hpp"
#include "rppg/spectral.hpp"
#include "rppg/synth.hpp"

namespace fs = std::filesystem;
using namespace rppg;

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned jobs = 1;
  std::string config_path;
  std::vector<std::string> overrides;
};

void AddCommon(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "RNG seed")->each([&](const std::string&) { common.seed_set = true; });
  cmd->add_option("--jobs", common.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--config", common.config_path, "key=value pipeline config file");
  cmd->add_option("--set", common.overrides, "config override key=value (repeatable)");
}

PipelineConfig LoadConfig(const Common& common) {
  PipelineConfig config;
  if (!common.config_path.empty()) config = ReadConfig(common.config_path);
  for (const std::string& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) Fail(ErrorKind::kParameter, "--set expects key=value, got '" + kv + "'");
    SetConfigValue(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (common.seed_set) config.seed = common.seed;
  config.Validate();
  return config;
}

void WriteText(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << text;
}

std::vector<ClipRecord> SelectRecords(const fs::path& manifest, const std::string& sample) {
  auto records = ReadManifest(manifest);
  if (sample.empty()) return records;
  for (const auto& r : records)
    if (r.sample_id == sample) return {r};
  Fail(ErrorKind::kValidation, "sample '" + sample + "' not in manifest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote photoplethysmography heart-rate toolkit"};
  app.require_subcommand(1);

  Common common;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
  AddCommon(synth, common);
  BenchmarkOptions bench;
  std::string synth_out;
  std::string sampling = "normal";
  double flicker_bpm = 0.0, flicker_depth = 0.0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--subjects", bench.n_subjects, "number of subjects");
  synth->add_option("--clips", bench.clips_per_subject, "clips per subject");
  synth->add_option("--hr-low", bench.hr_low, "lowest subject HR (bpm)");
  synth->add_option("--hr-high", bench.hr_high, "highest subject HR (bpm)");
  synth->add_option("--sampling", sampling, "subject HR sampling: normal or grid")
      ->check(CLI::IsMember({"normal", "grid"}));
  synth->add_option("--width", bench.base.width, "frame width");
  synth->add_option("--height", bench.base.height, "frame height");
  synth->add_option("--duration", bench.base.duration_s, "clip length in seconds");
  synth->add_option("--fps", bench.base.fps.num, "integer frame rate");
  synth->add_option("--pulse-amp", bench.base.pulse_amp, "pulse amplitude (gray levels)");
  synth->add_option("--noise", bench.base.noise_sigma, "white noise sigma (gray levels)");
  synth->add_option("--flicker-bpm", flicker_bpm, "illumination flicker rate");
  synth->add_option("--flicker-depth", flicker_depth, "illumination flicker depth");
  synth->add_option("--texture-amp", bench.bg_texture_amp, "background texture amplitude");

  // segment
  auto* segment = app.add_subcommand("segment", "dump ROI masks as PBM files");
  AddCommon(segment, common);
  std::string seg_manifest, seg_out, seg_sample;
  segment->add_option("--manifest", seg_manifest, "manifest CSV")->required();
  segment->add_option("--out", seg_out, "output directory")->required();
  segment->add_option("--sample", seg_sample, "only this sample id");

  // estimate
  auto* estimate = app.add_subcommand("estimate", "estimate HR for every clip of a manifest");
  AddCommon(estimate, common);
  std::string est_manifest, est_out, est_grouping;
  estimate->add_option("--manifest", est_manifest, "manifest CSV")->required();
  estimate->add_option("--out", est_out, "submission CSV")->required();
  estimate->add_option("--grouping", est_grouping, "write the grouping report here (needs fuse)");

  // group
  auto* group = app.add_subcommand("group", "group clips by color embedding");
  AddCommon(group, common);
  std::string grp_manifest, grp_out;
  group->add_option("--manifest", grp_manifest, "manifest CSV")->required();
  group->add_option("--out", grp_out, "grouping CSV")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a submission against a manifest");
  AddCommon(evaluate, common);
  std::string ev_sub, ev_manifest, ev_out;
  evaluate->add_option("--submission", ev_sub, "submission CSV")->required();
  evaluate->add_option("--manifest", ev_manifest, "manifest CSV")->required();
  evaluate->add_option("--out", ev_out, "report JSON (default stdout)");

  // leaderboard
  auto* board = app.add_subcommand("leaderboard", "rank evaluation reports");
  AddCommon(board, common);
  std::vector<std::string> board_reports;
  std::string board_csv, board_out;
  board->add_option("reports", board_reports, "report files, optionally name=path")->required();
  board->add_option("--csv", board_csv, "also write the table as CSV");
  board->add_option("--out", board_out, "text table (default stdout)");

  // adtable
  auto* adtable = app.add_subcommand("adtable", "build the Monte Carlo outlier table");
  AddCommon(adtable, common);
  std::string ad_out;
  std::size_t ad_trials = 10000;
  double ad_delta = 5.0, snr_min = -30.0, snr_max = 20.0, snr_step = 1.0;
  TraceSpec ad_trace;
  adtable->add_option("--out", ad_out, "table CSV")->required();
  adtable->add_option("--trials", ad_trials, "Monte Carlo trials per SNR");
  adtable->add_option("--delta", ad_delta, "outlier threshold (bpm)");
  adtable->add_option("--snr-min", snr_min, "lowest SNR (dB)");
  adtable->add_option("--snr-max", snr_max, "highest SNR (dB)");
  adtable->add_option("--snr-step", snr_step, "SNR grid step (dB)");
  adtable->add_option("--duration", ad_trace.duration_s, "trace length (s)");
  adtable->add_option("--rate", ad_trace.sample_rate, "sample rate (Hz)");

  // morph
  auto* morph = app.add_subcommand("morph", "frequency-morph and/or mirror a clip");
  AddCommon(morph, common);
  std::string mo_clip, mo_landmarks, mo_out, mo_landmarks_out;
  double mo_factor = 1.0, mo_hr = 0.0;
  bool mo_flip = false;
  morph->add_option("--clip", mo_clip, "input clip")->required();
  morph->add_option("--landmarks", mo_landmarks, "input landmark CSV");
  morph->add_option("--factor", mo_factor, "speed factor in [0.5, 2]");
  morph->add_option("--hr", mo_hr, "ground-truth HR of the input (bpm)");
  morph->add_flag("--hflip", mo_flip, "mirror frames left-right");
  morph->add_option("--out", mo_out, "output clip")->required();
  morph->add_option("--landmarks-out", mo_landmarks_out, "output landmark CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      bench.seed = common.seed;
      bench.sampling = sampling == "grid" ? HrSampling::kGrid : HrSampling::kTruncatedNormal;
      if (flicker_depth > 0.0) bench.base.flicker = Flicker{flicker_bpm, flicker_depth};
      const auto records = GenerateBenchmark(bench, synth_out, common.jobs);
      std::cout << "wrote " << records.size() << " clips to " << synth_out << "\n";
    } else if (segment->parsed()) {
      const PipelineConfig config = LoadConfig(common);
      const fs::path manifest(seg_manifest);
      for (const auto& rec : SelectRecords(manifest, seg_sample)) {
        const ClipInput clip = LoadClip(rec, manifest.parent_path());
        WriteMaskPbm(ComputeRoi(clip, config), fs::path(seg_out) / rec.sample_id);
      }
    } else if (estimate->parsed()) {
      const PipelineConfig config = LoadConfig(common);
      const fs::path manifest(est_manifest);
      const auto records = ReadManifest(manifest);
      const PipelineResult result = RunPipeline(records, manifest.parent_path(), config, common.jobs);
      WriteSubmission(result.submission, est_out);
      const fs::path warn_path = est_out + ".warnings.csv";
      if (!result.warnings.empty()) {
        WriteWarnings(result.warnings, warn_path);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w.sample_id << ": " << w.message << "\n";
      } else {
        std::error_code ec;
        fs::remove(warn_path, ec);
      }
      if (!est_grouping.empty()) {
        Require(result.grouping.has_value(), ErrorKind::kParameter, "--grouping needs fuse=true");
        std::vector<std::string> ids;
        for (const auto& r : records) ids.push_back(r.sample_id);
        WriteGrouping(ids, *result.grouping, est_grouping);
      }
    } else if (group->parsed()) {
      const PipelineConfig config = LoadConfig(common);
      const fs::path manifest(grp_manifest);
      const auto records = ReadManifest(manifest);
      std::vector<ColorEmbedding> embs;
      std::vector<std::string> ids;
      for (const auto& rec : records) {
        const FrameSequence seq = LoadClip(rec, manifest.parent_path()).frames;
        embs.push_back(Embed(seq.frames.front(), config.embedding));
        ids.push_back(rec.sample_id);
      }
      const auto assignment = GroupByDbscan(
          embs, config.group_size, GeometricSchedule(config.eps_first, config.eps_last, config.eps_steps),
          common.jobs);
      WriteGrouping(ids, assignment, grp_out);
      std::cout << assignment.complete_groups.size() << " complete groups\n";
    } else if (evaluate->parsed()) {
      const auto report = Evaluate(ReadSubmission(ev_sub), ReadManifest(ev_manifest));
      WriteText(ToJson(report), ev_out);
    } else if (board->parsed()) {
      std::vector<NamedResult> results;
      for (const std::string& arg : board_reports) {
        const auto eq = arg.find('=');
        const std::string path = eq == std::string::npos ? arg : arg.substr(eq + 1);
        const std::string name = eq == std::string::npos ? fs::path(arg).stem().string() : arg.substr(0, eq);
        results.push_back({name, ReadEvalReport(path).overall});
      }
      const auto rows = Leaderboard(results);
      WriteText(FormatLeaderboardText(rows), board_out);
      if (!board_csv.empty()) WriteText(FormatLeaderboardCsv(rows), board_csv);
    } else if (adtable->parsed()) {
      Require(snr_step > 0.0 && snr_max >= snr_min, ErrorKind::kParameter, "invalid SNR grid");
      std::vector<double> grid;
      const int steps = static_cast<int>(std::floor((snr_max - snr_min) / snr_step + 1e-9));
      for (int i = 0; i <= steps; ++i) grid.push_back(snr_min + i * snr_step);
      const auto table = BuildOutlierTable(grid, ad_delta, ad_trials, ad_trace, common.seed, common.jobs);
      WriteOutlierTable(table, ad_out);
    } else if (morph->parsed()) {
      FrameSequence seq = ReadClip(mo_clip);
      std::optional<LandmarkTrack> track;
      if (!mo_landmarks.empty()) track = ReadLandmarks(mo_landmarks, seq.frame_count());
      double hr = mo_hr;
      if (mo_factor != 1.0) {
        MorphResult r = FrequencyMorph(seq, mo_factor, mo_hr, track ? &*track : nullptr);
        seq = std::move(r.clip);
        track = std::move(r.landmarks);
        hr = r.hr_bpm;
        if (r.out_of_band) std::cerr << "warning: morphed HR " << FormatDouble(hr) << " bpm is outside [45, 180]\n";
      }
      if (mo_flip) {
        if (track) track = HFlip(*track, seq.width);
        seq = HFlip(seq);
      }
      WriteClip(seq, mo_out);
      if (track && !mo_landmarks_out.empty()) WriteLandmarks(*track, mo_landmarks_out);
      if (mo_hr > 0.0) std::cout << "hr_bpm=" << FormatDouble(hr) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kIo ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
