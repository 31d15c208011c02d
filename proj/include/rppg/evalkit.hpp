#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rppg/videoio.hpp"

namespace rppg {

double Mae(const std::vector<double>& pred, const std::vector<double>& gt);
double Rmse(const std::vector<double>& pred, const std::vector<double>& gt);
// Empty when fewer than two samples or either side has zero variance.
std::optional<double> PearsonR(const std::vector<double>& pred, const std::vector<double>& gt);

enum class HrBand { kLow, kMid, kHigh };
std::string ToString(HrBand band);

// low: < 77, mid: 77..90 inclusive, high: > 90.
HrBand StratifyBand(double hr_bpm);
std::vector<HrBand> StratifyBands(const std::vector<double>& gt);

struct SubmissionEntry {
  std::string sample_id;
  double hr_bpm = 0.0;
};

// Predictions in file order.
struct Submission {
  std::vector<SubmissionEntry> entries;

  // Unique ids, finite predictions in (0, 300).
  void Validate() const;
  std::map<std::string, double> ById() const;
};

Submission ReadSubmission(const std::filesystem::path& path);
void WriteSubmission(const Submission& sub, const std::filesystem::path& path);

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r;
  std::size_t n = 0;
};

Metrics ComputeMetrics(const std::vector<double>& pred, const std::vector<double>& gt);

// Strata with no samples are omitted.
struct EvalReport {
  Metrics overall;
  std::map<std::string, Metrics> per_database;
  std::map<std::string, Metrics> per_band;
};

EvalReport Evaluate(const Submission& sub, const std::vector<ClipRecord>& manifest);

std::string ToJson(const EvalReport& report);
EvalReport ReadEvalReport(const std::filesystem::path& path);
EvalReport ParseEvalReport(const std::string& json_text);
void WriteEvalReport(const EvalReport& report, const std::filesystem::path& path);

struct NamedResult {
  std::string name;
  Metrics metrics;
};

struct LeaderboardRow {
  std::string name;
  Metrics metrics;
  int rank_mae = 0;
  int rank_rmse = 0;
  int rank_r = 0;
};

// Keeps the minimum-MAE result per name and orders rows by MAE. Per-metric
// ranks are dense: equal values share a rank and the next value gets the
// following integer. Lower MAE/RMSE and higher R rank first; an undefined R
// ranks after every defined one.
std::vector<LeaderboardRow> Leaderboard(const std::vector<NamedResult>& results);

std::string FormatLeaderboardText(const std::vector<LeaderboardRow>& rows);
std::string FormatLeaderboardCsv(const std::vector<LeaderboardRow>& rows);

}  // namespace rppg
