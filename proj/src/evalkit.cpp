#include "rppg/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rppg/error.hpp"

namespace rppg {
namespace {

using Json = nlohmann::ordered_json;

void CheckPair(const std::vector<double>& pred, const std::vector<double>& gt) {
  Require(!pred.empty() && pred.size() == gt.size(), ErrorKind::kParameter,
          "prediction and ground truth must have equal non-zero length");
}

Json MetricsJson(const Metrics& m) {
  Json j;
  j["mae"] = m.mae;
  j["rmse"] = m.rmse;
  j["r"] = m.r ? Json(*m.r) : Json(nullptr);
  j["n"] = m.n;
  return j;
}

Metrics MetricsFromJson(const Json& j) {
  Metrics m;
  m.mae = j.at("mae").get<double>();
  m.rmse = j.at("rmse").get<double>();
  if (!j.at("r").is_null()) m.r = j.at("r").get<double>();
  m.n = j.at("n").get<std::size_t>();
  return m;
}

// Dense ranks of `keys`, ascending; equal keys share a rank.
std::vector<int> DenseRanks(const std::vector<double>& keys) {
  std::vector<double> distinct = keys;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<int> ranks(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    ranks[i] = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), keys[i]) -
                                distinct.begin()) + 1;
  }
  return ranks;
}

std::string Fixed5(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

}  // namespace

double Mae(const std::vector<double>& pred, const std::vector<double>& gt) {
  CheckPair(pred, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
  return s / static_cast<double>(pred.size());
}

double Rmse(const std::vector<double>& pred, const std::vector<double>& gt) {
  CheckPair(pred, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::optional<double> PearsonR(const std::vector<double>& pred, const std::vector<double>& gt) {
  CheckPair(pred, gt);
  const std::size_t n = pred.size();
  if (n < 2) return std::nullopt;
  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mg += gt[i];
  }
  mp /= n;
  mg /= n;
  double spg = 0.0, spp = 0.0, sgg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    spg += (pred[i] - mp) * (gt[i] - mg);
    spp += (pred[i] - mp) * (pred[i] - mp);
    sgg += (gt[i] - mg) * (gt[i] - mg);
  }
  if (!(spp > 0.0) || !(sgg > 0.0)) return std::nullopt;
  return std::clamp(spg / std::sqrt(spp * sgg), -1.0, 1.0);
}

std::string ToString(HrBand band) {
  switch (band) {
    case HrBand::kLow: return "low";
    case HrBand::kMid: return "mid";
    case HrBand::kHigh: return "high";
  }
  return "?";
}

HrBand StratifyBand(double hr) {
  if (hr < 77.0) return HrBand::kLow;
  if (hr <= 90.0) return HrBand::kMid;
  return HrBand::kHigh;
}

std::vector<HrBand> StratifyBands(const std::vector<double>& gt) {
  std::vector<HrBand> out;
  out.reserve(gt.size());
  for (double v : gt) out.push_back(StratifyBand(v));
  return out;
}

void Submission::Validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    Require(!e.sample_id.empty(), ErrorKind::kValidation, "empty sample_id");
    Require(seen.insert(e.sample_id).second, ErrorKind::kValidation,
            "duplicate sample_id " + e.sample_id);
    Require(std::isfinite(e.hr_bpm) && e.hr_bpm > 0.0 && e.hr_bpm < 300.0, ErrorKind::kValidation,
            "prediction for " + e.sample_id + " outside (0, 300)");
  }
}

std::map<std::string, double> Submission::ById() const {
  std::map<std::string, double> out;
  for (const auto& e : entries) out[e.sample_id] = e.hr_bpm;
  return out;
}

Submission ReadSubmission(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  Submission sub;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (!header) {
      if (fields != std::vector<std::string>{"sample_id", "hr_bpm"}) {
        Fail(ErrorKind::kValidation, path.string() + ": expected header 'sample_id,hr_bpm'");
      }
      header = true;
      continue;
    }
    if (fields.size() != 2) Fail(ErrorKind::kValidation, path.string() + ": bad row '" + line + "'");
    double v = 0.0;
    try {
      v = ParseDouble(fields[1]);
    } catch (const Error&) {
      Fail(ErrorKind::kValidation, path.string() + ": bad prediction '" + fields[1] + "'");
    }
    sub.entries.push_back({fields[0], v});
  }
  if (!header) Fail(ErrorKind::kValidation, path.string() + ": missing header");
  sub.Validate();
  return sub;
}

void WriteSubmission(const Submission& sub, const std::filesystem::path& path) {
  sub.Validate();
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "sample_id,hr_bpm\n";
  for (const auto& e : sub.entries) out << e.sample_id << ',' << FormatDouble(e.hr_bpm) << '\n';
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

Metrics ComputeMetrics(const std::vector<double>& pred, const std::vector<double>& gt) {
  Metrics m;
  m.mae = Mae(pred, gt);
  m.rmse = Rmse(pred, gt);
  m.r = PearsonR(pred, gt);
  m.n = pred.size();
  return m;
}

EvalReport Evaluate(const Submission& sub, const std::vector<ClipRecord>& manifest) {
  sub.Validate();
  std::set<std::string> known;
  for (const auto& rec : manifest) known.insert(rec.sample_id);
  for (const auto& e : sub.entries) {
    if (!known.count(e.sample_id)) Fail(ErrorKind::kValidation, "unknown sample_id " + e.sample_id);
  }
  const auto by_id = sub.ById();
  std::vector<std::string> missing;
  std::vector<double> pred, gt;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> db, band;
  for (const auto& rec : manifest) {
    if (!rec.ground_truth_hr) continue;
    const auto it = by_id.find(rec.sample_id);
    if (it == by_id.end()) {
      missing.push_back(rec.sample_id);
      continue;
    }
    const double p = it->second;
    const double g = *rec.ground_truth_hr;
    pred.push_back(p);
    gt.push_back(g);
    auto& d = db[ToString(rec.database_tag)];
    d.first.push_back(p);
    d.second.push_back(g);
    auto& b = band[ToString(StratifyBand(g))];
    b.first.push_back(p);
    b.second.push_back(g);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    Fail(ErrorKind::kValidation, "submission lacks predictions for: " + list);
  }
  Require(!pred.empty(), ErrorKind::kValidation, "manifest has no labeled samples");
  EvalReport report;
  report.overall = ComputeMetrics(pred, gt);
  for (const auto& [k, v] : db) report.per_database[k] = ComputeMetrics(v.first, v.second);
  for (const auto& [k, v] : band) report.per_band[k] = ComputeMetrics(v.first, v.second);
  return report;
}

std::string ToJson(const EvalReport& report) {
  Json j;
  j["overall"] = MetricsJson(report.overall);
  Json dbs = Json::object();
  for (const auto& [k, m] : report.per_database) dbs[k] = MetricsJson(m);
  j["per_database"] = dbs;
  Json bands = Json::object();
  for (HrBand b : {HrBand::kLow, HrBand::kMid, HrBand::kHigh}) {
    const auto it = report.per_band.find(ToString(b));
    if (it != report.per_band.end()) bands[it->first] = MetricsJson(it->second);
  }
  j["per_band"] = bands;
  return j.dump(2) + "\n";
}

EvalReport ParseEvalReport(const std::string& text) {
  EvalReport r;
  try {
    const Json j = Json::parse(text);
    r.overall = MetricsFromJson(j.at("overall"));
    for (const auto& [k, v] : j.at("per_database").items()) r.per_database[k] = MetricsFromJson(v);
    for (const auto& [k, v] : j.at("per_band").items()) r.per_band[k] = MetricsFromJson(v);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("malformed report: ") + e.what());
  }
  return r;
}

EvalReport ReadEvalReport(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseEvalReport(ss.str());
}

void WriteEvalReport(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << ToJson(report);
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

std::vector<LeaderboardRow> Leaderboard(const std::vector<NamedResult>& results) {
  std::map<std::string, Metrics> best;
  std::vector<std::string> order;
  for (const auto& r : results) {
    auto it = best.find(r.name);
    if (it == best.end()) {
      best.emplace(r.name, r.metrics);
      order.push_back(r.name);
    } else if (r.metrics.mae < it->second.mae) {
      it->second = r.metrics;
    }
  }
  std::vector<LeaderboardRow> rows;
  for (const auto& name : order) rows.push_back({name, best[name], 0, 0, 0});
  std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    return a.metrics.mae < b.metrics.mae;
  });

  std::vector<double> mae, rmse, neg_r;
  for (const auto& row : rows) {
    mae.push_back(row.metrics.mae);
    rmse.push_back(row.metrics.rmse);
    neg_r.push_back(row.metrics.r ? -*row.metrics.r : std::numeric_limits<double>::infinity());
  }
  const auto rm = DenseRanks(mae), rr = DenseRanks(rmse), rc = DenseRanks(neg_r);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rank_mae = rm[i];
    rows[i].rank_rmse = rr[i];
    rows[i].rank_r = rc[i];
  }
  return rows;
}

std::string FormatLeaderboardText(const std::vector<LeaderboardRow>& rows) {
  std::vector<std::vector<std::string>> cells{{"#", "Name", "MAE", "RMSE", "R"}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string r = row.metrics.r ? Fixed5(*row.metrics.r) : std::string("undefined");
    cells.push_back({std::to_string(i + 1), row.name,
                     Fixed5(row.metrics.mae) + " (" + std::to_string(row.rank_mae) + ")",
                     Fixed5(row.metrics.rmse) + " (" + std::to_string(row.rank_rmse) + ")",
                     r + " (" + std::to_string(row.rank_r) + ")"});
  }
  std::vector<std::size_t> width(5, 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::string out;
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      text += line[c];
      if (c + 1 < line.size()) text += std::string(width[c] - line[c].size() + 2, ' ');
    }
    out += text + "\n";
  }
  return out;
}

std::string FormatLeaderboardCsv(const std::vector<LeaderboardRow>& rows) {
  std::string out = "position,name,mae,mae_rank,rmse,rmse_rank,r,r_rank\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    out += std::to_string(i + 1) + "," + row.name + "," + FormatDouble(row.metrics.mae) + "," +
           std::to_string(row.rank_mae) + "," + FormatDouble(row.metrics.rmse) + "," +
           std::to_string(row.rank_rmse) + "," + (row.metrics.r ? FormatDouble(*row.metrics.r) : "") +
           "," + std::to_string(row.rank_r) + "\n";
  }
  return out;
}

}  // namespace rppg
