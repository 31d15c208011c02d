#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "rppg/error.hpp"
#include "rppg/parallel.hpp"
#include "rppg/random.hpp"
#include "rppg/spectral.hpp"

namespace rppg {
namespace {

bool SameGrid(const Spectrum& a, const Spectrum& b) {
  return a.freqs_hz == b.freqs_hz && a.inband_begin == b.inband_begin &&
         a.inband_end == b.inband_end && a.low_bpm == b.low_bpm && a.high_bpm == b.high_bpm;
}

}  // namespace

double OutlierTable::Lookup(double snr_db) const {
  Require(!snr_grid_db.empty() && snr_grid_db.size() == p_outlier.size(), ErrorKind::kInvariant,
          "outlier table is empty");
  if (snr_db <= snr_grid_db.front()) return p_outlier.front();
  if (snr_db >= snr_grid_db.back()) return p_outlier.back();
  const auto it = std::upper_bound(snr_grid_db.begin(), snr_grid_db.end(), snr_db);
  const std::size_t hi = static_cast<std::size_t>(it - snr_grid_db.begin());
  const std::size_t lo = hi - 1;
  const double u = (snr_db - snr_grid_db[lo]) / (snr_grid_db[hi] - snr_grid_db[lo]);
  return p_outlier[lo] + u * (p_outlier[hi] - p_outlier[lo]);
}

double NoiseSigmaForSnr(double snr_db) {
  const double tone_power = 0.5;
  return std::sqrt(tone_power / std::pow(10.0, snr_db / 10.0));
}

OutlierTable BuildOutlierTable(const std::vector<double>& grid, double delta_bpm, std::size_t trials,
                               const TraceSpec& trace, std::uint64_t seed, unsigned jobs) {
  Require(trials >= 1000, ErrorKind::kParameter, "outlier table needs >= 1000 trials");
  Require(!grid.empty() && std::is_sorted(grid.begin(), grid.end()) &&
              std::adjacent_find(grid.begin(), grid.end()) == grid.end(),
          ErrorKind::kParameter, "SNR grid must be strictly ascending");
  Require(delta_bpm > 0.0, ErrorKind::kParameter, "delta must be positive");
  const auto samples = static_cast<std::size_t>(std::lround(trace.duration_s * trace.sample_rate));
  Require(samples >= 16, ErrorKind::kInsufficientData, "trace spec too short");

  OutlierTable table;
  table.snr_grid_db = grid;
  table.delta_bpm = delta_bpm;
  table.trials = trials;
  table.seed = seed;
  table.trace = trace;
  table.p_outlier.assign(grid.size(), 0.0);

  // Work is split into (grid point, block of trials) tasks; every trial owns
  // its RNG stream so the result does not depend on the thread count.
  constexpr std::size_t kBlock = 500;
  const std::size_t blocks = (trials + kBlock - 1) / kBlock;
  std::vector<std::size_t> outliers(grid.size() * blocks, 0);
  ParallelFor(grid.size() * blocks, jobs, [&](std::size_t task) {
    const std::size_t g = task / blocks;
    const std::size_t block = task % blocks;
    const double sigma = NoiseSigmaForSnr(grid[g]);
    PulseTrace x{std::vector<double>(samples), trace.sample_rate};
    std::size_t count = 0;
    for (std::size_t i = block * kBlock; i < std::min(trials, (block + 1) * kBlock); ++i) {
      std::mt19937_64 rng = MakeEngine(seed, {g, i});
      std::uniform_real_distribution<double> freq(trace.low_bpm, trace.high_bpm);
      std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
      std::normal_distribution<double> noise(0.0, sigma);
      const double truth_bpm = freq(rng);
      const double ph = phase(rng);
      const double w = 2.0 * std::numbers::pi * truth_bpm / 60.0 / trace.sample_rate;
      for (std::size_t n = 0; n < samples; ++n) x.samples[n] = std::sin(w * n + ph) + noise(rng);
      const Spectrum spec = Periodogram(x, trace.pad_to, trace.low_bpm, trace.high_bpm);
      if (std::abs(PickPeak(spec).bpm - truth_bpm) > delta_bpm) ++count;
    }
    outliers[task] = count;
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < blocks; ++b) total += outliers[g * blocks + b];
    table.p_outlier[g] = static_cast<double>(total) / static_cast<double>(trials);
  }
  return table;
}

void WriteOutlierTable(const OutlierTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "# delta_bpm=" << FormatDouble(table.delta_bpm) << "\n"
      << "# trials=" << table.trials << "\n"
      << "# seed=" << table.seed << "\n"
      << "# duration_s=" << FormatDouble(table.trace.duration_s) << "\n"
      << "# sample_rate=" << FormatDouble(table.trace.sample_rate) << "\n"
      << "# low_bpm=" << FormatDouble(table.trace.low_bpm) << "\n"
      << "# high_bpm=" << FormatDouble(table.trace.high_bpm) << "\n"
      << "# pad_to=" << table.trace.pad_to << "\n"
      << "snr_db,p_outlier\n";
  for (std::size_t i = 0; i < table.snr_grid_db.size(); ++i) {
    out << FormatDouble(table.snr_grid_db[i]) << ',' << FormatDouble(table.p_outlier[i]) << '\n';
  }
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

OutlierTable ReadOutlierTable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  OutlierTable table;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "delta_bpm") table.delta_bpm = ParseDouble(value);
      else if (key == "trials") table.trials = static_cast<std::size_t>(std::stoull(value));
      else if (key == "seed") table.seed = std::stoull(value);
      else if (key == "duration_s") table.trace.duration_s = ParseDouble(value);
      else if (key == "sample_rate") table.trace.sample_rate = ParseDouble(value);
      else if (key == "low_bpm") table.trace.low_bpm = ParseDouble(value);
      else if (key == "high_bpm") table.trace.high_bpm = ParseDouble(value);
      else if (key == "pad_to") table.trace.pad_to = static_cast<std::size_t>(std::stoull(value));
      continue;
    }
    if (!header) {
      if (SplitCsvLine(line) != std::vector<std::string>{"snr_db", "p_outlier"}) {
        Fail(ErrorKind::kFormat, path.string() + ": expected header 'snr_db,p_outlier'");
      }
      header = true;
      continue;
    }
    const auto fields = SplitCsvLine(line);
    if (fields.size() != 2) Fail(ErrorKind::kFormat, path.string() + ": bad row");
    table.snr_grid_db.push_back(ParseDouble(fields[0]));
    table.p_outlier.push_back(ParseDouble(fields[1]));
  }
  if (table.snr_grid_db.empty()) Fail(ErrorKind::kFormat, path.string() + ": empty table");
  return table;
}

AdTracker::AdTracker(OutlierTable table, AdParams params)
    : table_(std::move(table)), params_(params) {
  Require(params_.alpha_slow > 0.0 && params_.alpha_slow <= params_.alpha_fast &&
              params_.alpha_fast <= 1.0,
          ErrorKind::kParameter, "need 0 < alpha_slow <= alpha_fast <= 1");
  Require(params_.p_threshold >= 0.0 && params_.p_threshold <= 1.0, ErrorKind::kParameter,
          "p_threshold must be in [0, 1]");
}

AdStep AdTracker::Step(const Spectrum& spectrum) {
  AdStep step;
  if (!state_.initialized) {
    grid_ = spectrum;
  } else if (!SameGrid(grid_, spectrum)) {
    Fail(ErrorKind::kParameter, "spectra do not share a frequency grid");
  }
  try {
    const HrEstimate inst = PickPeak(spectrum, params_.snr);
    step.inst_snr_db = EstimateToneSnr(spectrum, inst.bpm, params_.snr);
    step.p_outlier = table_.Lookup(step.inst_snr_db);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoSignal) throw;
    step.inst_snr_db = -120.0;
    step.p_outlier = 1.0;
  }
  step.alpha = step.p_outlier < params_.p_threshold ? params_.alpha_fast : params_.alpha_slow;
  if (!state_.initialized) {
    state_.smoothed = spectrum.power;
    state_.initialized = true;
  } else {
    for (std::size_t k = 0; k < state_.smoothed.size(); ++k) {
      state_.smoothed[k] = (1.0 - step.alpha) * state_.smoothed[k] + step.alpha * spectrum.power[k];
    }
  }
  state_.alpha = step.alpha;
  grid_.power = state_.smoothed;
  step.estimate = PickPeak(grid_, params_.snr);
  step.estimate.method = HrMethod::kAdTracker;
  return step;
}

std::vector<AdStep> AdTrack(const std::vector<Spectrum>& spectra, const OutlierTable& table,
                            const AdParams& params) {
  AdTracker tracker(table, params);
  std::vector<AdStep> out;
  out.reserve(spectra.size());
  for (const Spectrum& s : spectra) out.push_back(tracker.Step(s));
  return out;
}

}  // namespace rppg
