#include "rppg/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rppg/error.hpp"
#include "rppg/parallel.hpp"
#include "rppg/pulse.hpp"

namespace rppg {

std::string ToString(EmbeddingMode mode) {
  return mode == EmbeddingMode::kBackground ? "background" : "chest";
}

std::size_t ColorEmbedding::ExpectedLength(EmbeddingMode mode) {
  return mode == EmbeddingMode::kBackground
             ? 2u * kBackgroundGridH * kBackgroundGridW * 3
             : static_cast<std::size_t>(kChestGridH) * kChestGridW * 3;
}

void ColorEmbedding::Validate() const {
  Require(values.size() == ExpectedLength(mode), ErrorKind::kInvariant,
          "embedding length does not match its mode");
  for (double v : values) Require(std::isfinite(v), ErrorKind::kInvariant, "non-finite embedding value");
}

void AppendBlockMeans(const Image& frame, const Rect& rect, int grid_h, int grid_w,
                      std::vector<double>& out) {
  Require(rect.x >= 0 && rect.y >= 0 && rect.x + rect.width <= frame.width &&
              rect.y + rect.height <= frame.height,
          ErrorKind::kGeometry, "pooling rectangle exceeds the frame");
  Require(rect.width >= grid_w && rect.height >= grid_h, ErrorKind::kGeometry,
          "pooling rectangle smaller than its grid");
  for (int gy = 0; gy < grid_h; ++gy) {
    const int y0 = rect.y + gy * rect.height / grid_h;
    const int y1 = rect.y + (gy + 1) * rect.height / grid_h;
    for (int gx = 0; gx < grid_w; ++gx) {
      const int x0 = rect.x + gx * rect.width / grid_w;
      const int x1 = rect.x + (gx + 1) * rect.width / grid_w;
      double sum[3] = {0.0, 0.0, 0.0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) sum[c] += frame.at(x, y, c);
      const double count = static_cast<double>(y1 - y0) * (x1 - x0);
      for (int c = 0; c < 3; ++c) out.push_back(sum[c] / count);
    }
  }
}

ColorEmbedding BackgroundEmbedding(const Image& frame) {
  const int w = std::min(kBackgroundRectW, frame.width / 2);
  const int h = std::min(kBackgroundRectH, frame.height);
  if (w < kBackgroundGridW || h < kBackgroundGridH) {
    Fail(ErrorKind::kGeometry, "frame too small for a background embedding");
  }
  ColorEmbedding e;
  e.mode = EmbeddingMode::kBackground;
  e.clipped = w < kBackgroundRectW || h < kBackgroundRectH;
  e.values.reserve(ColorEmbedding::ExpectedLength(e.mode));
  AppendBlockMeans(frame, {0, 0, w, h}, kBackgroundGridH, kBackgroundGridW, e.values);
  AppendBlockMeans(frame, {frame.width - w, 0, w, h}, kBackgroundGridH, kBackgroundGridW, e.values);
  return e;
}

ColorEmbedding ChestEmbedding(const Image& frame) {
  if (frame.height < kChestRows || frame.width < kChestGridW) {
    Fail(ErrorKind::kGeometry, "chest embedding needs at least 420 rows");
  }
  ColorEmbedding e;
  e.mode = EmbeddingMode::kChest;
  e.clipped = frame.width != 1080;
  e.values.reserve(ColorEmbedding::ExpectedLength(e.mode));
  AppendBlockMeans(frame, {0, frame.height - kChestRows, frame.width, kChestRows}, kChestGridH,
                   kChestGridW, e.values);
  return e;
}

ColorEmbedding Embed(const Image& frame, EmbeddingMode mode) {
  return mode == EmbeddingMode::kBackground ? BackgroundEmbedding(frame) : ChestEmbedding(frame);
}

double PearsonDistance(const ColorEmbedding& a, const ColorEmbedding& b) {
  Require(a.mode == b.mode && a.values.size() == b.values.size(), ErrorKind::kParameter,
          "embeddings differ in mode or length");
  const std::size_t n = a.values.size();
  Require(n >= 2, ErrorKind::kDegenerateEmbedding, "embedding too short");
  const double ma = std::accumulate(a.values.begin(), a.values.end(), 0.0) / n;
  const double mb = std::accumulate(b.values.begin(), b.values.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.values[i] - ma;
    const double db = b.values[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    Fail(ErrorKind::kDegenerateEmbedding, "zero-variance embedding");
  }
  return std::clamp(1.0 - sab / std::sqrt(saa * sbb), 0.0, 2.0);
}

std::vector<double> GeometricSchedule(double first, double last, int steps) {
  Require(first > 0.0 && last >= first && steps >= 1, ErrorKind::kParameter,
          "invalid eps schedule");
  std::vector<double> out(static_cast<std::size_t>(steps));
  if (steps == 1) return {first};
  const double ratio = std::log(last / first) / (steps - 1);
  for (int i = 0; i < steps; ++i) out[i] = first * std::exp(ratio * i);
  out.back() = last;
  return out;
}

std::vector<int> Dbscan(const std::vector<std::vector<double>>& dist,
                        const std::vector<std::size_t>& active, double eps, std::size_t min_pts) {
  const std::size_t m = active.size();
  std::vector<std::vector<std::size_t>> neighbors(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (dist[active[i]][active[j]] <= eps) neighbors[i].push_back(j);

  std::vector<int> labels(m, -1);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= 0 || neighbors[i].size() < min_pts) continue;
    const int id = next++;
    labels[i] = id;
    std::vector<std::size_t> frontier{i};
    while (!frontier.empty()) {
      const std::size_t p = frontier.back();
      frontier.pop_back();
      if (neighbors[p].size() < min_pts) continue;  // border point
      for (std::size_t q : neighbors[p]) {
        if (labels[q] >= 0) continue;
        labels[q] = id;
        frontier.push_back(q);
      }
    }
  }
  return labels;
}

ClusterAssignment GroupByDbscan(const std::vector<ColorEmbedding>& embeddings,
                                std::size_t group_size, const std::vector<double>& eps_schedule,
                                unsigned jobs) {
  Require(group_size >= 2, ErrorKind::kParameter, "group size must be >= 2");
  Require(std::is_sorted(eps_schedule.begin(), eps_schedule.end()), ErrorKind::kParameter,
          "eps schedule must be ascending");
  const std::size_t n = embeddings.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  ParallelFor(n, jobs, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = PearsonDistance(embeddings[i], embeddings[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) dist[i][j] = dist[j][i];

  ClusterAssignment out;
  out.labels.assign(n, -1);
  for (double eps : eps_schedule) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i)
      if (out.labels[i] < 0) active.push_back(i);
    if (active.size() < group_size) break;
    const std::vector<int> labels = Dbscan(dist, active, eps, group_size);
    const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(clusters, 0)));
    for (std::size_t k = 0; k < active.size(); ++k)
      if (labels[k] >= 0) members[labels[k]].push_back(active[k]);
    for (auto& group : members) {
      if (group.size() != group_size) continue;
      const int id = static_cast<int>(out.complete_groups.size());
      for (std::size_t i : group) out.labels[i] = id;
      out.complete_groups.push_back(std::move(group));
    }
  }
  return out;
}

std::vector<double> MedianFuse(const std::vector<double>& p) {
  Require(p.size() == 5, ErrorKind::kParameter, "median fusion needs exactly 5 predictions");
  for (double v : p) Require(std::isfinite(v), ErrorKind::kParameter, "non-finite prediction");
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[2];
  std::vector<double> out(5);
  for (std::size_t i = 0; i < 5; ++i) out[i] = 0.01 * p[i] + 0.99 * median;
  return out;
}

std::vector<double> FuseGroups(const std::vector<double>& predictions,
                               const ClusterAssignment& assignment) {
  Require(assignment.labels.size() == predictions.size(), ErrorKind::kParameter,
          "assignment and predictions differ in length");
  std::vector<double> out = predictions;
  for (const auto& group : assignment.complete_groups) {
    if (group.size() != 5) continue;
    std::vector<double> p;
    for (std::size_t i : group) p.push_back(predictions[i]);
    const std::vector<double> fused = MedianFuse(p);
    for (std::size_t k = 0; k < group.size(); ++k) out[group[k]] = fused[k];
  }
  return out;
}

void WriteGrouping(const std::vector<std::string>& sample_ids, const ClusterAssignment& assignment,
                   const std::filesystem::path& path) {
  Require(sample_ids.size() == assignment.labels.size(), ErrorKind::kParameter,
          "ids and labels differ in length");
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "sample_id,cluster_id,status\n";
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    out << sample_ids[i] << ',' << assignment.labels[i] << ','
        << (assignment.assigned(i) ? "grouped" : "unassigned") << '\n';
  }
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

MorphResult FrequencyMorph(const FrameSequence& seq, double factor, double gt_hr_bpm,
                           const LandmarkTrack* landmarks) {
  if (!(factor >= kMinMorphFactor && factor <= kMaxMorphFactor)) {
    Fail(ErrorKind::kParameter, "morph factor must lie in [0.5, 2]");
  }
  seq.Validate();
  Require(seq.frame_count() >= 4, ErrorKind::kInsufficientData, "morph needs >= 4 frames");
  const auto out_frames = static_cast<std::size_t>(
      std::max<long>(1, std::lround(static_cast<double>(seq.frame_count()) / factor)));
  MorphResult r;
  r.clip = ResampleByStep(seq, factor, out_frames);
  if (landmarks) {
    Require(landmarks->frame_count() == seq.frame_count(), ErrorKind::kInvariant,
            "landmark track does not match the clip");
    r.landmarks = ResampleTrack(*landmarks, factor, out_frames);
  }
  r.hr_bpm = gt_hr_bpm * factor;
  r.out_of_band = r.hr_bpm < kDefaultLowBpm || r.hr_bpm > kDefaultHighBpm;
  return r;
}

FrameSequence HFlip(const FrameSequence& seq) {
  seq.Validate();
  FrameSequence out = seq;
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    const Image& src = seq.frames[t];
    Image& dst = out.frames[t];
    for (int y = 0; y < seq.height; ++y)
      for (int x = 0; x < seq.width; ++x)
        for (int c = 0; c < 3; ++c) dst.at(seq.width - 1 - x, y, c) = src.at(x, y, c);
  }
  return out;
}

LandmarkTrack HFlip(const LandmarkTrack& track, int frame_width) {
  LandmarkTrack out = track;
  for (auto& frame : out.frames)
    for (Point2& p : frame) p.x = frame_width - p.x;
  return out;
}

}  // namespace rppg
