#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rppg/videoio.hpp"

namespace rppg {

enum class EmbeddingMode { kBackground, kChest };
std::string ToString(EmbeddingMode mode);

struct ColorEmbedding {
  std::vector<double> values;
  EmbeddingMode mode = EmbeddingMode::kBackground;
  // Set when the source frame was too small (or, for chest mode, not 1080
  // wide) and the sampling rectangles were shrunk to fit.
  bool clipped = false;

  static std::size_t ExpectedLength(EmbeddingMode mode);
  void Validate() const;
};

inline constexpr int kBackgroundRectH = 100;
inline constexpr int kBackgroundRectW = 150;
inline constexpr int kBackgroundGridH = 10;
inline constexpr int kBackgroundGridW = 15;
inline constexpr int kChestRows = 420;
inline constexpr int kChestGridH = 8;
inline constexpr int kChestGridW = 20;

// Average-pools `rect` onto a grid_h x grid_w grid and appends the RGB means
// row-major. Cell edges are floor(i * extent / grid).
void AppendBlockMeans(const Image& frame, const Rect& rect, int grid_h, int grid_w,
                      std::vector<double>& out);

// Top-left and top-right 100x150 rectangles pooled to 10x15 each. On frames
// narrower than 300 or shorter than 100 pixels the rectangles are clipped to
// the frame half / frame height and the result is flagged.
ColorEmbedding BackgroundEmbedding(const Image& first_frame);

// Bottom 420 rows, full width, pooled to 8x20.
ColorEmbedding ChestEmbedding(const Image& first_frame);

ColorEmbedding Embed(const Image& first_frame, EmbeddingMode mode);

// 1 - Pearson correlation, in [0, 2].
double PearsonDistance(const ColorEmbedding& a, const ColorEmbedding& b);

// `steps` geometrically spaced values from first to last inclusive.
std::vector<double> GeometricSchedule(double first = 0.01, double last = 0.4, int steps = 40);

// DBSCAN over a precomputed symmetric distance matrix restricted to `active`
// indices. Neighborhoods count the point itself and use d <= eps. Returns one
// label per entry of `active`, -1 for noise. Clusters are numbered in the
// order their first core point appears.
std::vector<int> Dbscan(const std::vector<std::vector<double>>& dist,
                        const std::vector<std::size_t>& active, double eps,
                        std::size_t min_pts);

struct ClusterAssignment {
  std::vector<int> labels;  // complete-group id per clip, -1 when unassigned
  std::vector<std::vector<std::size_t>> complete_groups;

  bool assigned(std::size_t i) const { return labels[i] >= 0; }
};

// Iterative DBSCAN: at each eps, clusters of exactly group_size members among
// the clips still unassigned are frozen as complete groups.
ClusterAssignment GroupByDbscan(const std::vector<ColorEmbedding>& embeddings,
                                std::size_t group_size = 5,
                                const std::vector<double>& eps_schedule = GeometricSchedule(),
                                unsigned jobs = 1);

// f_i = 0.01 p_i + 0.99 median(p) over exactly five predictions.
std::vector<double> MedianFuse(const std::vector<double>& predictions);

// Applies MedianFuse inside every complete group; other clips pass through.
std::vector<double> FuseGroups(const std::vector<double>& predictions,
                               const ClusterAssignment& assignment);

void WriteGrouping(const std::vector<std::string>& sample_ids,
                   const ClusterAssignment& assignment, const std::filesystem::path& path);

struct MorphResult {
  FrameSequence clip;
  std::optional<LandmarkTrack> landmarks;
  double hr_bpm = 0.0;
  // Morphed rate falls outside [45, 180] bpm.
  bool out_of_band = false;
};

inline constexpr double kMinMorphFactor = 0.5;
inline constexpr double kMaxMorphFactor = 2.0;

// Speeds the clip up (factor > 1) or slows it down by temporal resampling at
// constant fps; the heart rate scales by the same factor.
MorphResult FrequencyMorph(const FrameSequence& seq, double factor, double gt_hr_bpm,
                           const LandmarkTrack* landmarks = nullptr);

FrameSequence HFlip(const FrameSequence& seq);
LandmarkTrack HFlip(const LandmarkTrack& track, int frame_width);

}  // namespace rppg
