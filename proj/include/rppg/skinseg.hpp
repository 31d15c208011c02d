#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rppg/videoio.hpp"

namespace rppg {

struct GaussianComponent {
  double weight = 1.0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
};

struct GaussianMixture {
  std::vector<GaussianComponent> components;

  double LogDensity(const Eigen::Vector3d& x) const;
};

struct EmTrace {
  std::vector<double> log_likelihood;  // mean per-sample log-likelihood per iteration
  int iterations = 0;
  bool converged = false;
};

struct EmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;
  double covariance_floor = 1e-6;
};

// Fits a K-component full-covariance GMM by EM with k-means++ seeding.
// Throws kDegenerateData when k exceeds the number of distinct samples.
GaussianMixture FitGmm(const std::vector<Eigen::Vector3d>& samples, int k,
                       std::uint64_t seed, const EmOptions& options = {},
                       EmTrace* trace = nullptr);

struct SkinModel {
  GaussianMixture skin;
  GaussianMixture nonskin;

  void Validate() const;
};

struct SkinModelFit {
  SkinModel model;
  EmTrace skin_trace;
  EmTrace nonskin_trace;
};

// Skin mixture from pixels inside seed_box, non-skin mixture from the rest.
SkinModelFit FitSkinModel(const Image& frame, const Rect& seed_box, int k = 3,
                          std::uint64_t seed = 0, const EmOptions& options = {});

// log p(pixel | skin) - log p(pixel | non-skin).
double PosteriorRatio(const SkinModel& model, const Eigen::Vector3d& pixel);
double PosteriorRatio(const SkinModel& model, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b);

SkinModel Swapped(const SkinModel& model);

struct LevelSetParams {
  // Curvature weight in units of the (clipped) log-ratio data term.
  double nu = 0.2;
  double lambda_in = 1.0;
  double lambda_out = 1.0;
  double dt = 0.45;
  double epsilon = 1.5;
  int iterations_first = 50;
  int iterations_next = 10;
  int reinit_every = 10;
  // Data term is clamp(log-ratio, -ratio_clip, ratio_clip).
  double ratio_clip = 10.0;
  // Largest number of step halvings tried before a gradient step is rejected.
  int max_backtracks = 8;
};

struct LevelSetField {
  int width = 0;
  int height = 0;
  std::vector<double> phi;  // row-major, positive inside

  double at(int x, int y) const { return phi[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return phi[static_cast<std::size_t>(y) * width + x]; }
};

struct LevelSetTrace {
  std::vector<double> energy;  // energy[0] before the first iteration
  int rejected_steps = 0;
  int rejected_reinits = 0;
};

// Signed distance (pixel units) to the boundary of the positive set; sign of
// every pixel is preserved.
LevelSetField SignedDistance(const std::vector<std::uint8_t>& inside, int width, int height);

LevelSetField BoxLevelSet(int width, int height, const Rect& box);
LevelSetField CircleLevelSet(int width, int height, double cx, double cy, double radius);

// Per-pixel data term r(x) for a frame.
std::vector<double> DataTerm(const Image& frame, const SkinModel& model, double ratio_clip);

// Region energy over the sign of phi plus nu times the Cauchy-Crofton length
// of the boundary of {phi > 0}. Descent steps use the smoothed gradient.
double LevelSetEnergy(const LevelSetField& field, const std::vector<double>& data,
                      const LevelSetParams& params);

// Gradient descent on the region energy for `iterations` steps.
LevelSetField EvolveLevelSet(const std::vector<double>& data, LevelSetField init,
                             const LevelSetParams& params, int iterations,
                             LevelSetTrace* trace = nullptr);
LevelSetField EvolveLevelSet(const Image& frame, const SkinModel& model, LevelSetField init,
                             const LevelSetParams& params, LevelSetTrace* trace = nullptr);

struct RoiMask {
  int width = 0;
  int height = 0;
  std::vector<std::vector<std::uint8_t>> frames;  // 1 = skin pixel in ROI
  std::vector<bool> valid;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t Count(std::size_t frame) const;
};

struct SegmentationResult {
  RoiMask mask;
  SkinModelFit fit;
  std::vector<LevelSetTrace> traces;  // one per frame
};

SegmentationResult SegmentClip(const FrameSequence& seq, const Rect& seed_box,
                               const LevelSetParams& params = {}, int k = 3,
                               std::uint64_t seed = 0);

// Face hull minus eyes and outer mouth, rasterized at pixel centers.
RoiMask LandmarkMask(const LandmarkTrack& track, int width, int height);

// Pixel-center rasterization of a simple polygon (even-odd rule).
std::vector<std::uint8_t> RasterizePolygon(const std::vector<Point2>& polygon, int width,
                                           int height);
std::vector<Point2> ConvexHull(std::vector<Point2> points);
double PolygonArea(const std::vector<Point2>& polygon);

// One binary PBM per frame plus index.txt listing frame files and validity.
void WriteMaskPbm(const RoiMask& mask, const std::filesystem::path& dir);

}  // namespace rppg
