#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rppg/error.hpp"
#include "rppg/skinseg.hpp"
#include "skinseg_internal.hpp"

namespace rppg {
namespace {

constexpr double kMinWeight = 1e-300;

struct WeightedSample {
  Eigen::Vector3d x;
  double w;
};

// Identical colors are merged; EM on weighted unique samples is the same
// estimator as EM on the raw pixels.
std::vector<WeightedSample> Deduplicate(const std::vector<Eigen::Vector3d>& samples) {
  std::vector<WeightedSample> out;
  std::unordered_map<std::uint64_t, std::size_t> index;
  bool all_bytes = true;
  for (const auto& s : samples) {
    for (int c = 0; c < 3; ++c) {
      if (s[c] != std::floor(s[c]) || s[c] < 0 || s[c] > 255) all_bytes = false;
    }
  }
  if (!all_bytes) {
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s, 1.0});
    return out;
  }
  for (const auto& s : samples) {
    const std::uint64_t key = (static_cast<std::uint64_t>(s[0]) << 16) |
                              (static_cast<std::uint64_t>(s[1]) << 8) |
                              static_cast<std::uint64_t>(s[2]);
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) {
      out.push_back({s, 1.0});
    } else {
      out[it->second].w += 1.0;
    }
  }
  return out;
}

std::size_t DistinctCount(const std::vector<WeightedSample>& samples) {
  std::vector<std::array<double, 3>> keys;
  keys.reserve(samples.size());
  for (const auto& s : samples) keys.push_back({s.x[0], s.x[1], s.x[2]});
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

std::vector<Eigen::Vector3d> KMeansPlusPlus(const std::vector<WeightedSample>& samples, int k,
                                            std::mt19937_64& rng) {
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> weights(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) weights[i] = samples[i].w;
  std::discrete_distribution<std::size_t> first(weights.begin(), weights.end());
  centers.push_back(samples[first(rng)].x);
  std::vector<double> d2(samples.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      d2[i] = std::min(d2[i], (samples[i].x - centers.back()).squaredNorm());
      weights[i] = samples[i].w * d2[i];
    }
    std::discrete_distribution<std::size_t> next(weights.begin(), weights.end());
    centers.push_back(samples[next(rng)].x);
  }
  return centers;
}

}  // namespace

PreparedMixture::PreparedMixture(const GaussianMixture& mixture) {
  const double log_norm = -1.5 * std::log(2.0 * std::numbers::pi);
  for (const auto& c : mixture.components) {
    Eigen::LLT<Eigen::Matrix3d> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      Fail(ErrorKind::kInvariant, "mixture covariance is not positive definite");
    }
    const Eigen::Matrix3d l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    parts_.push_back({c.mean, llt.solve(Eigen::Matrix3d::Identity()),
                      std::log(std::max(c.weight, kMinWeight)) + log_norm - 0.5 * log_det});
  }
}

double PreparedMixture::LogDensity(const Eigen::Vector3d& x) const {
  double best = -std::numeric_limits<double>::infinity();
  std::array<double, 16> small;
  std::vector<double> large;
  double* terms = small.data();
  if (parts_.size() > small.size()) {
    large.resize(parts_.size());
    terms = large.data();
  }
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    const Eigen::Vector3d d = x - parts_[k].mean;
    terms[k] = parts_[k].log_coeff - 0.5 * d.dot(parts_[k].precision * d);
    best = std::max(best, terms[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < parts_.size(); ++k) sum += std::exp(terms[k] - best);
  return best + std::log(sum);
}

double GaussianMixture::LogDensity(const Eigen::Vector3d& x) const {
  return PreparedMixture(*this).LogDensity(x);
}

GaussianMixture FitGmm(const std::vector<Eigen::Vector3d>& raw_samples, int k,
                       std::uint64_t seed, const EmOptions& options, EmTrace* trace) {
  Require(k >= 1, ErrorKind::kParameter, "component count must be >= 1");
  Require(!raw_samples.empty(), ErrorKind::kGeometry, "no samples to fit");
  const std::vector<WeightedSample> samples = Deduplicate(raw_samples);
  if (DistinctCount(samples) < static_cast<std::size_t>(k)) {
    Fail(ErrorKind::kDegenerateData, "k = " + std::to_string(k) + " exceeds distinct sample count");
  }
  double total_weight = 0.0;
  for (const auto& s : samples) total_weight += s.w;

  std::mt19937_64 rng(seed);
  const std::vector<Eigen::Vector3d> centers = KMeansPlusPlus(samples, k, rng);
  const Eigen::Matrix3d floor = options.covariance_floor * Eigen::Matrix3d::Identity();

  // Responsibilities from a hard nearest-center assignment start the EM.
  const std::size_t n = samples.size();
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if ((samples[i].x - centers[c]).squaredNorm() < (samples[i].x - centers[best]).squaredNorm()) best = c;
    }
    resp(static_cast<Eigen::Index>(i), best) = 1.0;
  }

  GaussianMixture mixture;
  mixture.components.resize(static_cast<std::size_t>(k));
  auto m_step = [&]() {
    for (int c = 0; c < k; ++c) {
      double nk = 0.0;
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp(static_cast<Eigen::Index>(i), c) * samples[i].w;
        nk += r;
        mean += r * samples[i].x;
      }
      GaussianComponent& comp = mixture.components[static_cast<std::size_t>(c)];
      if (nk <= 0.0) {
        comp.weight = 0.0;
        comp.covariance = floor + Eigen::Matrix3d::Identity();
        continue;
      }
      mean /= nk;
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp(static_cast<Eigen::Index>(i), c) * samples[i].w;
        const Eigen::Vector3d d = samples[i].x - mean;
        cov += r * d * d.transpose();
      }
      cov /= nk;
      comp.weight = nk / total_weight;
      comp.mean = mean;
      comp.covariance = 0.5 * (cov + cov.transpose()) + floor;
    }
  };

  EmTrace local;
  EmTrace& tr = trace ? *trace : local;
  tr = {};
  m_step();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const PreparedMixture prepared(mixture);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& parts = prepared.parts();
      double best = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const Eigen::Vector3d d = samples[i].x - parts[static_cast<std::size_t>(c)].mean;
        const double t = parts[static_cast<std::size_t>(c)].log_coeff -
                         0.5 * d.dot(parts[static_cast<std::size_t>(c)].precision * d);
        resp(static_cast<Eigen::Index>(i), c) = t;
        best = std::max(best, t);
      }
      double sum = 0.0;
      for (int c = 0; c < k; ++c) {
        double& v = resp(static_cast<Eigen::Index>(i), c);
        v = std::exp(v - best);
        sum += v;
      }
      for (int c = 0; c < k; ++c) resp(static_cast<Eigen::Index>(i), c) /= sum;
      ll += samples[i].w * (best + std::log(sum));
    }
    ll /= total_weight;
    tr.log_likelihood.push_back(ll);
    tr.iterations = iter + 1;
    const std::size_t m = tr.log_likelihood.size();
    if (m >= 2 && tr.log_likelihood[m - 1] - tr.log_likelihood[m - 2] < options.tolerance) {
      tr.converged = true;
      break;
    }
    m_step();
  }
  return mixture;
}

void SkinModel::Validate() const {
  for (const GaussianMixture* mix : {&skin, &nonskin}) {
    Require(!mix->components.empty(), ErrorKind::kInvariant, "mixture has no components");
    double sum = 0.0;
    for (const auto& c : mix->components) {
      sum += c.weight;
      Require((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-9 *
                  std::max(1.0, c.covariance.cwiseAbs().maxCoeff()),
              ErrorKind::kInvariant, "covariance not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c.covariance);
      Require(eig.eigenvalues().minCoeff() >= 1e-6 * (1 - 1e-9), ErrorKind::kInvariant,
              "covariance below regularization floor");
    }
    Require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kInvariant, "mixture weights do not sum to 1");
  }
}

SkinModelFit FitSkinModel(const Image& frame, const Rect& box, int k, std::uint64_t seed,
                          const EmOptions& options) {
  Require(k >= 1, ErrorKind::kParameter, "component count must be >= 1");
  if (box.x <= 0 || box.y <= 0 || box.x + box.width >= frame.width ||
      box.y + box.height >= frame.height || box.width <= 0 || box.height <= 0) {
    Fail(ErrorKind::kGeometry, "seed box must lie strictly inside the frame");
  }
  if (box.area() < 100) Fail(ErrorKind::kGeometry, "seed box area must be >= 100 px");
  std::vector<Eigen::Vector3d> inside, outside;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const Eigen::Vector3d p(frame.at(x, y, 0), frame.at(x, y, 1), frame.at(x, y, 2));
      const bool in = x >= box.x && x < box.x + box.width && y >= box.y && y < box.y + box.height;
      (in ? inside : outside).push_back(p);
    }
  }
  SkinModelFit fit;
  fit.model.skin = FitGmm(inside, k, seed, options, &fit.skin_trace);
  fit.model.nonskin = FitGmm(outside, k, seed + 1, options, &fit.nonskin_trace);
  return fit;
}

double PosteriorRatio(const SkinModel& model, const Eigen::Vector3d& pixel) {
  return model.skin.LogDensity(pixel) - model.nonskin.LogDensity(pixel);
}

double PosteriorRatio(const SkinModel& model, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return PosteriorRatio(model, Eigen::Vector3d(r, g, b));
}

SkinModel Swapped(const SkinModel& model) { return {model.nonskin, model.skin}; }

}  // namespace rppg
