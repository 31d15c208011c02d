#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "rppg/error.hpp"
#include "rppg/skinseg.hpp"
#include "skinseg_internal.hpp"

namespace rppg {
namespace {

constexpr double kGradientEta = 1e-8;

double Heaviside(double phi, double eps) {
  return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(phi / eps));
}

double Delta(double phi, double eps) {
  return eps / (std::numbers::pi * (eps * eps + phi * phi));
}

// Felzenszwalb-Huttenlocher squared distance transform of a sampled function.
void Edt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
           std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (f[v[0]] == kInf) {
      v[0] = q;
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (f[v[0]] == kInf) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * static_cast<double>(q - v[k]) + f[v[k]];
  }
}

// Euclidean distance from every pixel center to the nearest feature pixel.
std::vector<double> DistanceTo(const std::vector<std::uint8_t>& feature, int width, int height) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int m = std::max(width, height);
  std::vector<double> grid(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = feature[i] ? 0.0 : kInf;
  std::vector<double> f(static_cast<std::size_t>(m)), d(static_cast<std::size_t>(m)),
      z(static_cast<std::size_t>(m) + 1);
  std::vector<int> v(static_cast<std::size_t>(m));
  f.resize(static_cast<std::size_t>(height));
  d.resize(static_cast<std::size_t>(height));
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = grid[static_cast<std::size_t>(y) * width + x];
    Edt1d(f, d, v, z);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = d[y];
  }
  f.resize(static_cast<std::size_t>(width));
  d.resize(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f[x] = grid[static_cast<std::size_t>(y) * width + x];
    Edt1d(f, d, v, z);
    for (int x = 0; x < width; ++x) grid[static_cast<std::size_t>(y) * width + x] = std::sqrt(d[x]);
  }
  return grid;
}

// Cauchy-Crofton length of the boundary of {phi > 0} on the 8-neighborhood.
double ContourLength(const LevelSetField& field) {
  const int w = field.width;
  const int h = field.height;
  const double axial = std::numbers::pi / 8.0;
  const double diagonal = std::numbers::pi / (8.0 * std::numbers::sqrt2);
  double length = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in = field.at(x, y) > 0.0;
      if (x + 1 < w && in != (field.at(x + 1, y) > 0.0)) length += axial;
      if (y + 1 < h && in != (field.at(x, y + 1) > 0.0)) length += axial;
      if (x + 1 < w && y + 1 < h && in != (field.at(x + 1, y + 1) > 0.0)) length += diagonal;
      if (x > 0 && y + 1 < h && in != (field.at(x - 1, y + 1) > 0.0)) length += diagonal;
    }
  }
  return length;
}

double SharpEnergy(const LevelSetField& field, const std::vector<double>& data,
                   const LevelSetParams& p) {
  double region = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    region += field.phi[i] > 0.0 ? -p.lambda_in * data[i] : p.lambda_out * data[i];
  return region + p.nu * ContourLength(field);
}

struct EnergyGradient {
  double energy = 0.0;
  std::vector<double> gradient;  // dE/dphi
};

EnergyGradient ComputeEnergy(const LevelSetField& field, const std::vector<double>& data,
                             const LevelSetParams& p, bool with_gradient) {
  const int w = field.width;
  const int h = field.height;
  const std::size_t n = field.phi.size();
  std::vector<double> heav(n);
  for (std::size_t i = 0; i < n; ++i) heav[i] = Heaviside(field.phi[i], p.epsilon);

  EnergyGradient out;
  std::vector<double> nx(n, 0.0), ny(n, 0.0);
  out.energy = SharpEnergy(field, data, p);
  if (!with_gradient) return out;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double gx = x + 1 < w ? heav[i + 1] - heav[i] : 0.0;
      const double gy = y + 1 < h ? heav[i + static_cast<std::size_t>(w)] - heav[i] : 0.0;
      const double norm = std::sqrt(gx * gx + gy * gy + kGradientEta * kGradientEta);
      nx[i] = gx / norm;
      ny[i] = gy / norm;
    }
  }

  out.gradient.resize(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      // Backward-difference divergence of the unit normal: the discrete
      // curvature that is exactly the adjoint of the forward differences.
      const double kappa = (nx[i] - (x > 0 ? nx[i - 1] : 0.0)) +
                           (ny[i] - (y > 0 ? ny[i - static_cast<std::size_t>(w)] : 0.0));
      const double force = (p.lambda_in + p.lambda_out) * data[i] + p.nu * kappa;
      out.gradient[i] = -Delta(field.phi[i], p.epsilon) * force;
    }
  }
  return out;
}

std::uint32_t PackColor(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return (static_cast<std::uint32_t>(r) << 16) | (static_cast<std::uint32_t>(g) << 8) | b;
}

}  // namespace

LevelSetField SignedDistance(const std::vector<std::uint8_t>& inside, int width, int height) {
  Require(inside.size() == static_cast<std::size_t>(width) * height, ErrorKind::kInvariant,
          "mask size mismatch");
  LevelSetField field{width, height, std::vector<double>(inside.size())};
  const bool any_in = std::any_of(inside.begin(), inside.end(), [](auto v) { return v != 0; });
  const bool any_out = std::any_of(inside.begin(), inside.end(), [](auto v) { return v == 0; });
  const double far = static_cast<double>(std::max(width, height));
  if (!any_in || !any_out) {
    std::fill(field.phi.begin(), field.phi.end(), any_in ? far : -far);
    return field;
  }
  std::vector<std::uint8_t> outside(inside.size());
  for (std::size_t i = 0; i < inside.size(); ++i) outside[i] = inside[i] ? 0 : 1;
  const std::vector<double> to_out = DistanceTo(outside, width, height);
  const std::vector<double> to_in = DistanceTo(inside, width, height);
  for (std::size_t i = 0; i < inside.size(); ++i) {
    field.phi[i] = inside[i] ? to_out[i] - 0.5 : -(to_in[i] - 0.5);
  }
  return field;
}

LevelSetField BoxLevelSet(int width, int height, const Rect& box) {
  std::vector<std::uint8_t> inside(static_cast<std::size_t>(width) * height, 0);
  for (int y = std::max(0, box.y); y < std::min(height, box.y + box.height); ++y)
    for (int x = std::max(0, box.x); x < std::min(width, box.x + box.width); ++x)
      inside[static_cast<std::size_t>(y) * width + x] = 1;
  return SignedDistance(inside, width, height);
}

LevelSetField CircleLevelSet(int width, int height, double cx, double cy, double radius) {
  LevelSetField field{width, height, std::vector<double>(static_cast<std::size_t>(width) * height)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      field.at(x, y) = radius - std::hypot(x + 0.5 - cx, y + 0.5 - cy);
  return field;
}

std::vector<double> DataTerm(const Image& frame, const SkinModel& model, double ratio_clip) {
  const PreparedMixture skin(model.skin);
  const PreparedMixture nonskin(model.nonskin);
  std::unordered_map<std::uint32_t, double> cache;
  std::vector<double> data(static_cast<std::size_t>(frame.width) * frame.height);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const std::uint8_t r = frame.at(x, y, 0), g = frame.at(x, y, 1), b = frame.at(x, y, 2);
      auto [it, inserted] = cache.try_emplace(PackColor(r, g, b), 0.0);
      if (inserted) {
        const Eigen::Vector3d px(r, g, b);
        it->second = std::clamp(skin.LogDensity(px) - nonskin.LogDensity(px), -ratio_clip, ratio_clip);
      }
      data[static_cast<std::size_t>(y) * frame.width + x] = it->second;
    }
  }
  return data;
}

double LevelSetEnergy(const LevelSetField& field, const std::vector<double>& data,
                      const LevelSetParams& params) {
  return ComputeEnergy(field, data, params, false).energy;
}

LevelSetField EvolveLevelSet(const std::vector<double>& data, LevelSetField field,
                             const LevelSetParams& params, int iterations, LevelSetTrace* trace) {
  Require(data.size() == field.phi.size(), ErrorKind::kInvariant,
          "level set does not match frame dimensions");
  Require(params.dt > 0 && params.epsilon > 0, ErrorKind::kParameter, "dt and epsilon must be positive");
  LevelSetTrace local;
  LevelSetTrace& tr = trace ? *trace : local;
  tr = {};

  EnergyGradient current = ComputeEnergy(field, data, params, true);
  const double tolerance = 1e-6 * std::abs(current.energy);
  tr.energy.push_back(current.energy);
  LevelSetField candidate = field;
  for (int iter = 1; iter <= iterations; ++iter) {
    bool accepted = false;
    double step = params.dt;
    for (int attempt = 0; attempt <= params.max_backtracks; ++attempt, step *= 0.5) {
      for (std::size_t i = 0; i < field.phi.size(); ++i) {
        candidate.phi[i] = field.phi[i] - step * current.gradient[i];
        if (!std::isfinite(candidate.phi[i])) {
          Fail(ErrorKind::kNumericalDivergence, "level set became non-finite; reduce dt");
        }
      }
      const double e = ComputeEnergy(candidate, data, params, false).energy;
      if (e <= current.energy + tolerance) {
        std::swap(field.phi, candidate.phi);
        accepted = true;
        break;
      }
    }
    if (!accepted) ++tr.rejected_steps;

    if (params.reinit_every > 0 && iter % params.reinit_every == 0) {
      std::vector<std::uint8_t> inside(field.phi.size());
      for (std::size_t i = 0; i < inside.size(); ++i) inside[i] = field.phi[i] > 0.0;
      LevelSetField reinit = SignedDistance(inside, field.width, field.height);
      const double e = ComputeEnergy(reinit, data, params, false).energy;
      const double before = accepted ? ComputeEnergy(field, data, params, false).energy : current.energy;
      if (e <= before + tolerance) {
        field = std::move(reinit);
      } else {
        ++tr.rejected_reinits;
      }
    }
    current = ComputeEnergy(field, data, params, true);
    tr.energy.push_back(current.energy);
  }
  return field;
}

LevelSetField EvolveLevelSet(const Image& frame, const SkinModel& model, LevelSetField init,
                             const LevelSetParams& params, LevelSetTrace* trace) {
  Require(init.width == frame.width && init.height == frame.height, ErrorKind::kInvariant,
          "level set does not match frame dimensions");
  return EvolveLevelSet(DataTerm(frame, model, params.ratio_clip), std::move(init), params,
                        params.iterations_first, trace);
}

std::size_t RoiMask::Count(std::size_t frame) const {
  return static_cast<std::size_t>(std::count(frames[frame].begin(), frames[frame].end(), 1));
}

SegmentationResult SegmentClip(const FrameSequence& seq, const Rect& seed_box,
                               const LevelSetParams& params, int k, std::uint64_t seed) {
  seq.Validate();
  SegmentationResult result;
  result.fit = FitSkinModel(seq.frames.front(), seed_box, k, seed);
  result.mask.width = seq.width;
  result.mask.height = seq.height;
  LevelSetField phi = BoxLevelSet(seq.width, seq.height, seed_box);
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    LevelSetTrace trace;
    if (t > 0 && !result.mask.valid.back()) phi = BoxLevelSet(seq.width, seq.height, seed_box);
    const int iterations = t == 0 ? params.iterations_first : params.iterations_next;
    const std::vector<double> data = DataTerm(seq.frames[t], result.fit.model, params.ratio_clip);
    phi = EvolveLevelSet(data, std::move(phi), params, iterations, &trace);
    // With no skin-favoring pixel the empty region is the global minimizer.
    if (std::none_of(data.begin(), data.end(), [](double r) { return r > 0.0; }))
      std::fill(phi.phi.begin(), phi.phi.end(), -1.0);
    std::vector<std::uint8_t> mask(phi.phi.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = phi.phi[i] > 0.0;
    const bool valid = std::any_of(mask.begin(), mask.end(), [](auto v) { return v != 0; });
    result.mask.frames.push_back(std::move(mask));
    result.mask.valid.push_back(valid);
    result.traces.push_back(std::move(trace));
  }
  return result;
}

}  // namespace rppg
