#pragma once

#include <vector>

#include <Eigen/Core>

#include "rppg/skinseg.hpp"

namespace rppg {

// Mixture with precomputed precision matrices and log normalizers.
class PreparedMixture {
 public:
  struct Part {
    Eigen::Vector3d mean;
    Eigen::Matrix3d precision;
    double log_coeff;
  };

  explicit PreparedMixture(const GaussianMixture& mixture);

  double LogDensity(const Eigen::Vector3d& x) const;
  const std::vector<Part>& parts() const { return parts_; }

 private:
  std::vector<Part> parts_;
};

}  // namespace rppg
