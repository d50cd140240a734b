#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "json.hpp"

namespace mecsim {

/// Numerically stable logistic function, exact to one ulp for |x| <= 700.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// d sigmoid / d argument expressed through the output value.
inline double sigmoid_slope(double s) { return s * (1.0 - s); }

/// Fixed bank of sigmoid features over a normalized action-state vector.
///
/// Row i holds the weight vector of feature i; weights are drawn once from
/// the bank seed as N(0,1)/sqrt(dim) and never change. Inputs are divided
/// elementwise by `scales` before the affine map, which keeps sigmoid
/// arguments O(1) for raw states spanning many decades.
class FeatureBank {
 public:
  FeatureBank(int feature_count, Eigen::VectorXd scales, std::uint64_t seed);

  int feature_count() const { return static_cast<int>(weights_.rows()); }
  int input_dim() const { return static_cast<int>(weights_.cols()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& scales() const { return scales_; }
  std::uint64_t seed() const { return seed_; }

  /// phi[i] = sigmoid(w_i . (x ./ scales)). Throws on dimension mismatch.
  Eigen::VectorXd features(const Eigen::VectorXd& action_state) const;

  /// Sensitivity of feature i's argument to raw input coordinate `coord`.
  double input_weight(int feature, int coord) const {
    return weights_(feature, coord) / scales_(coord);
  }

  nlohmann::json to_json() const;
  static FeatureBank from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd scales_;
  std::uint64_t seed_ = 0;
};

/// Linear value readout.
double q_value(const Eigen::VectorXd& params, const Eigen::VectorXd& phi);

/// One-step temporal-difference error r + gamma*q(next) - q(now).
double td_error(double reward, const Eigen::VectorXd& params,
                const Eigen::VectorXd& phi_now, const Eigen::VectorXd& phi_next,
                double gamma);

/// Gradient of the squared TD error with respect to the linear parameters,
/// in the convention where the chain-rule factor 2 is absorbed by the step
/// size: delta * (gamma*phi_next - phi_now).
Eigen::VectorXd td_param_gradient(double delta, const Eigen::VectorXd& phi_now,
                                  const Eigen::VectorXd& phi_next, double gamma);

}  // namespace mecsim
