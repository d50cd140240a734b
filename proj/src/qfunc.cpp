#include "mecsim/qfunc.hpp"

#include <cmath>
#include <stdexcept>

#include "mecsim/rng.hpp"

namespace mecsim {

FeatureBank::FeatureBank(int feature_count, Eigen::VectorXd scales,
                         std::uint64_t seed)
    : scales_(std::move(scales)), seed_(seed) {
  if (feature_count < 1)
    throw std::invalid_argument("FeatureBank: need at least one feature");
  if (scales_.size() < 1 || (scales_.array() <= 0.0).any())
    throw std::invalid_argument("FeatureBank: scales must be positive");
  const int dim = static_cast<int>(scales_.size());
  RngStream rng(seed);
  weights_.resize(feature_count, dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < feature_count; ++i)
    for (int j = 0; j < dim; ++j) weights_(i, j) = sd * rng.normal();
}

Eigen::VectorXd FeatureBank::features(const Eigen::VectorXd& action_state) const {
  if (action_state.size() != scales_.size())
    throw std::invalid_argument("FeatureBank: action-state dimension mismatch");
  const Eigen::VectorXd normalized = action_state.cwiseQuotient(scales_);
  Eigen::VectorXd phi = weights_ * normalized;
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] = sigmoid(phi[i]);
  return phi;
}

nlohmann::json FeatureBank::to_json() const {
  std::vector<double> scales(scales_.data(), scales_.data() + scales_.size());
  return nlohmann::json{{"feature_count", feature_count()},
                        {"scales", scales},
                        {"seed", seed_}};
}

FeatureBank FeatureBank::from_json(const nlohmann::json& j) {
  const auto scales_v = j.at("scales").get<std::vector<double>>();
  Eigen::VectorXd scales =
      Eigen::Map<const Eigen::VectorXd>(scales_v.data(), scales_v.size());
  return FeatureBank(j.at("feature_count").get<int>(), std::move(scales),
                     j.at("seed").get<std::uint64_t>());
}

double q_value(const Eigen::VectorXd& params, const Eigen::VectorXd& phi) {
  if (params.size() != phi.size())
    throw std::invalid_argument("q_value: parameter/feature length mismatch");
  return params.dot(phi);
}

double td_error(double reward, const Eigen::VectorXd& params,
                const Eigen::VectorXd& phi_now, const Eigen::VectorXd& phi_next,
                double gamma) {
  return reward + gamma * q_value(params, phi_next) - q_value(params, phi_now);
}

Eigen::VectorXd td_param_gradient(double delta, const Eigen::VectorXd& phi_now,
                                  const Eigen::VectorXd& phi_next,
                                  double gamma) {
  return delta * (gamma * phi_next - phi_now);
}

}  // namespace mecsim
