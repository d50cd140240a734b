#include "mecsim/wd_agent.hpp"

#include <cmath>
#include <stdexcept>

namespace mecsim {

Eigen::VectorXd wd_feature_scales(double mean_channel_gain,
                                  const SystemConfig& config) {
  Eigen::VectorXd scales =
      Eigen::VectorXd::Ones(config.slots_per_block + 3);
  // Power that reaches unit SNR at the mean gain; executed powers are O(1)
  // of it, which keeps the action visible inside the sigmoid arguments.
  scales[kPowerCoord] = config.snr_gap / mean_channel_gain;
  scales[1] = config.task_cycles;
  scales[2] = mean_channel_gain;
  return scales;
}

WdLearner make_wd_learner(const SystemConfig& config, double mean_channel_gain,
                          std::uint64_t bank_seed, double p_init,
                          StepSchedule schedule, double epsilon) {
  WdLearner learner{
      FeatureBank(config.feature_dim, wd_feature_scales(mean_channel_gain, config),
                  bank_seed),
      Eigen::VectorXd::Zero(config.feature_dim),
      p_init,
      schedule,
      epsilon};
  return learner;
}

Eigen::VectorXd wd_action_state(double power, const WdState& state) {
  Eigen::VectorXd v(state.arrivals.size() + 3);
  v[kPowerCoord] = power;
  v[1] = state.queue_cycles;
  v[2] = state.channel_gain;
  v.tail(state.arrivals.size()) = state.arrivals;
  return v;
}

double wd_reward(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                 double power, const SystemConfig& config) {
  return wd_stage_cost(
      queue_cycles, local_energy(cpu_rates, config) + offload_energy(power, config),
      config);
}

double wd_power_gradient(double delta, const Eigen::VectorXd& params,
                         const FeatureBank& bank, const Eigen::VectorXd& phi_now,
                         const Eigen::VectorXd& phi_next,
                         const SystemConfig& config) {
  const double gamma = config.discount;
  double sum = 0.0;
  for (int i = 0; i < bank.feature_count(); ++i) {
    sum += params[i] * bank.input_weight(i, kPowerCoord) *
           (gamma * sigmoid_slope(phi_next[i]) - sigmoid_slope(phi_now[i]));
  }
  return delta * (config.w4 * config.slot_seconds + sum);
}

void gd_step_wd(WdLearner& learner, const WdGradients& grads, double alpha) {
  if (learner.diverged) return;
  if (!std::isfinite(grads.power) || !grads.params.allFinite()) {
    learner.diverged = true;
    return;
  }
  const double p_new = std::max(learner.power - alpha * grads.power, 0.0);
  const Eigen::VectorXd params_new = learner.params - alpha * grads.params;
  if (!std::isfinite(p_new) || !params_new.allFinite()) {
    learner.diverged = true;
    return;
  }
  learner.power = p_new;
  learner.params = params_new;
  learner.step += 1;
}

std::pair<double, Eigen::VectorXd> project_action(double power_proposed,
                                                  const WdState& state,
                                                  const SystemConfig& config) {
  const int n = config.slots_per_block;
  const double w = config.task_cycles;
  const double q = state.queue_cycles;
  const double cap = config.block_cycle_cap_wd();

  Eigen::VectorXd rates = Eigen::VectorXd::Zero(n);
  if (q <= 0.0) return {0.0, rates};

  // Sub-task remainder the proposal could ship in one slot, in cycles.
  const double ship_bits =
      achievable_bits(std::max(power_proposed, 0.0), state.channel_gain, config);
  const double target_residual =
      std::min(ship_bits / config.bits_per_cycle, w - 1.0);

  // Smallest m >= 0 with compute = q - (target + m*w) inside [0, cap].
  double compute = -1.0;
  const double m = std::max(0.0, std::ceil((q - target_residual - cap) / w));
  const double candidate = q - target_residual - m * w;
  if (candidate >= 0.0 && candidate <= cap) {
    compute = candidate;
  } else {
    const double frac = std::fmod(q, w);
    double fallback = q - frac + (frac >= target_residual ? frac - target_residual : 0.0);
    compute = std::min(fallback, cap);
    compute = std::max(compute, 0.0);
  }

  rates.setConstant(compute / (n * config.slot_seconds));
  const double actual_bits = intermediate_output_size(q, rates, config);
  return {required_power(actual_bits, state.channel_gain, config), rates};
}

WdBlockResult algorithm1_block(WdLearner& learner, const WdState& current,
                               const WdState& next, const SystemConfig& config) {
  WdBlockResult out;
  if (learner.diverged) return out;

  const Eigen::VectorXd phi_now =
      learner.bank.features(wd_action_state(current.power, current));
  const Eigen::VectorXd phi_next =
      learner.bank.features(wd_action_state(current.power, next));

  out.reward = wd_reward(current.queue_cycles, current.cpu_rates, current.power,
                         config);
  out.delta = td_error(out.reward, learner.params, phi_now, phi_next,
                       config.discount);

  WdGradients grads;
  grads.power = wd_power_gradient(out.delta, learner.params, learner.bank,
                                  phi_now, phi_next, config);
  grads.params = td_param_gradient(out.delta, phi_now, phi_next, config.discount);
  out.grad_power = grads.power;
  out.grad_params_norm = grads.params.norm();
  // Squared gradient norm in the learner's normalized coordinates: the raw
  // watt-derivative scales inversely with the power unit, so the action
  // component is measured per unit of normalized power.
  const double p_unit = learner.bank.scales()[kPowerCoord];
  out.grad_sq_norm =
      (p_unit * grads.power) * (p_unit * grads.power) + grads.params.squaredNorm();

  const double prev_norm = learner.params.norm();
  const double alpha = learner.schedule.at(learner.step);
  // Projected-gradient step: the gradient is evaluated at the executed
  // action-state, the step is applied to the learner's own power iterate.
  // The raw power step is trust-region-limited to half the current iterate
  // plus a sliver of the device's mean-SNR power unit; the feasible action
  // structure lives at the O(snr_gap/mean_gain) watt scale and unlimited
  // O(1)-watt steps jump straight into the zero-shipment corner.
  WdGradients limited = grads;
  if (alpha > 0.0 && std::isfinite(grads.power)) {
    const double power_unit = learner.bank.scales()[kPowerCoord];
    const double raw_step = alpha * grads.power;
    // Downward moves shrink the power at most geometrically, so a strictly
    // positive iterate stays strictly positive; upward moves keep a small
    // absolute floor as the escape hatch from near-zero power.
    const double max_step = raw_step > 0.0
                                ? 0.5 * learner.power
                                : 0.5 * learner.power + 0.02 * power_unit;
    if (std::abs(raw_step) > max_step)
      limited.power = std::copysign(max_step, raw_step) / alpha;
  }
  gd_step_wd(learner, limited, alpha);
  if (learner.diverged) return out;

  const double change = alpha * grads.params.norm();
  out.rel_change = prev_norm > 0.0 ? change / prev_norm
                                   : std::numeric_limits<double>::infinity();
  learner.last_rel_change = out.rel_change;
  if (learner.converged_block < 0 && prev_norm > 0.0 &&
      out.rel_change <= learner.epsilon) {
    learner.converged_block = learner.step - 1;
  }
  return out;
}

nlohmann::json wd_learner_checkpoint(const WdLearner& learner) {
  std::vector<double> params(learner.params.data(),
                             learner.params.data() + learner.params.size());
  return nlohmann::json{{"bank", learner.bank.to_json()},
                        {"params", params},
                        {"power", learner.power},
                        {"step", learner.step},
                        {"alpha0", learner.schedule.alpha0},
                        {"tau0", learner.schedule.tau0},
                        {"epsilon", learner.epsilon}};
}

WdLearner wd_learner_from_checkpoint(const nlohmann::json& j) {
  const auto params_v = j.at("params").get<std::vector<double>>();
  WdLearner learner{FeatureBank::from_json(j.at("bank")),
                    Eigen::Map<const Eigen::VectorXd>(params_v.data(),
                                                      params_v.size()),
                    j.at("power").get<double>(),
                    StepSchedule{j.at("alpha0").get<double>(),
                                 j.at("tau0").get<double>()},
                    j.at("epsilon").get<double>()};
  learner.step = j.at("step").get<long>();
  return learner;
}

}  // namespace mecsim
