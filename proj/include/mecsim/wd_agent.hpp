#pragma once

#include <Eigen/Dense>
#include <limits>
#include <utility>

#include "mecsim/config.hpp"
#include "mecsim/env.hpp"
#include "mecsim/qfunc.hpp"

namespace mecsim {

/// Decaying step sizes alpha0 / (1 + t/tau0); square-summable but not
/// summable, as the convergence guarantee requires.
struct StepSchedule {
  double alpha0 = 0.01;
  double tau0 = 1000.0;
  double at(long t) const { return alpha0 / (1.0 + static_cast<double>(t) / tau0); }
};

/// Index of the transmit-power coordinate in the device action-state vector
/// [p, q, h, beta_1..beta_n].
inline constexpr int kPowerCoord = 0;

/// Online Q-learner owned by one wireless device. The transmit-power action
/// and the readout parameters descend the squared TD error jointly; the
/// power iterate doubles as the next block's action proposal.
struct WdLearner {
  FeatureBank bank;
  Eigen::VectorXd params;  // linear Q readout
  double power = 0.0;      // current action proposal, watts
  StepSchedule schedule;
  double epsilon = 1e-3;   // stopping tolerance on relative parameter change
  long step = 0;
  double last_rel_change = std::numeric_limits<double>::infinity();
  long converged_block = -1;  // first block meeting the stopping rule
  bool diverged = false;
};

/// Feature scales for the device action-state: reference power, task size,
/// mean channel gain, unit arrival flags.
Eigen::VectorXd wd_feature_scales(double mean_channel_gain,
                                  const SystemConfig& config);

WdLearner make_wd_learner(const SystemConfig& config, double mean_channel_gain,
                          std::uint64_t bank_seed, double p_init,
                          StepSchedule schedule, double epsilon);

/// Action-state vector [p, q, h, beta...] for one block.
Eigen::VectorXd wd_action_state(double power, const WdState& state);

/// Immediate cost seen by the device learner: weighted backlog plus the
/// block's compute and offload energy. Equals the device's share of the
/// system stage cost bit-for-bit.
double wd_reward(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                 double power, const SystemConfig& config);

/// Gradient of the squared TD error with respect to the transmit power,
/// which enters the reward, the current features and (through the shared
/// power coordinate) the next features. Factor-2 convention as in
/// td_param_gradient.
double wd_power_gradient(double delta, const Eigen::VectorXd& params,
                         const FeatureBank& bank, const Eigen::VectorXd& phi_now,
                         const Eigen::VectorXd& phi_next,
                         const SystemConfig& config);

struct WdGradients {
  double power = 0.0;
  Eigen::VectorXd params;
};

/// p <- max(p - alpha*g_p, 0); params <- params - alpha*g_params.
/// Non-finite updates flip the divergence flag and freeze the learner.
void gd_step_wd(WdLearner& learner, const WdGradients& grads, double alpha);

/// Maps a power proposal to a feasible (power, rate-vector) pair: pick the
/// local compute amount that leaves a sub-task remainder matching the bits
/// the proposal can ship, spread it evenly over the slots, then recompute
/// the exact power for the remainder actually produced.
std::pair<double, Eigen::VectorXd> project_action(double power_proposed,
                                                  const WdState& state,
                                                  const SystemConfig& config);

struct WdBlockResult {
  double delta = 0.0;
  double grad_power = 0.0;
  double grad_params_norm = 0.0;
  double grad_sq_norm = 0.0;  // g_p^2 + |g_params|^2
  double rel_change = std::numeric_limits<double>::infinity();
  double reward = 0.0;
};

/// One full learning iteration over the transition current -> next.
/// `current` carries the executed power and rates; the next action-state
/// shares the current power coordinate. Updates the learner in place; the
/// learner's power afterwards is the proposal for the block after `next`.
WdBlockResult algorithm1_block(WdLearner& learner, const WdState& current,
                               const WdState& next, const SystemConfig& config);

nlohmann::json wd_learner_checkpoint(const WdLearner& learner);
WdLearner wd_learner_from_checkpoint(const nlohmann::json& j);

}  // namespace mecsim
