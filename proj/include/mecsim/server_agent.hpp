#pragma once

#include <Eigen/Dense>
#include <limits>

#include "mecsim/config.hpp"
#include "mecsim/env.hpp"
#include "mecsim/qfunc.hpp"
#include "mecsim/wd_agent.hpp"  // StepSchedule

namespace mecsim {

/// Online Q-learner owned by the edge server. Observes only the queue
/// vector (its own backlog plus the device backlogs) and its rate vector;
/// channel gains and arrival statistics never enter this type.
struct ServerLearner {
  FeatureBank bank;
  Eigen::VectorXd params;    // linear Q readout
  Eigen::VectorXd cpu_rates; // current action, n entries
  StepSchedule schedule;
  double epsilon = 1e-3;
  long step = 0;
  double last_rel_change = std::numeric_limits<double>::infinity();
  long converged_block = -1;
  bool diverged = false;
};

/// Feature scales for the server action-state [f_1..f_n, q_ser, q_wd_1..K].
Eigen::VectorXd server_feature_scales(const SystemConfig& config);

ServerLearner make_server_learner(const SystemConfig& config,
                                  std::uint64_t bank_seed, StepSchedule schedule,
                                  double epsilon);

Eigen::VectorXd server_action_state(const Eigen::VectorXd& cpu_rates,
                                    const ServerState& state);

/// Immediate cost seen by the server learner: weighted backlog plus the
/// block's execution energy. Equals the server's share of the system stage
/// cost bit-for-bit.
double server_reward(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                     const SystemConfig& config);

/// Gradient of the squared TD error with respect to cpu_rates[slot]; the
/// rate enters the reward and both feature vectors through the shared rate
/// coordinates. Factor-2 convention as in td_param_gradient.
double server_rate_gradient(double rho, const Eigen::VectorXd& params,
                            const FeatureBank& bank,
                            const Eigen::VectorXd& phi_now,
                            const Eigen::VectorXd& phi_next, double rate,
                            int slot, const SystemConfig& config);

struct ServerGradients {
  Eigen::VectorXd rates;
  Eigen::VectorXd params;
};

/// rates <- clamp(rates - alpha*g, 0, f_max_ser); params <- params - alpha*g.
void gd_step_ser(ServerLearner& learner, const ServerGradients& grads,
                 double alpha, const SystemConfig& config);

struct ServerBlockResult {
  double rho = 0.0;
  double grad_rates_norm = 0.0;
  double grad_params_norm = 0.0;
  double grad_sq_norm = 0.0;
  double rel_change = std::numeric_limits<double>::infinity();
  double reward = 0.0;
};

/// One full learning iteration over the queue transition current -> next.
/// `current.cpu_rates` is the executed action; the next action-state shares
/// it. The learner's rates afterwards are the next block's action.
ServerBlockResult algorithm2_block(ServerLearner& learner,
                                   const ServerState& current,
                                   const ServerState& next,
                                   const SystemConfig& config);

nlohmann::json server_learner_checkpoint(const ServerLearner& learner);
ServerLearner server_learner_from_checkpoint(const nlohmann::json& j);

}  // namespace mecsim
