#include "mecsim/server_agent.hpp"

#include <cmath>
#include <stdexcept>

namespace mecsim {

Eigen::VectorXd server_feature_scales(const SystemConfig& config) {
  const int n = config.slots_per_block;
  Eigen::VectorXd scales(n + config.num_wds + 1);
  scales.head(n).setConstant(config.f_max_ser);
  scales.tail(config.num_wds + 1).setConstant(config.task_cycles);
  return scales;
}

ServerLearner make_server_learner(const SystemConfig& config,
                                  std::uint64_t bank_seed, StepSchedule schedule,
                                  double epsilon) {
  ServerLearner learner{
      FeatureBank(config.feature_dim, server_feature_scales(config), bank_seed),
      Eigen::VectorXd::Zero(config.feature_dim),
      Eigen::VectorXd::Constant(config.slots_per_block, config.f_max_ser / 2.0),
      schedule,
      epsilon};
  return learner;
}

Eigen::VectorXd server_action_state(const Eigen::VectorXd& cpu_rates,
                                    const ServerState& state) {
  Eigen::VectorXd v(cpu_rates.size() + state.wd_queues.size() + 1);
  v.head(cpu_rates.size()) = cpu_rates;
  v[cpu_rates.size()] = state.queue_cycles;
  v.tail(state.wd_queues.size()) = state.wd_queues;
  return v;
}

double server_reward(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                     const SystemConfig& config) {
  return server_stage_cost(queue_cycles, server_energy(cpu_rates, config),
                           config);
}

double server_rate_gradient(double rho, const Eigen::VectorXd& params,
                            const FeatureBank& bank,
                            const Eigen::VectorXd& phi_now,
                            const Eigen::VectorXd& phi_next, double rate,
                            int slot, const SystemConfig& config) {
  if (slot < 0 || slot >= config.slots_per_block)
    throw std::invalid_argument("server_rate_gradient: slot out of range");
  const double gamma = config.discount;
  double sum = 0.0;
  for (int j = 0; j < bank.feature_count(); ++j) {
    sum += params[j] * bank.input_weight(j, slot) *
           (gamma * sigmoid_slope(phi_next[j]) - sigmoid_slope(phi_now[j]));
  }
  const double energy_slope =
      3.0 * config.w2 * config.slot_seconds * config.cap_ser * rate * rate;
  return rho * (energy_slope + sum);
}

void gd_step_ser(ServerLearner& learner, const ServerGradients& grads,
                 double alpha, const SystemConfig& config) {
  if (learner.diverged) return;
  if (!grads.rates.allFinite() || !grads.params.allFinite()) {
    learner.diverged = true;
    return;
  }
  Eigen::VectorXd rates_new =
      (learner.cpu_rates - alpha * grads.rates)
          .cwiseMax(0.0)
          .cwiseMin(config.f_max_ser);
  const Eigen::VectorXd params_new = learner.params - alpha * grads.params;
  if (!rates_new.allFinite() || !params_new.allFinite()) {
    learner.diverged = true;
    return;
  }
  learner.cpu_rates = std::move(rates_new);
  learner.params = params_new;
  learner.step += 1;
}

ServerBlockResult algorithm2_block(ServerLearner& learner,
                                   const ServerState& current,
                                   const ServerState& next,
                                   const SystemConfig& config) {
  ServerBlockResult out;
  if (learner.diverged) return out;

  const Eigen::VectorXd phi_now =
      learner.bank.features(server_action_state(current.cpu_rates, current));
  const Eigen::VectorXd phi_next =
      learner.bank.features(server_action_state(current.cpu_rates, next));

  out.reward = server_reward(current.queue_cycles, current.cpu_rates, config);
  out.rho = td_error(out.reward, learner.params, phi_now, phi_next,
                     config.discount);

  ServerGradients grads;
  grads.rates.resize(config.slots_per_block);
  for (int i = 0; i < config.slots_per_block; ++i) {
    grads.rates[i] =
        server_rate_gradient(out.rho, learner.params, learner.bank, phi_now,
                             phi_next, current.cpu_rates[i], i, config);
  }
  grads.params = td_param_gradient(out.rho, phi_now, phi_next, config.discount);
  out.grad_rates_norm = grads.rates.norm();
  out.grad_params_norm = grads.params.norm();
  // Normalized-coordinate squared norm, as for the device learner.
  out.grad_sq_norm = (config.f_max_ser * grads.rates).squaredNorm() +
                     grads.params.squaredNorm();

  const double prev_norm = learner.params.norm();
  const double alpha = learner.schedule.at(learner.step);
  learner.cpu_rates = current.cpu_rates;  // descend from the executed action
  gd_step_ser(learner, grads, alpha, config);
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

nlohmann::json server_learner_checkpoint(const ServerLearner& learner) {
  std::vector<double> params(learner.params.data(),
                             learner.params.data() + learner.params.size());
  std::vector<double> rates(learner.cpu_rates.data(),
                            learner.cpu_rates.data() + learner.cpu_rates.size());
  return nlohmann::json{{"bank", learner.bank.to_json()},
                        {"params", params},
                        {"cpu_rates", rates},
                        {"step", learner.step},
                        {"alpha0", learner.schedule.alpha0},
                        {"tau0", learner.schedule.tau0},
                        {"epsilon", learner.epsilon}};
}

ServerLearner server_learner_from_checkpoint(const nlohmann::json& j) {
  const auto params_v = j.at("params").get<std::vector<double>>();
  const auto rates_v = j.at("cpu_rates").get<std::vector<double>>();
  ServerLearner learner{FeatureBank::from_json(j.at("bank")),
                        Eigen::Map<const Eigen::VectorXd>(params_v.data(),
                                                          params_v.size()),
                        Eigen::Map<const Eigen::VectorXd>(rates_v.data(),
                                                          rates_v.size()),
                        StepSchedule{j.at("alpha0").get<double>(),
                                     j.at("tau0").get<double>()},
                        j.at("epsilon").get<double>()};
  learner.step = j.at("step").get<long>();
  return learner;
}

}  // namespace mecsim
