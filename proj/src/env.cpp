#include "mecsim/env.hpp"

#include <cmath>
#include <stdexcept>

namespace mecsim {

namespace {
constexpr double kLn2 = 0.6931471805599453094172321214581766;
}

WdState make_wd_state(const SystemConfig& config) {
  WdState s;
  s.arrivals = Eigen::VectorXd::Zero(config.slots_per_block);
  s.cpu_rates = Eigen::VectorXd::Zero(config.slots_per_block);
  return s;
}

ServerState make_server_state(const SystemConfig& config) {
  ServerState s;
  s.wd_queues = Eigen::VectorXd::Zero(config.num_wds);
  s.cpu_rates = Eigen::VectorXd::Zero(config.slots_per_block);
  return s;
}

Eigen::VectorXd sample_arrivals(RngStream& stream, double b, int n) {
  Eigen::VectorXd beta(n);
  for (int i = 0; i < n; ++i) beta[i] = stream.bernoulli(b) ? 1.0 : 0.0;
  return beta;
}

double pathloss_db(double distance_m, const SystemConfig& config) {
  if (distance_m <= 0.0)
    throw std::invalid_argument("pathloss_db: distance must be > 0");
  return config.pathloss_a + config.pathloss_b * std::log10(distance_m);
}

double mean_channel_gain(double distance_m, double shadow_db,
                         const SystemConfig& config) {
  const double pl_db = pathloss_db(distance_m, config);
  const double gain_lin = std::pow(10.0, (-pl_db + shadow_db) / 10.0);
  return gain_lin / config.noise_power_w();
}

double sample_channel(RngStream& stream, double mean_gain) {
  return channel_from_fading(mean_gain, stream.exponential());
}

double intermediate_output_size(double queue_cycles,
                                const Eigen::VectorXd& cpu_rates,
                                const SystemConfig& config) {
  const double remaining =
      std::max(queue_cycles - served_cycles(cpu_rates, config), 0.0);
  return config.bits_per_cycle * std::fmod(remaining, config.task_cycles);
}

double required_power(double bits, double channel_gain,
                      const SystemConfig& config) {
  if (bits < 0.0) throw std::invalid_argument("required_power: bits < 0");
  if (channel_gain <= 0.0)
    throw std::invalid_argument("required_power: channel gain must be > 0");
  const double exponent = bits / config.slot_bandwidth_bits();
  if (exponent > 1000.0)
    throw std::domain_error(
        "required_power: offload of " + std::to_string(bits) +
        " bits is infeasible in one slot (check bits_per_cycle/task_cycles)");
  const double p = config.snr_gap / channel_gain * std::expm1(exponent * kLn2);
  if (!std::isfinite(p))
    throw std::domain_error("required_power: power overflow");
  return p;
}

double achievable_bits(double power, double channel_gain,
                       const SystemConfig& config) {
  if (power < 0.0) throw std::invalid_argument("achievable_bits: power < 0");
  return config.slot_bandwidth_bits() *
         std::log1p(channel_gain * power / config.snr_gap) / kLn2;
}

double wd_queue_step(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                     const Eigen::VectorXd& arrivals,
                     const SystemConfig& config) {
  const double remaining =
      std::max(queue_cycles - served_cycles(cpu_rates, config), 0.0);
  const double new_work = arrivals.sum() * config.task_cycles;
  if (config.queue_mode == QueueMode::paper_faithful)
    return remaining + new_work;
  const double residual = std::fmod(remaining, config.task_cycles);
  return std::max(remaining - residual, 0.0) + new_work;
}

double wd_queue_step_explicit(double queue_cycles,
                              const Eigen::VectorXd& cpu_rates,
                              double offload_cycles,
                              const Eigen::VectorXd& arrivals,
                              const SystemConfig& config) {
  const double remaining =
      std::max(queue_cycles - served_cycles(cpu_rates, config), 0.0);
  const double new_work = arrivals.sum() * config.task_cycles;
  return std::max(remaining - offload_cycles, 0.0) + new_work;
}

double server_queue_step(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                         const Eigen::VectorXd& residual_cycles,
                         const SystemConfig& config) {
  const double drained =
      std::max(queue_cycles - served_cycles(cpu_rates, config), 0.0);
  return drained + residual_cycles.sum();
}

double local_energy(const Eigen::VectorXd& cpu_rates,
                    const SystemConfig& config) {
  return config.slot_seconds * config.cap_wd * cpu_rates.array().cube().sum();
}

double offload_energy(double power, const SystemConfig& config) {
  return config.slot_seconds * power;
}

double server_energy(const Eigen::VectorXd& cpu_rates,
                     const SystemConfig& config) {
  return config.slot_seconds * config.cap_ser * cpu_rates.array().cube().sum();
}

double wd_stage_cost(double queue_cycles, double total_energy,
                     const SystemConfig& config) {
  return config.w3 * (queue_cycles / config.task_cycles) +
         config.w4 * total_energy;
}

double server_stage_cost(double queue_cycles, double energy,
                         const SystemConfig& config) {
  return config.w1 * (queue_cycles / config.task_cycles) + config.w2 * energy;
}

StageCosts stage_costs(const ServerState& server,
                       const std::vector<WdState>& wds,
                       const Eigen::VectorXd& wd_energies,
                       double server_energy_j, const SystemConfig& config) {
  if (static_cast<int>(wds.size()) != wd_energies.size())
    throw std::invalid_argument("stage_costs: energy vector size mismatch");
  StageCosts out;
  out.server = server_stage_cost(server.queue_cycles, server_energy_j, config);
  out.wd.resize(static_cast<Eigen::Index>(wds.size()));
  out.total = out.server;
  for (size_t k = 0; k < wds.size(); ++k) {
    out.wd[static_cast<Eigen::Index>(k)] = wd_stage_cost(
        wds[k].queue_cycles, wd_energies[static_cast<Eigen::Index>(k)], config);
    out.total += out.wd[static_cast<Eigen::Index>(k)];
  }
  return out;
}

}  // namespace mecsim
