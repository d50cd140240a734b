#pragma once

#include <Eigen/Dense>

#include "mecsim/config.hpp"
#include "mecsim/rng.hpp"

namespace mecsim {

/// Local state of one wireless device over a block: workload backlog,
/// channel gain for the offload slot, per-slot arrival indicators, the
/// executed transmit power and per-slot CPU rates.
struct WdState {
  double queue_cycles = 0.0;
  double channel_gain = 1.0;
  Eigen::VectorXd arrivals;   // n entries in {0, 1}
  double power = 0.0;
  Eigen::VectorXd cpu_rates;  // n entries in [0, f_max_wd]
};

/// Edge-server state: its own backlog, the device backlogs it observes at
/// the start of its block, and its per-slot CPU rates.
struct ServerState {
  double queue_cycles = 0.0;
  Eigen::VectorXd wd_queues;  // K entries
  Eigen::VectorXd cpu_rates;  // n entries in [0, f_max_ser]
};

WdState make_wd_state(const SystemConfig& config);
ServerState make_server_state(const SystemConfig& config);

/// Cycles served by a rate vector over the compute slots of one block.
/// Shared by all queue/output formulas so accounting stays bit-consistent.
inline double served_cycles(const Eigen::VectorXd& rates,
                            const SystemConfig& config) {
  return rates.sum() * config.slot_seconds;
}

/// i.i.d. Bernoulli(b) task-arrival indicators for the n slots of a block.
Eigen::VectorXd sample_arrivals(RngStream& stream, double b, int n);

/// Log-distance pathloss in dB.
double pathloss_db(double distance_m, const SystemConfig& config);

/// Mean channel power gain with the shadow factor applied and the total
/// receiver noise power folded in, so the rate law can use unit noise.
double mean_channel_gain(double distance_m, double shadow_db,
                         const SystemConfig& config);

/// Gain realized for a given unit-mean fading quantile.
inline double channel_from_fading(double mean_gain, double fading) {
  return mean_gain * fading;
}

/// One Rayleigh-fading draw: mean_gain times a unit exponential.
double sample_channel(RngStream& stream, double mean_gain);

/// Size in bits of the intermediate output produced after local computing:
/// proportional to the sub-task remainder of the backlog.
double intermediate_output_size(double queue_cycles,
                                const Eigen::VectorXd& cpu_rates,
                                const SystemConfig& config);

/// Transmit power needed to ship `bits` within one offload slot.
/// Throws std::domain_error when the requirement overflows a double
/// (signals a bits_per_cycle / task_cycles misconfiguration).
double required_power(double bits, double channel_gain,
                      const SystemConfig& config);

/// Bits deliverable in one offload slot at the given power; exact inverse
/// of required_power.
double achievable_bits(double power, double channel_gain,
                       const SystemConfig& config);

/// Device queue update for one block under the configured accounting mode.
double wd_queue_step(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                     const Eigen::VectorXd& arrivals,
                     const SystemConfig& config);

/// Device queue update with an explicitly accounted offloaded amount
/// (used by whole-task and fractional offloading policies).
double wd_queue_step_explicit(double queue_cycles,
                              const Eigen::VectorXd& cpu_rates,
                              double offload_cycles,
                              const Eigen::VectorXd& arrivals,
                              const SystemConfig& config);

/// Server queue update: drain by its rates, then absorb the devices'
/// same-block workload residuals.
double server_queue_step(double queue_cycles, const Eigen::VectorXd& cpu_rates,
                         const Eigen::VectorXd& residual_cycles,
                         const SystemConfig& config);

/// Cubic-rate CPU energy over one block.
double local_energy(const Eigen::VectorXd& cpu_rates, const SystemConfig& config);
double offload_energy(double power, const SystemConfig& config);
double server_energy(const Eigen::VectorXd& cpu_rates, const SystemConfig& config);

double wd_stage_cost(double queue_cycles, double total_energy,
                     const SystemConfig& config);
double server_stage_cost(double queue_cycles, double energy,
                         const SystemConfig& config);

struct StageCosts {
  double total = 0.0;
  double server = 0.0;
  Eigen::VectorXd wd;
};

/// Weighted queue+energy costs; `total` is built from the same parts in the
/// same summation order, so the decomposition identity is bit-exact.
StageCosts stage_costs(const ServerState& server,
                       const std::vector<WdState>& wds,
                       const Eigen::VectorXd& wd_energies,
                       double server_energy_j, const SystemConfig& config);

}  // namespace mecsim
