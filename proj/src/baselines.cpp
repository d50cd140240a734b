#include "mecsim/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace mecsim {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::proposed: return "proposed";
    case PolicyKind::binary: return "binary";
    case PolicyKind::even: return "even";
    case PolicyKind::random: return "random";
  }
  return "proposed";
}

PolicyKind policy_from_string(const std::string& name) {
  if (name == "proposed") return PolicyKind::proposed;
  if (name == "binary") return PolicyKind::binary;
  if (name == "even") return PolicyKind::even;
  if (name == "random") return PolicyKind::random;
  throw std::invalid_argument("unknown policy '" + name + "'");
}

double head_of_line_cycles(double queue_cycles, const SystemConfig& config) {
  if (queue_cycles <= 0.0) return 0.0;
  const double frac = std::fmod(queue_cycles, config.task_cycles);
  if (frac > 0.0) return frac;
  return std::min(queue_cycles, config.task_cycles);
}

WdAction finalize_partition(double queue_cycles, double channel_gain,
                            double offload_cycles, double local_cycles,
                            const SystemConfig& config) {
  WdAction a;
  a.cpu_rates = Eigen::VectorXd::Zero(config.slots_per_block);
  if (queue_cycles <= 0.0) return a;

  const double compute =
      std::clamp(local_cycles, 0.0, config.block_cycle_cap_wd());
  a.cpu_rates.setConstant(compute /
                          (config.slots_per_block * config.slot_seconds));
  a.offload_cycles = std::clamp(offload_cycles, 0.0, queue_cycles);
  a.offload_bits = config.bits_per_cycle * a.offload_cycles;
  a.power = required_power(a.offload_bits, channel_gain, config);
  return a;
}

WdAction binary_offload_decide(const WdState& state, const SystemConfig& config,
                               double power_cap_w) {
  const double q = state.queue_cycles;
  if (q <= 0.0) return finalize_partition(q, state.channel_gain, 0.0, 0.0, config);

  const double w = config.task_cycles;
  const double frac = std::fmod(q, w);
  if (frac > 0.0) {
    // A task begun locally finishes locally.
    return finalize_partition(q, state.channel_gain, 0.0, frac, config);
  }

  const double head = std::min(q, w);
  double p_full = 0.0;
  bool offload_feasible = true;
  try {
    p_full = required_power(config.bits_per_cycle * head, state.channel_gain,
                            config);
  } catch (const std::domain_error&) {
    offload_feasible = false;
  }
  if (p_full > power_cap_w) offload_feasible = false;

  // One-task cost estimates: cubic energy plus queue-residency blocks.
  const double blocks_local =
      std::ceil(head / config.block_cycle_cap_wd());
  const double local_cost =
      config.w4 * config.cap_wd * head * config.f_max_wd * config.f_max_wd +
      config.w3 * blocks_local * (head / w);
  const double offload_cost = offload_feasible
                                  ? config.w4 * config.slot_seconds * p_full +
                                        config.w3 * (head / w)
                                  : std::numeric_limits<double>::infinity();

  if (offload_feasible && offload_cost < local_cost) {
    return finalize_partition(q, state.channel_gain, head, 0.0, config);
  }
  return finalize_partition(q, state.channel_gain, 0.0,
                            std::min(head, config.block_cycle_cap_wd()), config);
}

WdAction even_allocation_decide(const WdState& state, const SystemConfig& config,
                                double rho_even) {
  if (rho_even < 0.0 || rho_even > 1.0)
    throw std::invalid_argument("even_allocation_decide: rho outside [0, 1]");
  const double head = head_of_line_cycles(state.queue_cycles, config);
  return finalize_partition(state.queue_cycles, state.channel_gain,
                            rho_even * head, (1.0 - rho_even) * head, config);
}

WdAction random_offload_decide(const WdState& state, const SystemConfig& config,
                               RngStream& rng) {
  const double u = rng.uniform01();
  const double head = head_of_line_cycles(state.queue_cycles, config);
  return finalize_partition(state.queue_cycles, state.channel_gain, u * head,
                            (1.0 - u) * head, config);
}

}  // namespace mecsim
