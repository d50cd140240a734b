#pragma once

#include <Eigen/Dense>
#include <string>

#include "mecsim/config.hpp"
#include "mecsim/env.hpp"
#include "mecsim/rng.hpp"

namespace mecsim {

enum class PolicyKind { proposed, binary, even, random };

std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& name);

/// Executed device action for one block. `offload_cycles` is the workload
/// handed to the server; `offload_bits` the bits shipped in the offload slot
/// (the two are tied through bits_per_cycle and the power law).
struct WdAction {
  double power = 0.0;
  Eigen::VectorXd cpu_rates;
  double offload_cycles = 0.0;
  double offload_bits = 0.0;
};

/// Remaining cycles of the head-of-line task: the sub-task remainder when
/// one exists, else one whole task (or the leftover queue if smaller).
double head_of_line_cycles(double queue_cycles, const SystemConfig& config);

/// Caps the local compute amount, spreads it evenly over the slots and
/// derives the exact transmit power for the shipped bits. All policies
/// funnel their decisions through here, so every action satisfies the rate
/// caps and the power-rate consistency law.
WdAction finalize_partition(double queue_cycles, double channel_gain,
                            double offload_cycles, double local_cycles,
                            const SystemConfig& config);

/// Whole-entity offloading: the head task runs fully on the device or ships
/// fully to the server, whichever the one-task cost estimate favors. A task
/// begun locally finishes locally. Falls back to local execution when the
/// full-task offload needs more than `power_cap_w`.
WdAction binary_offload_decide(const WdState& state, const SystemConfig& config,
                               double power_cap_w);

/// Fixed-fraction offloading: ship rho_even of the head-of-line workload,
/// compute the remainder locally up to the rate caps.
WdAction even_allocation_decide(const WdState& state, const SystemConfig& config,
                                double rho_even);

/// Uniform random fraction of the head-of-line workload is shipped; the
/// remainder is computed locally up to the rate caps.
WdAction random_offload_decide(const WdState& state, const SystemConfig& config,
                               RngStream& rng);

}  // namespace mecsim
