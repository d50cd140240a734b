#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace mecsim {

/// Whether the wireless-device queue keeps or releases the workload residual
/// that is handed to the edge server at the end of a block.
enum class QueueMode {
  paper_faithful,  // residual stays in the device queue (and also reaches the server)
  conserving,      // residual leaves the device queue (workload conservation)
};

std::string to_string(QueueMode mode);
QueueMode queue_mode_from_string(const std::string& name);

/// All physical and learning constants of the simulated system.
///
/// Loaded from JSON with exactly these field names; unknown fields are
/// rejected. `weights` maps to [w1, w2, w3, w4] and `pathloss` to the
/// (intercept, slope) coefficients of the log-distance model in dB.
struct SystemConfig {
  int num_wds = 4;
  int slots_per_block = 5;
  double slot_seconds = 0.1;
  double task_cycles = 1e10;
  double arrival_prob = 0.4;
  double bandwidth_hz = 1e6;
  double snr_gap = 1.5;
  double cap_wd = 1e-28;
  double cap_ser = 1e-29;
  double bits_per_cycle = 1e-5;
  double f_max_wd = 1e9;
  double f_max_ser = 1e10;
  // Backlog at a device represents more residual latency than backlog at
  // the far faster edge server, so the device queue carries double weight;
  // with equal queue weights the objective cannot tell where cycles wait.
  double w1 = 1.0;  // server queue weight
  double w2 = 1.0;  // server energy weight
  double w3 = 2.0;  // device queue weight
  double w4 = 1.0;  // device energy weight
  double discount = 0.9;
  int feature_dim = 30;
  double cell_radius_m = 200.0;
  double pathloss_a = 30.6;
  double pathloss_b = 37.6;
  double shadow_std_db = 10.0;
  double noise_dbm_per_hz = -174.0;
  QueueMode queue_mode = QueueMode::conserving;
  std::uint64_t seed = 1;

  /// Total receiver noise power in watts over the offload bandwidth.
  double noise_power_w() const;
  /// Bits carried by one offload slot per unit of log2(1 + SNR).
  double slot_bandwidth_bits() const { return slot_seconds * bandwidth_hz; }
  /// Cycles one device can execute over the compute slots of a block.
  double block_cycle_cap_wd() const {
    return slots_per_block * slot_seconds * f_max_wd;
  }
  double block_cycle_cap_ser() const {
    return slots_per_block * slot_seconds * f_max_ser;
  }

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const SystemConfig& c);
void from_json(const nlohmann::json& j, SystemConfig& c);

SystemConfig system_config_from_file(const std::string& path);

}  // namespace mecsim
