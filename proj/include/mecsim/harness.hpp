#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mecsim/baselines.hpp"
#include "mecsim/config.hpp"
#include "mecsim/env.hpp"
#include "mecsim/server_agent.hpp"
#include "mecsim/wd_agent.hpp"

namespace mecsim {

/// One experiment: system constants, the device-side policy, horizon and
/// seeding, plus the free constants of the policies and learners.
struct ExperimentConfig {
  SystemConfig system;
  PolicyKind policy = PolicyKind::proposed;
  long horizon_blocks = 2000;
  std::uint64_t master_seed = 1;
  double rho_even = 0.5;
  double binary_power_cap_w = 100.0;
  // Near the mean-SNR power scale of a mid-cell device, so the first blocks
  // already exercise the compute-and-ship regime.
  double p_init_w = 1e-4;
  // One task queued per device at boot; the first learning steps then see
  // live dynamics instead of an empty system.
  double initial_queue_tasks = 1.0;
  StepSchedule schedule;
  double epsilon = 1e-3;
  double action_jitter_std = 0.0;  // optional exploration noise on the proposal
  bool fixed_rate_server = false;  // ablation: constant server rates, no learning
  double fixed_rate_frac = 0.5;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig experiment_config_from_file(const std::string& path);

struct WdBlockRow {
  long block = 0;
  int wd_id = 0;
  double cost = 0.0;
  double e_wd = 0.0;
  double e_off = 0.0;
  double q_wd = 0.0;
  double td_err = 0.0;
  double grad_norm = 0.0;
  double theta_rel_change = 0.0;
  double channel_gain = 0.0;   // trace-only, not part of the CSV schema
  double grad_sq_norm = 0.0;   // trace-only
};

struct SystemBlockRow {
  long block = 0;
  double cost_ser = 0.0;
  double e_ser = 0.0;
  double q_ser = 0.0;
  double rho = 0.0;
  double grad_norm = 0.0;
  double eta_rel_change = 0.0;
  double cost_total = 0.0;
  double discounted_cum = 0.0;
  double grad_sq_norm = 0.0;   // trace-only
};

struct EpisodeTrace {
  std::vector<WdBlockRow> wd_rows;        // K rows per block
  std::vector<SystemBlockRow> system_rows;
  std::string status = "ok";              // "ok" or "diverged"
  double discounted_sum = 0.0;
  double tail_bound = 0.0;                // gamma^T * c_max / (1 - gamma)
  std::vector<long> wd_converged_block;
  long server_converged_block = -1;
  std::vector<double> wd_distance_m;
  std::vector<double> wd_shadow_db;
  std::vector<double> wd_mean_gain;
  std::vector<std::uint64_t> seed_ledger_ids;
  std::vector<std::string> seed_ledger_names;
};

/// Runs one seeded episode block by block: sample arrivals and channels,
/// finish the previous block's device updates, decide actions, account
/// energies and queue steps, update the server learner, record metrics.
EpisodeTrace run_episode(const ExperimentConfig& config);

double discounted_sum(const std::vector<double>& costs, double gamma);

/// Episode master seed for seed-index `s` of a sweep; shared across policies
/// and axis values so comparisons ride on common random numbers.
std::uint64_t episode_seed_for(std::uint64_t sweep_master, int seed_index);

struct SweepCell {
  std::string axis;
  double value = 0.0;
  PolicyKind policy = PolicyKind::proposed;
  std::vector<double> sums;     // per seed, NaN if the run diverged
  std::vector<std::string> statuses;
  double mean = 0.0;
  double stddev = 0.0;
  double ci95_halfwidth = 0.0;
};

/// Cross product of {all policies} x {axis values} x {seed indices}; cells
/// run independently (optionally on a worker pool) and failures are recorded
/// per cell without aborting the sweep.
std::vector<SweepCell> sweep(const ExperimentConfig& base,
                             const std::string& axis,
                             const std::vector<double>& values, int seeds,
                             int jobs);

/// Atomic file write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string wd_csv_text(const EpisodeTrace& trace, const ExperimentConfig& config);
std::string system_csv_text(const EpisodeTrace& trace, const ExperimentConfig& config);
nlohmann::json episode_summary(const EpisodeTrace& trace,
                               const ExperimentConfig& config);

/// Writes wd_metrics.csv, system_metrics.csv and summary.json under out_dir.
void write_episode_outputs(const EpisodeTrace& trace,
                           const ExperimentConfig& config,
                           const std::string& out_dir);

std::string sweep_summary_csv(const std::vector<SweepCell>& cells);
std::string sweep_raw_csv(const std::vector<SweepCell>& cells);

}  // namespace mecsim
