#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mecsim/config.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/wd_agent.hpp"

namespace mecsim {

/// Exponential integral E1(x) = int_x^inf exp(-t)/t dt for x > 0.
/// Power series below 1, modified-Lentz continued fraction above;
/// absolute error below 1e-12 over [1e-3, 10].
double exp_integral_e1(double x);

/// Stationarity-neighborhood bound for the online learners: the expected
/// squared TD error of the first block divided by E1(ln(1/gamma)).
double prop1_bound(double first_block_sq_td_error_estimate, double gamma);

struct Prop1Report {
  double bound = 0.0;
  double min_running_mean = 0.0;
  long argmin_block = -1;
  bool ok = false;
};

/// Checks that the running minimum over blocks of the seed-averaged squared
/// gradient norm stays below the bound computed from the measured
/// first-block squared TD errors.
Prop1Report prop1_monitor(
    const std::vector<std::vector<double>>& grad_sq_per_seed,
    const std::vector<double>& first_block_sq_td, double gamma);

enum class GradTarget { wd_power, wd_params, server_rate, server_params };

/// Draws one random learning instance for `target`, compares the analytic
/// gradient against a central finite difference of the squared TD error
/// (2x the analytic value, matching the absorbed-factor convention), and
/// returns the worst relative error over the perturbed coordinates.
/// Degenerate all-zero instances report the absolute error instead.
double finite_diff_check(GradTarget target, RngStream& rng, double h_fd = 1e-6);

/// Discretized single-device instance small enough for exact dynamic
/// programming: quantized queue levels, a two-point channel, a fixed power
/// grid and Bernoulli arrivals, driven by the same projection and queue
/// mechanics as the full simulator.
struct TinyInstance {
  SystemConfig config;
  double mean_gain = 1000.0;
  Eigen::VectorXd queue_grid;
  Eigen::Vector2d channel_grid;
  Eigen::VectorXd power_grid;

  int num_queue_levels() const { return static_cast<int>(queue_grid.size()); }
  int num_states() const { return num_queue_levels() * 2 * 2; }
  int num_actions() const { return static_cast<int>(power_grid.size()); }

  int encode(int qi, int hi, int beta) const { return (qi * 2 + hi) * 2 + beta; }
  void decode(int s, int& qi, int& hi, int& beta) const {
    beta = s % 2;
    hi = (s / 2) % 2;
    qi = s / 4;
  }

  struct StepOutcome {
    double cost = 0.0;
    int next_qi = 0;
    double power_exec = 0.0;
    Eigen::VectorXd cpu_rates;
  };
  /// Executed dynamics for an arbitrary power proposal: project, cost,
  /// queue step, then snap the queue to the nearest grid level.
  StepOutcome step(int qi, int hi, int beta, double power_proposal) const;
};

TinyInstance make_tiny_instance();
/// Variant with all cost weights zero (every stage cost vanishes).
TinyInstance make_zero_cost_tiny();

struct TinyTables {
  Eigen::MatrixXd cost;      // S x A
  Eigen::MatrixXi next_qi;   // S x A
};
TinyTables tiny_tables(const TinyInstance& tiny);

struct ValueIterationResult {
  Eigen::MatrixXd q;   // S x A, Bellman-consistent action values
  long sweeps = 0;
  double sup_delta = 0.0;
};

/// Exact value iteration on the tiny instance to the given sup-norm
/// tolerance. Throws if the contraction has not closed within max_sweeps.
ValueIterationResult value_iteration_oracle(const TinyInstance& tiny,
                                            double tol = 1e-9,
                                            long max_sweeps = 100000);

/// Mean squared Bellman-optimality residual of an arbitrary action-value
/// evaluator over uniformly sampled state-action pairs; the next-state
/// expectation is taken exactly over the finite kernel.
double bellman_residual(const std::function<double(int, int)>& evaluator,
                        const TinyInstance& tiny, int sample_count,
                        RngStream& rng);

/// Trains a device learner online on the tiny dynamics.
WdLearner train_wd_on_tiny(const TinyInstance& tiny, std::uint64_t seed,
                           long blocks, StepSchedule schedule = {0.05, 500.0});

/// Greedy action over the power grid under a trained learner's value model.
int tiny_greedy_action(const WdLearner& learner, const TinyInstance& tiny,
                       int state);

/// Discounted rollout cost of a state-indexed policy on the tiny dynamics.
double tiny_rollout_discounted(const TinyInstance& tiny,
                               const std::function<int(int)>& policy_action,
                               long blocks, RngStream& rng, int start_qi);

/// Discounted rollout cost of a trained learner deployed on the tiny
/// dynamics: the power iterate keeps descending online, as in deployment.
double tiny_rollout_learner(const TinyInstance& tiny, WdLearner learner,
                            long blocks, RngStream& rng, int start_qi);

}  // namespace mecsim
