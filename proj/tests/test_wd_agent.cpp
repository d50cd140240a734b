#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mecsim/env.hpp"
#include "mecsim/wd_agent.hpp"

using namespace mecsim;

namespace {
SystemConfig default_config() {
  SystemConfig cfg;
  cfg.validate();
  return cfg;
}
}  // namespace

TEST_CASE("device reward") {
  SystemConfig cfg = default_config();
  cfg.w3 = 1.0;
  const int n = cfg.slots_per_block;
  const Eigen::VectorXd idle = Eigen::VectorXd::Zero(n);
  CHECK(wd_reward(0.0, idle, 0.0, cfg) == 0.0);
  CHECK(wd_reward(cfg.task_cycles, idle, 0.0, cfg) == doctest::Approx(1.0).epsilon(1e-15));

  // Definitional consistency with the energy terms, bit for bit.
  Eigen::VectorXd f = Eigen::VectorXd::Constant(n, 7.3e8);
  const double p = 0.42;
  const double q = 2.7 * cfg.task_cycles;
  CHECK(wd_reward(q, f, p, cfg) ==
        cfg.w3 * (q / cfg.task_cycles) +
            cfg.w4 * (local_energy(f, cfg) + offload_energy(p, cfg)));
}

TEST_CASE("td error hand value") {
  Eigen::VectorXd theta(1), phi_t(1), phi_n(1);
  theta << 1.0;
  phi_t << 0.5;
  phi_n << 2.0;  // not a sigmoid output, just exercising the formula
  CHECK(td_error(1.0, theta, phi_t, phi_n, 0.9) ==
        doctest::Approx(2.3).epsilon(1e-15));
}

TEST_CASE("power gradient degenerate cases") {
  const SystemConfig cfg = default_config();
  FeatureBank bank(cfg.feature_dim, wd_feature_scales(5000.0, cfg), 3);
  const Eigen::VectorXd phi = Eigen::VectorXd::Constant(cfg.feature_dim, 0.5);

  // Zero parameters leave only the reward slope.
  const double g = wd_power_gradient(2.0, Eigen::VectorXd::Zero(cfg.feature_dim),
                                     bank, phi, phi, cfg);
  CHECK(g == doctest::Approx(2.0 * cfg.w4 * cfg.slot_seconds).epsilon(1e-15));

  // Zero TD error kills the whole gradient.
  Eigen::VectorXd theta = Eigen::VectorXd::Ones(cfg.feature_dim);
  CHECK(wd_power_gradient(0.0, theta, bank, phi, phi, cfg) == 0.0);
}

TEST_CASE("parameter gradient degenerate cases") {
  Eigen::VectorXd phi_t(3), phi_n(3);
  phi_t << 0.2, 0.4, 0.6;
  phi_n << 0.5, 0.5, 0.5;
  CHECK(td_param_gradient(0.0, phi_t, phi_n, 0.9).norm() == 0.0);
  const Eigen::VectorXd g = td_param_gradient(1.5, phi_t, phi_n, 0.0);
  CHECK(g == (-1.5 * phi_t).eval());
}

TEST_CASE("gradient step projects the power and updates parameters exactly") {
  const SystemConfig cfg = default_config();
  WdLearner learner = make_wd_learner(cfg, 5000.0, 11, 0.1, StepSchedule{}, 1e-3);
  learner.params = Eigen::VectorXd::Constant(cfg.feature_dim, 0.3);

  WdGradients grads;
  grads.power = 10.0;
  grads.params = Eigen::VectorXd::Constant(cfg.feature_dim, 2.0);

  const Eigen::VectorXd expected = learner.params - 0.05 * grads.params;
  gd_step_wd(learner, grads, 0.05);
  CHECK(learner.power == 0.0);  // [0.1 - 0.5]+ = 0
  CHECK(learner.params == expected);

  // Zero gradients leave the learner unchanged.
  WdLearner frozen = make_wd_learner(cfg, 5000.0, 11, 0.7, StepSchedule{}, 1e-3);
  frozen.params = expected;
  WdGradients none;
  none.power = 0.0;
  none.params = Eigen::VectorXd::Zero(cfg.feature_dim);
  gd_step_wd(frozen, none, 0.05);
  CHECK(frozen.power == 0.7);
  CHECK(frozen.params == expected);

  // Non-finite gradients flag divergence and freeze the state.
  WdGradients bad = none;
  bad.power = std::numeric_limits<double>::infinity();
  gd_step_wd(frozen, bad, 0.05);
  CHECK(frozen.diverged);
  CHECK(frozen.power == 0.7);
}

TEST_CASE("project_action basic cases") {
  const SystemConfig cfg = default_config();
  const double w = cfg.task_cycles;

  WdState state = make_wd_state(cfg);
  state.channel_gain = 5000.0;

  // Empty queue: nothing to do.
  state.queue_cycles = 0.0;
  auto [p0, f0] = project_action(1.0, state, cfg);
  CHECK(p0 == 0.0);
  CHECK(f0.sum() == 0.0);

  // One task, a proposal that ships half of it, and slack caps.
  SystemConfig roomy = cfg;
  roomy.f_max_wd = 2e10;  // block cap 1e10 = one task
  state.queue_cycles = w;
  const double p_half =
      required_power(cfg.bits_per_cycle * 0.5 * w, state.channel_gain, roomy);
  auto [p1, f1] = project_action(p_half, state, roomy);
  CHECK(served_cycles(f1, roomy) == doctest::Approx(0.5 * w).epsilon(1e-9));
  const double residual =
      std::fmod(std::max(w - served_cycles(f1, roomy), 0.0), w);
  CHECK(residual == doctest::Approx(0.5 * w).epsilon(1e-9));
  CHECK(p1 == doctest::Approx(p_half).epsilon(1e-9));
}

TEST_CASE("project_action always returns a feasible consistent pair") {
  const SystemConfig cfg = default_config();
  RngStream rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    WdState state = make_wd_state(cfg);
    state.queue_cycles = rng.uniform01() * 6.0 * cfg.task_cycles;
    state.channel_gain = 50.0 + 10000.0 * rng.uniform01();
    const double proposal = rng.uniform01() * 3.0;
    auto [p, f] = project_action(proposal, state, cfg);
    for (int i = 0; i < f.size(); ++i) {
      CHECK(f[i] >= 0.0);
      CHECK(f[i] <= cfg.f_max_wd);
    }
    CHECK(p >= 0.0);
    // Power-output consistency: the executed power ships exactly the
    // remainder the executed rates leave behind.
    const double bits = intermediate_output_size(state.queue_cycles, f, cfg);
    CHECK(p == doctest::Approx(required_power(bits, state.channel_gain, cfg))
                   .epsilon(1e-9));
  }
}

TEST_CASE("frozen learner reproduces rewards through fixed parameters") {
  SystemConfig cfg = default_config();
  WdLearner learner =
      make_wd_learner(cfg, 5000.0, 31, 1.0, StepSchedule{0.0, 1000.0}, 1e-3);
  learner.params = Eigen::VectorXd::Constant(cfg.feature_dim, 0.2);
  const Eigen::VectorXd params_before = learner.params;

  RngStream rng(41);
  WdState prev = make_wd_state(cfg);
  prev.queue_cycles = 2.0 * cfg.task_cycles;
  prev.channel_gain = 5000.0;
  prev.arrivals = sample_arrivals(rng, 0.4, cfg.slots_per_block);
  auto [p, f] = project_action(learner.power, prev, cfg);
  prev.power = p;
  prev.cpu_rates = f;

  for (int t = 0; t < 20; ++t) {
    WdState next = make_wd_state(cfg);
    next.queue_cycles = wd_queue_step(prev.queue_cycles, prev.cpu_rates,
                                      prev.arrivals, cfg);
    next.channel_gain = sample_channel(rng, 5000.0);
    next.arrivals = sample_arrivals(rng, 0.4, cfg.slots_per_block);
    const WdBlockResult res = algorithm1_block(learner, prev, next, cfg);

    // alpha == 0 freezes both the parameters and the power iterate.
    CHECK(learner.params == params_before);
    CHECK(learner.power == 1.0);

    // The TD error is then exactly the reward transformed by fixed params.
    const Eigen::VectorXd phi_t =
        learner.bank.features(wd_action_state(prev.power, prev));
    const Eigen::VectorXd phi_n =
        learner.bank.features(wd_action_state(prev.power, next));
    CHECK(res.delta ==
          td_error(res.reward, params_before, phi_t, phi_n, cfg.discount));

    auto [p2, f2] = project_action(learner.power, next, cfg);
    next.power = p2;
    next.cpu_rates = f2;
    prev = next;
  }
}

TEST_CASE("learner checkpoint round trip") {
  const SystemConfig cfg = default_config();
  WdLearner learner = make_wd_learner(cfg, 4000.0, 55, 0.8, StepSchedule{}, 1e-3);
  learner.params = Eigen::VectorXd::LinSpaced(cfg.feature_dim, -1.0, 1.0);
  learner.step = 17;
  const WdLearner restored = wd_learner_from_checkpoint(wd_learner_checkpoint(learner));
  CHECK(restored.params == learner.params);
  CHECK(restored.power == learner.power);
  CHECK(restored.step == learner.step);
  CHECK(restored.bank.weights() == learner.bank.weights());
}
