#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "mecsim/diagnostics.hpp"
#include "mecsim/harness.hpp"
#include "oracle_quadrature.hpp"

using namespace mecsim;
using oracle::e1_quadrature;

TEST_CASE("exponential integral against the quadrature oracle") {
  CHECK(exp_integral_e1(1.0) == doctest::Approx(0.219384).epsilon(1e-5));
  CHECK(exp_integral_e1(1.0) ==
        doctest::Approx(e1_quadrature(1.0)).epsilon(1e-13));
  const double x9 = std::log(1.0 / 0.9);
  CHECK(exp_integral_e1(x9) == doctest::Approx(1.7757).epsilon(1e-4));
  CHECK(exp_integral_e1(x9) == doctest::Approx(e1_quadrature(x9)).epsilon(1e-13));

  // 50-point log grid over [1e-3, 10]: absolute error below 1e-12,
  // monotone decreasing, positive, below exp(-x)/x.
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const double x = std::pow(10.0, -3.0 + 4.0 * i / 49.0);
    const double mine = exp_integral_e1(x);
    CHECK(std::abs(mine - e1_quadrature(x)) <= 1e-12);
    CHECK(mine > 0.0);
    CHECK(mine < prev);
    CHECK(mine <= std::exp(-x) / x);
    prev = mine;
  }
  CHECK_THROWS_AS(exp_integral_e1(0.0), std::domain_error);
  CHECK_THROWS_AS(exp_integral_e1(-1.0), std::domain_error);
}

TEST_CASE("stationarity bound values") {
  CHECK(prop1_bound(0.0, 0.9) == 0.0);
  CHECK(prop1_bound(10.0, 0.9) == doctest::Approx(5.632).epsilon(1e-3));
  // Bound shrinks toward zero as the discount approaches one.
  double prev = std::numeric_limits<double>::infinity();
  for (double gamma : {0.9, 0.99, 0.999}) {
    const double b = prop1_bound(10.0, gamma);
    CHECK(b < prev);
    CHECK(b > 0.0);
    prev = b;
  }
  CHECK_THROWS_AS(prop1_bound(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(prop1_bound(-1.0, 0.9), std::invalid_argument);
}

TEST_CASE("stationarity monitor bookkeeping") {
  // Two seeds, three blocks; means are 2, 0.5, 3 -> min 0.5 at block 1.
  const std::vector<std::vector<double>> grads = {{3.0, 0.5, 4.0},
                                                  {1.0, 0.5, 2.0}};
  const Prop1Report rep = prop1_monitor(grads, {2.0, 2.0}, 0.9);
  CHECK(rep.min_running_mean == doctest::Approx(0.5));
  CHECK(rep.argmin_block == 1);
  CHECK(rep.bound == doctest::Approx(prop1_bound(2.0, 0.9)));
  CHECK(rep.ok);
}

TEST_CASE("gradient checks stay within tolerance") {
  RngStream rng(2024);
  for (GradTarget target : {GradTarget::wd_power, GradTarget::wd_params,
                            GradTarget::server_rate, GradTarget::server_params}) {
    double worst = 0.0;
    for (int i = 0; i < 25; ++i)
      worst = std::max(worst, finite_diff_check(target, rng));
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("value iteration oracle") {
  TinyInstance tiny = make_tiny_instance();

  // Myopic limit: action values equal immediate costs exactly.
  {
    TinyInstance myopic = tiny;
    myopic.config.discount = 0.0;
    const auto res = value_iteration_oracle(myopic);
    const TinyTables tables = tiny_tables(myopic);
    CHECK((res.q - tables.cost).cwiseAbs().maxCoeff() == 0.0);
  }

  // Zero weights: every value is zero.
  {
    const TinyInstance zero = make_zero_cost_tiny();
    const auto res = value_iteration_oracle(zero);
    CHECK(res.q.cwiseAbs().maxCoeff() == 0.0);
    RngStream rng(3);
    CHECK(bellman_residual([](int, int) { return 0.0; }, zero, 500, rng) == 0.0);
  }

  // Default instance: contraction closes and the fixed point is
  // self-consistent under the Bellman operator.
  const auto res = value_iteration_oracle(tiny);
  CHECK(res.sup_delta <= 1e-9);
  CHECK(res.sweeps < 100000);
  RngStream rng(4);
  const double residual = bellman_residual(
      [&](int s, int a) { return res.q(s, a); }, tiny, 2000, rng);
  CHECK(residual <= 1e-8);

  // Frozen corner values, derived from this oracle. The empty-queue,
  // zero-power entry prices only future arrivals; a loaded queue with the
  // weak channel is strictly costlier than the same queue with the strong one.
  const int s_empty = tiny.encode(0, 0, 0);
  CHECK(res.q(s_empty, 0) == doctest::Approx(5.1206184091).epsilon(1e-6));
  const int s_mid_lo = tiny.encode(4, 0, 0);
  const int s_mid_hi = tiny.encode(4, 1, 0);
  CHECK(res.q.row(s_mid_lo).minCoeff() > res.q.row(s_mid_hi).minCoeff());

  CHECK_THROWS_AS(value_iteration_oracle(tiny, 1e-9, 3), std::runtime_error);
}

TEST_CASE("trained parametric values beat the untrained baseline") {
  const TinyInstance tiny = make_tiny_instance();
  int improved = 0;
  for (int s = 0; s < 3; ++s) {
    const std::uint64_t seed = episode_seed_for(99, s);
    WdLearner learner = train_wd_on_tiny(tiny, seed, 4000);
    REQUIRE(!learner.diverged);
    auto learned_eval = [&](int st, int a) {
      int qi, hi, beta;
      tiny.decode(st, qi, hi, beta);
      WdState ws = make_wd_state(tiny.config);
      ws.queue_cycles = tiny.queue_grid[qi];
      ws.channel_gain = tiny.channel_grid[hi];
      ws.arrivals[0] = beta;
      return q_value(learner.params, learner.bank.features(wd_action_state(
                                         tiny.power_grid[a], ws)));
    };
    RngStream r1(derive_stream_id(seed, StreamKind::misc, 8));
    RngStream r2(r1);
    const double trained = bellman_residual(learned_eval, tiny, 1500, r1);
    const double untrained =
        bellman_residual([](int, int) { return 0.0; }, tiny, 1500, r2);
    if (trained < untrained) ++improved;
  }
  CHECK(improved == 3);
}
