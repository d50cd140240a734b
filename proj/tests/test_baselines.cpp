#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mecsim/baselines.hpp"

using namespace mecsim;

namespace {
SystemConfig default_config() {
  SystemConfig cfg;
  cfg.validate();
  return cfg;
}

WdState state_with(double q, double h, const SystemConfig& cfg) {
  WdState s = make_wd_state(cfg);
  s.queue_cycles = q;
  s.channel_gain = h;
  return s;
}
}  // namespace

TEST_CASE("policy names round trip") {
  for (PolicyKind k : {PolicyKind::proposed, PolicyKind::binary, PolicyKind::even,
                       PolicyKind::random}) {
    CHECK(policy_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(policy_from_string("greedy"), std::invalid_argument);
}

TEST_CASE("head-of-line workload") {
  const SystemConfig cfg = default_config();
  const double w = cfg.task_cycles;
  CHECK(head_of_line_cycles(0.0, cfg) == 0.0);
  CHECK(head_of_line_cycles(2.0 * w, cfg) == w);
  CHECK(head_of_line_cycles(2.3 * w, cfg) == doctest::Approx(0.3 * w));
  CHECK(head_of_line_cycles(0.4 * w, cfg) == doctest::Approx(0.4 * w));
}

TEST_CASE("binary offloading") {
  const SystemConfig cfg = default_config();
  const double w = cfg.task_cycles;

  // Empty queue: no action.
  {
    const WdAction a = binary_offload_decide(state_with(0.0, 5000.0, cfg), cfg, 100.0);
    CHECK(a.power == 0.0);
    CHECK(a.cpu_rates.sum() == 0.0);
    CHECK(a.offload_cycles == 0.0);
  }

  // Excellent channel: offloading dominates and ships the whole task.
  {
    const WdAction a =
        binary_offload_decide(state_with(2.0 * w, 1e9, cfg), cfg, 100.0);
    CHECK(a.offload_cycles == w);
    CHECK(a.cpu_rates.sum() == 0.0);
    CHECK(a.power == doctest::Approx(cfg.snr_gap / 1e9).epsilon(1e-12));
  }

  // Golden decision at the mean gain of a mid-cell device: the full-task
  // power is tiny, so the rule offloads at exactly Gamma/h.
  {
    const double h = 5000.0;
    const WdAction a = binary_offload_decide(state_with(w, h, cfg), cfg, 100.0);
    CHECK(a.offload_cycles == w);
    CHECK(a.power == doctest::Approx(1.5 / 5000.0).epsilon(1e-12));
    CHECK(a.offload_bits == doctest::Approx(cfg.bits_per_cycle * w));
  }

  // Terrible channel against a tight power cap: falls back to local and a
  // started task stays local until it finishes.
  {
    const WdAction a =
        binary_offload_decide(state_with(w, 1e-6, cfg), cfg, 1.0);
    CHECK(a.offload_cycles == 0.0);
    CHECK(a.cpu_rates.sum() > 0.0);
    const double done = a.cpu_rates.sum() * cfg.slot_seconds;
    const WdAction b =
        binary_offload_decide(state_with(w - done, 1e9, cfg), cfg, 1.0);
    CHECK(b.offload_cycles == 0.0);  // partial head keeps computing locally
    CHECK(b.cpu_rates.sum() > 0.0);
  }
}

TEST_CASE("even allocation") {
  const SystemConfig cfg = default_config();
  const double w = cfg.task_cycles;

  {
    const WdAction a = even_allocation_decide(state_with(0.0, 5000.0, cfg), cfg, 0.5);
    CHECK(a.power == 0.0);
    CHECK(a.cpu_rates.sum() == 0.0);
  }

  // Degenerate fraction: a pure local policy, never any transmit power.
  {
    RngStream rng(2);
    for (int i = 0; i < 100; ++i) {
      const double q = rng.uniform01() * 5.0 * w;
      const WdAction a = even_allocation_decide(state_with(q, 5000.0, cfg), cfg, 0.0);
      CHECK(a.power == 0.0);
      CHECK(a.offload_cycles == 0.0);
    }
  }

  // Half of a full task ships when the rate caps leave room.
  {
    SystemConfig roomy = cfg;
    roomy.f_max_wd = 2e10;
    const WdAction a = even_allocation_decide(state_with(w, 5000.0, roomy), roomy, 0.5);
    CHECK(a.offload_cycles == doctest::Approx(0.5 * w));
    CHECK(a.offload_bits == doctest::Approx(0.5 * roomy.bits_per_cycle * w));
    CHECK(served_cycles(a.cpu_rates, roomy) == doctest::Approx(0.5 * w));
  }

  CHECK_THROWS_AS(even_allocation_decide(state_with(w, 5000.0, cfg), cfg, 1.5),
                  std::invalid_argument);
}

TEST_CASE("random offloading") {
  const SystemConfig cfg = default_config();
  const double w = cfg.task_cycles;

  {
    RngStream rng(3);
    const WdAction a = random_offload_decide(state_with(0.0, 5000.0, cfg), cfg, rng);
    CHECK(a.power == 0.0);
    CHECK(a.offload_cycles == 0.0);
  }

  // Seeded stream reproduces the fraction sequence.
  {
    RngStream r1(4), r2(4);
    for (int i = 0; i < 50; ++i) {
      const WdAction a = random_offload_decide(state_with(w, 5000.0, cfg), cfg, r1);
      const WdAction b = random_offload_decide(state_with(w, 5000.0, cfg), cfg, r2);
      CHECK(a.offload_cycles == b.offload_cycles);
      CHECK(a.power == b.power);
    }
  }

  // Mean shipped fraction of the head workload approaches one half.
  {
    RngStream rng(5);
    double acc = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const WdAction a = random_offload_decide(state_with(w, 5000.0, cfg), cfg, rng);
      acc += a.offload_cycles / w;
    }
    CHECK(std::abs(acc / draws - 0.5) < 0.005);
  }
}

TEST_CASE("all baseline actions are feasible and power-consistent") {
  const SystemConfig cfg = default_config();
  RngStream rng(6);
  for (int trial = 0; trial < 2000; ++trial) {
    const double q = rng.uniform01() * 6.0 * cfg.task_cycles;
    const double h = 50.0 + 10000.0 * rng.uniform01();
    const WdState s = state_with(q, h, cfg);
    WdAction actions[3] = {
        binary_offload_decide(s, cfg, 100.0),
        even_allocation_decide(s, cfg, 0.5),
        random_offload_decide(s, cfg, rng),
    };
    for (const WdAction& a : actions) {
      for (int i = 0; i < a.cpu_rates.size(); ++i) {
        CHECK(a.cpu_rates[i] >= 0.0);
        CHECK(a.cpu_rates[i] <= cfg.f_max_wd);
      }
      CHECK(a.offload_cycles >= 0.0);
      CHECK(a.offload_cycles <= q);
      CHECK(a.power ==
            doctest::Approx(required_power(a.offload_bits, h, cfg)).epsilon(1e-12));
    }
  }
}
