#include "mecsim/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "mecsim/env.hpp"
#include "mecsim/qfunc.hpp"
#include "mecsim/server_agent.hpp"

namespace mecsim {

namespace {
constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
}

double exp_integral_e1(double x) {
  if (x <= 0.0)
    throw std::domain_error("exp_integral_e1: argument must be > 0");
  if (x <= 1.0) {
    // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k * k!)
    double sum = 0.0;
    double term = 1.0;  // x^k / k!
    for (int k = 1; k <= 60; ++k) {
      term *= x / k;
      const double contrib = (k % 2 == 1 ? term : -term) / k;
      sum += contrib;
      if (std::abs(contrib) < 1e-18 * std::max(1.0, std::abs(sum))) break;
    }
    return -kEulerGamma - std::log(x) + sum;
  }
  // Modified Lentz continued fraction: e^{-x} / (x + 1 - 1/(x + 3 - 4/(...)))
  const double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 200; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}

double prop1_bound(double first_block_sq_td_error_estimate, double gamma) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("prop1_bound: gamma must lie in (0, 1)");
  if (first_block_sq_td_error_estimate < 0.0)
    throw std::invalid_argument("prop1_bound: estimate must be >= 0");
  return first_block_sq_td_error_estimate / exp_integral_e1(std::log(1.0 / gamma));
}

Prop1Report prop1_monitor(
    const std::vector<std::vector<double>>& grad_sq_per_seed,
    const std::vector<double>& first_block_sq_td, double gamma) {
  if (grad_sq_per_seed.empty() || first_block_sq_td.empty())
    throw std::invalid_argument("prop1_monitor: empty input");
  double estimate = 0.0;
  for (double v : first_block_sq_td) estimate += v;
  estimate /= static_cast<double>(first_block_sq_td.size());

  size_t blocks = grad_sq_per_seed.front().size();
  for (const auto& seed : grad_sq_per_seed)
    blocks = std::min(blocks, seed.size());

  Prop1Report report;
  report.bound = prop1_bound(estimate, gamma);
  report.min_running_mean = std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < blocks; ++t) {
    double mean = 0.0;
    for (const auto& seed : grad_sq_per_seed) mean += seed[t];
    mean /= static_cast<double>(grad_sq_per_seed.size());
    if (mean < report.min_running_mean) {
      report.min_running_mean = mean;
      report.argmin_block = static_cast<long>(t);
    }
  }
  report.ok = report.min_running_mean <= report.bound;
  return report;
}

namespace {

double relative_or_absolute_error(double analytic_2x, double fd) {
  const double scale = std::max(std::abs(analytic_2x), std::abs(fd));
  if (scale < 1e-12) return std::abs(analytic_2x - fd);
  return std::abs(analytic_2x - fd) / scale;
}

struct WdInstance {
  SystemConfig config;
  FeatureBank bank;
  Eigen::VectorXd params;
  WdState now;
  WdState next;
};

WdInstance random_wd_instance(RngStream& rng) {
  SystemConfig cfg;
  cfg.feature_dim = 10;
  const double gbar = 5000.0;
  WdInstance inst{cfg,
                  FeatureBank(cfg.feature_dim, wd_feature_scales(gbar, cfg),
                              rng.next_u64()),
                  Eigen::VectorXd(cfg.feature_dim),
                  make_wd_state(cfg),
                  make_wd_state(cfg)};
  for (int i = 0; i < cfg.feature_dim; ++i) inst.params[i] = rng.normal();
  auto fill = [&](WdState& s) {
    s.queue_cycles = rng.uniform01() * 3.0 * cfg.task_cycles;
    s.channel_gain = gbar * (0.05 + rng.exponential());
    for (int i = 0; i < cfg.slots_per_block; ++i) {
      s.arrivals[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      s.cpu_rates[i] = rng.uniform01() * cfg.f_max_wd;
    }
  };
  fill(inst.now);
  fill(inst.next);
  // Power of the order of the unit-SNR scale, so the action coordinate sits
  // in the live part of the sigmoids.
  inst.now.power = rng.uniform01() * 2.0 * cfg.snr_gap / gbar;
  inst.next.power = inst.now.power;  // shared action coordinate
  return inst;
}

struct ServerInstance {
  SystemConfig config;
  FeatureBank bank;
  Eigen::VectorXd params;
  ServerState now;
  ServerState next;
  Eigen::VectorXd rates;
};

ServerInstance random_server_instance(RngStream& rng) {
  SystemConfig cfg;
  cfg.feature_dim = 10;
  ServerInstance inst{cfg,
                      FeatureBank(cfg.feature_dim, server_feature_scales(cfg),
                                  rng.next_u64()),
                      Eigen::VectorXd(cfg.feature_dim),
                      make_server_state(cfg),
                      make_server_state(cfg),
                      Eigen::VectorXd(cfg.slots_per_block)};
  for (int i = 0; i < cfg.feature_dim; ++i) inst.params[i] = rng.normal();
  auto fill = [&](ServerState& s) {
    s.queue_cycles = rng.uniform01() * 3.0 * cfg.task_cycles;
    for (int k = 0; k < cfg.num_wds; ++k)
      s.wd_queues[k] = rng.uniform01() * 3.0 * cfg.task_cycles;
  };
  fill(inst.now);
  fill(inst.next);
  for (int i = 0; i < cfg.slots_per_block; ++i)
    inst.rates[i] = rng.uniform01() * cfg.f_max_ser;
  return inst;
}

}  // namespace

double finite_diff_check(GradTarget target, RngStream& rng, double h_fd) {
  if (h_fd <= 0.0) throw std::invalid_argument("finite_diff_check: h_fd <= 0");
  double worst = 0.0;

  if (target == GradTarget::wd_power || target == GradTarget::wd_params) {
    WdInstance inst = random_wd_instance(rng);
    const SystemConfig& cfg = inst.config;
    const double gamma = cfg.discount;

    auto delta_of = [&](double p, const Eigen::VectorXd& params) {
      const double r = wd_reward(inst.now.queue_cycles, inst.now.cpu_rates, p, cfg);
      const Eigen::VectorXd phi_t =
          inst.bank.features(wd_action_state(p, inst.now));
      const Eigen::VectorXd phi_n =
          inst.bank.features(wd_action_state(p, inst.next));
      return td_error(r, params, phi_t, phi_n, gamma);
    };

    const double p0 = inst.now.power;
    if (target == GradTarget::wd_power) {
      const double d0 = delta_of(p0, inst.params);
      const Eigen::VectorXd phi_t =
          inst.bank.features(wd_action_state(p0, inst.now));
      const Eigen::VectorXd phi_n =
          inst.bank.features(wd_action_state(p0, inst.next));
      const double analytic =
          wd_power_gradient(d0, inst.params, inst.bank, phi_t, phi_n, cfg);
      // Difference along the normalized power coordinate, where the
      // objective is well conditioned; the analytic value transports by the
      // chain rule.
      const double scale = inst.bank.scales()[kPowerCoord];
      const double p_hat = p0 / scale;
      const double h = h_fd * std::max(1.0, std::abs(p_hat));
      const double dp = delta_of((p_hat + h) * scale, inst.params);
      const double dm = delta_of((p_hat - h) * scale, inst.params);
      const double fd = (dp * dp - dm * dm) / (2.0 * h);
      worst = relative_or_absolute_error(2.0 * analytic * scale, fd);
    } else {
      const double d0 = delta_of(p0, inst.params);
      const Eigen::VectorXd phi_t =
          inst.bank.features(wd_action_state(p0, inst.now));
      const Eigen::VectorXd phi_n =
          inst.bank.features(wd_action_state(p0, inst.next));
      const Eigen::VectorXd analytic =
          td_param_gradient(d0, phi_t, phi_n, gamma);
      for (int i = 0; i < inst.params.size(); ++i) {
        const double h = h_fd * std::max(1.0, std::abs(inst.params[i]));
        Eigen::VectorXd pp = inst.params, pm = inst.params;
        pp[i] += h;
        pm[i] -= h;
        const double dp = delta_of(p0, pp);
        const double dm = delta_of(p0, pm);
        const double fd = (dp * dp - dm * dm) / (2.0 * h);
        worst = std::max(worst, relative_or_absolute_error(2.0 * analytic[i], fd));
      }
    }
    return worst;
  }

  ServerInstance inst = random_server_instance(rng);
  const SystemConfig& cfg = inst.config;
  const double gamma = cfg.discount;

  auto rho_of = [&](const Eigen::VectorXd& rates, const Eigen::VectorXd& params) {
    const double r = server_reward(inst.now.queue_cycles, rates, cfg);
    const Eigen::VectorXd phi_t =
        inst.bank.features(server_action_state(rates, inst.now));
    const Eigen::VectorXd phi_n =
        inst.bank.features(server_action_state(rates, inst.next));
    return td_error(r, params, phi_t, phi_n, gamma);
  };

  if (target == GradTarget::server_rate) {
    const double r0 = rho_of(inst.rates, inst.params);
    const Eigen::VectorXd phi_t =
        inst.bank.features(server_action_state(inst.rates, inst.now));
    const Eigen::VectorXd phi_n =
        inst.bank.features(server_action_state(inst.rates, inst.next));
    for (int i = 0; i < cfg.slots_per_block; ++i) {
      const double analytic =
          server_rate_gradient(r0, inst.params, inst.bank, phi_t, phi_n,
                               inst.rates[i], i, cfg);
      const double scale = cfg.f_max_ser;
      const double f_hat = inst.rates[i] / scale;
      const double h = h_fd * std::max(1.0, std::abs(f_hat));
      Eigen::VectorXd rp = inst.rates, rm = inst.rates;
      rp[i] = (f_hat + h) * scale;
      rm[i] = (f_hat - h) * scale;
      const double dp = rho_of(rp, inst.params);
      const double dm = rho_of(rm, inst.params);
      const double fd = (dp * dp - dm * dm) / (2.0 * h);
      worst = std::max(worst,
                       relative_or_absolute_error(2.0 * analytic * scale, fd));
    }
    return worst;
  }

  const double r0 = rho_of(inst.rates, inst.params);
  const Eigen::VectorXd phi_t =
      inst.bank.features(server_action_state(inst.rates, inst.now));
  const Eigen::VectorXd phi_n =
      inst.bank.features(server_action_state(inst.rates, inst.next));
  const Eigen::VectorXd analytic = td_param_gradient(r0, phi_t, phi_n, gamma);
  for (int i = 0; i < inst.params.size(); ++i) {
    const double h = h_fd * std::max(1.0, std::abs(inst.params[i]));
    Eigen::VectorXd pp = inst.params, pm = inst.params;
    pp[i] += h;
    pm[i] -= h;
    const double dp = rho_of(inst.rates, pp);
    const double dm = rho_of(inst.rates, pm);
    const double fd = (dp * dp - dm * dm) / (2.0 * h);
    worst = std::max(worst, relative_or_absolute_error(2.0 * analytic[i], fd));
  }
  return worst;
}

TinyInstance make_tiny_instance() {
  TinyInstance tiny;
  SystemConfig cfg;
  cfg.num_wds = 1;
  cfg.slots_per_block = 1;
  cfg.arrival_prob = 0.3;
  cfg.f_max_wd = 5e10;  // half a task per block locally
  cfg.cap_wd = 3e-31;   // keeps single-slot compute energy O(1) joules
  cfg.w4 = 0.1;         // queue-dominated costs; energy stays a tiebreaker
  cfg.feature_dim = 30;
  tiny.config = cfg;
  tiny.mean_gain = 1000.0;

  const double w = cfg.task_cycles;
  tiny.queue_grid.resize(9);
  for (int i = 0; i < 9; ++i) tiny.queue_grid[i] = 0.25 * w * i;
  tiny.channel_grid << tiny.mean_gain / 2.0, 2.0 * tiny.mean_gain;

  // Power levels shipping sub-task remainders {0, 1/4, 1/2, 3/4, ~1} of a
  // task at the mean channel gain.
  tiny.power_grid.resize(5);
  const double targets[5] = {0.0, 0.25 * w, 0.5 * w, 0.75 * w, w - 1.0};
  for (int j = 0; j < 5; ++j)
    tiny.power_grid[j] = required_power(cfg.bits_per_cycle * targets[j],
                                        tiny.mean_gain, cfg);
  return tiny;
}

TinyInstance make_zero_cost_tiny() {
  TinyInstance tiny = make_tiny_instance();
  tiny.config.w1 = tiny.config.w2 = tiny.config.w3 = tiny.config.w4 = 0.0;
  return tiny;
}

TinyInstance::StepOutcome TinyInstance::step(int qi, int hi, int beta,
                                             double power_proposal) const {
  StepOutcome out;
  WdState state = make_wd_state(config);
  state.queue_cycles = queue_grid[qi];
  state.channel_gain = channel_grid[hi];
  state.arrivals[0] = beta;
  auto [p_exec, rates] = project_action(power_proposal, state, config);
  out.power_exec = p_exec;
  out.cpu_rates = rates;
  out.cost = wd_reward(state.queue_cycles, rates, p_exec, config);
  const double q_next =
      wd_queue_step(state.queue_cycles, rates, state.arrivals, config);
  // Snap to the nearest grid level; the top level saturates.
  const double step_size = queue_grid[1] - queue_grid[0];
  const double clamped =
      std::clamp(q_next, queue_grid[0], queue_grid[queue_grid.size() - 1]);
  out.next_qi = static_cast<int>(std::lround(clamped / step_size));
  return out;
}

TinyTables tiny_tables(const TinyInstance& tiny) {
  TinyTables tables;
  const int S = tiny.num_states();
  const int A = tiny.num_actions();
  tables.cost.resize(S, A);
  tables.next_qi.resize(S, A);
  for (int s = 0; s < S; ++s) {
    int qi, hi, beta;
    tiny.decode(s, qi, hi, beta);
    for (int a = 0; a < A; ++a) {
      const auto outcome = tiny.step(qi, hi, beta, tiny.power_grid[a]);
      tables.cost(s, a) = outcome.cost;
      tables.next_qi(s, a) = outcome.next_qi;
    }
  }
  return tables;
}

ValueIterationResult value_iteration_oracle(const TinyInstance& tiny,
                                            double tol, long max_sweeps) {
  const double gamma = tiny.config.discount;
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("value_iteration_oracle: discount outside [0, 1)");
  const TinyTables tables = tiny_tables(tiny);
  const int S = tiny.num_states();
  const int A = tiny.num_actions();
  const double b = tiny.config.arrival_prob;
  const double p_beta[2] = {1.0 - b, b};

  ValueIterationResult res;
  res.q = Eigen::MatrixXd::Zero(S, A);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(S);
  for (long sweep = 1; sweep <= max_sweeps; ++sweep) {
    Eigen::MatrixXd q_new(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const int qn = tables.next_qi(s, a);
        double future = 0.0;
        for (int hn = 0; hn < 2; ++hn)
          for (int bn = 0; bn < 2; ++bn)
            future += 0.5 * p_beta[bn] * value[tiny.encode(qn, hn, bn)];
        q_new(s, a) = tables.cost(s, a) + gamma * future;
      }
    }
    res.sup_delta = (q_new - res.q).cwiseAbs().maxCoeff();
    res.q = std::move(q_new);
    for (int s = 0; s < S; ++s) value[s] = res.q.row(s).minCoeff();
    res.sweeps = sweep;
    if (res.sup_delta <= tol) return res;
  }
  throw std::runtime_error(
      "value_iteration_oracle: no convergence (check the discount factor)");
}

double bellman_residual(const std::function<double(int, int)>& evaluator,
                        const TinyInstance& tiny, int sample_count,
                        RngStream& rng) {
  if (sample_count < 1)
    throw std::invalid_argument("bellman_residual: sample_count < 1");
  const TinyTables tables = tiny_tables(tiny);
  const double gamma = tiny.config.discount;
  const int S = tiny.num_states();
  const int A = tiny.num_actions();
  const double b = tiny.config.arrival_prob;
  const double p_beta[2] = {1.0 - b, b};

  double acc = 0.0;
  for (int i = 0; i < sample_count; ++i) {
    const int s = static_cast<int>(rng.next_u64() % S);
    const int a = static_cast<int>(rng.next_u64() % A);
    const int qn = tables.next_qi(s, a);
    double future = 0.0;
    for (int hn = 0; hn < 2; ++hn) {
      for (int bn = 0; bn < 2; ++bn) {
        const int sn = tiny.encode(qn, hn, bn);
        double best = evaluator(sn, 0);
        for (int an = 1; an < A; ++an) best = std::min(best, evaluator(sn, an));
        future += 0.5 * p_beta[bn] * best;
      }
    }
    const double residual = tables.cost(s, a) + gamma * future - evaluator(s, a);
    acc += residual * residual;
  }
  return acc / sample_count;
}

WdLearner train_wd_on_tiny(const TinyInstance& tiny, std::uint64_t seed,
                           long blocks, StepSchedule schedule) {
  const SystemConfig& cfg = tiny.config;
  RngStream env_rng(derive_stream_id(seed, StreamKind::misc, 1));
  RngStream explore_rng(derive_stream_id(seed, StreamKind::wd_policy));
  WdLearner learner = make_wd_learner(
      cfg, tiny.mean_gain, derive_stream_id(seed, StreamKind::wd_bank),
      tiny.power_grid[tiny.num_actions() - 1], schedule, 1e-3);
  // Proposal jitter spanning the action grid, so the fitted values are
  // trustworthy at every grid power rather than only along the descent path.
  const double jitter = tiny.power_grid[tiny.num_actions() - 1] / 2.0;

  int qi = 0;
  int hi = static_cast<int>(env_rng.next_u64() % 2);
  int beta = env_rng.bernoulli(cfg.arrival_prob) ? 1 : 0;
  for (long t = 0; t < blocks && !learner.diverged; ++t) {
    const double proposal =
        std::max(0.0, learner.power + jitter * explore_rng.normal());
    const auto outcome = tiny.step(qi, hi, beta, proposal);
    WdState now = make_wd_state(cfg);
    now.queue_cycles = tiny.queue_grid[qi];
    now.channel_gain = tiny.channel_grid[hi];
    now.arrivals[0] = beta;
    now.power = outcome.power_exec;
    now.cpu_rates = outcome.cpu_rates;

    const int hi_next = static_cast<int>(env_rng.next_u64() % 2);
    const int beta_next = env_rng.bernoulli(cfg.arrival_prob) ? 1 : 0;
    WdState next = make_wd_state(cfg);
    next.queue_cycles = tiny.queue_grid[outcome.next_qi];
    next.channel_gain = tiny.channel_grid[hi_next];
    next.arrivals[0] = beta_next;

    algorithm1_block(learner, now, next, cfg);
    qi = outcome.next_qi;
    hi = hi_next;
    beta = beta_next;
  }
  return learner;
}

int tiny_greedy_action(const WdLearner& learner, const TinyInstance& tiny,
                       int state) {
  int qi, hi, beta;
  tiny.decode(state, qi, hi, beta);
  WdState s = make_wd_state(tiny.config);
  s.queue_cycles = tiny.queue_grid[qi];
  s.channel_gain = tiny.channel_grid[hi];
  s.arrivals[0] = beta;
  int best_a = 0;
  double best_q = std::numeric_limits<double>::infinity();
  for (int a = 0; a < tiny.num_actions(); ++a) {
    const Eigen::VectorXd phi =
        learner.bank.features(wd_action_state(tiny.power_grid[a], s));
    const double q = q_value(learner.params, phi);
    if (q < best_q) {
      best_q = q;
      best_a = a;
    }
  }
  return best_a;
}

double tiny_rollout_learner(const TinyInstance& tiny, WdLearner learner,
                            long blocks, RngStream& rng, int start_qi) {
  const SystemConfig& cfg = tiny.config;
  const double gamma = cfg.discount;
  int qi = start_qi;
  int hi = static_cast<int>(rng.next_u64() % 2);
  int beta = rng.bernoulli(cfg.arrival_prob) ? 1 : 0;
  double acc = 0.0;
  double weight = 1.0;
  for (long t = 0; t < blocks && !learner.diverged; ++t) {
    const auto outcome = tiny.step(qi, hi, beta, learner.power);
    acc += weight * outcome.cost;
    weight *= gamma;

    WdState now = make_wd_state(cfg);
    now.queue_cycles = tiny.queue_grid[qi];
    now.channel_gain = tiny.channel_grid[hi];
    now.arrivals[0] = beta;
    now.power = outcome.power_exec;
    now.cpu_rates = outcome.cpu_rates;
    const int hi_next = static_cast<int>(rng.next_u64() % 2);
    const int beta_next = rng.bernoulli(cfg.arrival_prob) ? 1 : 0;
    WdState next = make_wd_state(cfg);
    next.queue_cycles = tiny.queue_grid[outcome.next_qi];
    next.channel_gain = tiny.channel_grid[hi_next];
    next.arrivals[0] = beta_next;
    algorithm1_block(learner, now, next, cfg);

    qi = outcome.next_qi;
    hi = hi_next;
    beta = beta_next;
  }
  return acc;
}

double tiny_rollout_discounted(const TinyInstance& tiny,
                               const std::function<int(int)>& policy_action,
                               long blocks, RngStream& rng, int start_qi) {
  const double gamma = tiny.config.discount;
  int qi = start_qi;
  int hi = static_cast<int>(rng.next_u64() % 2);
  int beta = rng.bernoulli(tiny.config.arrival_prob) ? 1 : 0;
  double acc = 0.0;
  double weight = 1.0;
  for (long t = 0; t < blocks; ++t) {
    const int s = tiny.encode(qi, hi, beta);
    const int a = policy_action(s);
    const auto outcome = tiny.step(qi, hi, beta, tiny.power_grid[a]);
    acc += weight * outcome.cost;
    weight *= gamma;
    qi = outcome.next_qi;
    hi = static_cast<int>(rng.next_u64() % 2);
    beta = rng.bernoulli(tiny.config.arrival_prob) ? 1 : 0;
  }
  return acc;
}

}  // namespace mecsim
