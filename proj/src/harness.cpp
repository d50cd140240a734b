#include "mecsim/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mecsim {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  system.validate();
  if (horizon_blocks < 1)
    throw std::invalid_argument("experiment: horizon_blocks must be >= 1");
  if (rho_even < 0.0 || rho_even > 1.0)
    throw std::invalid_argument("experiment: rho_even must lie in [0, 1]");
  if (p_init_w < 0.0)
    throw std::invalid_argument("experiment: p_init_w must be >= 0");
  if (initial_queue_tasks < 0.0)
    throw std::invalid_argument("experiment: initial_queue_tasks must be >= 0");
  if (epsilon <= 0.0)
    throw std::invalid_argument("experiment: epsilon must be > 0");
  if (schedule.alpha0 <= 0.0 || schedule.tau0 <= 0.0)
    throw std::invalid_argument("experiment: step schedule must be positive");
  if (fixed_rate_frac < 0.0 || fixed_rate_frac > 1.0)
    throw std::invalid_argument("experiment: fixed_rate_frac must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"system", c.system},
                     {"policy", to_string(c.policy)},
                     {"horizon_blocks", c.horizon_blocks},
                     {"master_seed", c.master_seed},
                     {"rho_even", c.rho_even},
                     {"binary_power_cap_w", c.binary_power_cap_w},
                     {"p_init_w", c.p_init_w},
                     {"initial_queue_tasks", c.initial_queue_tasks},
                     {"alpha0", c.schedule.alpha0},
                     {"tau0", c.schedule.tau0},
                     {"epsilon", c.epsilon},
                     {"action_jitter_std", c.action_jitter_std},
                     {"fixed_rate_server", c.fixed_rate_server},
                     {"fixed_rate_frac", c.fixed_rate_frac}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::set<std::string> known = {
      "system",        "policy",        "horizon_blocks",
      "master_seed",   "rho_even",      "binary_power_cap_w",
      "p_init_w",      "initial_queue_tasks", "alpha0",
      "tau0",          "epsilon",       "action_jitter_std",
      "fixed_rate_server", "fixed_rate_frac"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw std::invalid_argument("experiment: unknown field '" + it.key() + "'");
  }
  c = ExperimentConfig{};
  if (j.contains("system")) j.at("system").get_to(c.system);
  if (j.contains("policy"))
    c.policy = policy_from_string(j.at("policy").get<std::string>());
  if (j.contains("horizon_blocks")) j.at("horizon_blocks").get_to(c.horizon_blocks);
  if (j.contains("master_seed")) j.at("master_seed").get_to(c.master_seed);
  if (j.contains("rho_even")) j.at("rho_even").get_to(c.rho_even);
  if (j.contains("binary_power_cap_w")) j.at("binary_power_cap_w").get_to(c.binary_power_cap_w);
  if (j.contains("p_init_w")) j.at("p_init_w").get_to(c.p_init_w);
  if (j.contains("initial_queue_tasks")) j.at("initial_queue_tasks").get_to(c.initial_queue_tasks);
  if (j.contains("alpha0")) j.at("alpha0").get_to(c.schedule.alpha0);
  if (j.contains("tau0")) j.at("tau0").get_to(c.schedule.tau0);
  if (j.contains("epsilon")) j.at("epsilon").get_to(c.epsilon);
  if (j.contains("action_jitter_std")) j.at("action_jitter_std").get_to(c.action_jitter_std);
  if (j.contains("fixed_rate_server")) j.at("fixed_rate_server").get_to(c.fixed_rate_server);
  if (j.contains("fixed_rate_frac")) j.at("fixed_rate_frac").get_to(c.fixed_rate_frac);
  c.validate();
}

ExperimentConfig experiment_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("experiment: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j.get<ExperimentConfig>();
}

double discounted_sum(const std::vector<double>& costs, double gamma) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("discounted_sum: gamma must lie in (0, 1)");
  double acc = 0.0;
  double weight = 1.0;
  for (double c : costs) {
    acc += weight * c;
    weight *= gamma;
  }
  return acc;
}

std::uint64_t episode_seed_for(std::uint64_t sweep_master, int seed_index) {
  return derive_stream_id(sweep_master, StreamKind::sweep_cell,
                          static_cast<std::uint64_t>(seed_index));
}

EpisodeTrace run_episode(const ExperimentConfig& config) {
  config.validate();
  const SystemConfig& sys = config.system;
  const int K = sys.num_wds;
  const int n = sys.slots_per_block;
  const long T = config.horizon_blocks;
  const double gamma = sys.discount;
  const std::uint64_t master = config.master_seed;

  EpisodeTrace trace;
  trace.wd_rows.reserve(static_cast<size_t>(T) * K);
  trace.system_rows.reserve(static_cast<size_t>(T));

  auto ledger = [&trace](const std::string& name, std::uint64_t id) {
    trace.seed_ledger_names.push_back(name);
    trace.seed_ledger_ids.push_back(id);
    return id;
  };

  std::vector<RngStream> arrival_streams, channel_streams, policy_streams;
  std::vector<double> mean_gain(K);
  for (int k = 0; k < K; ++k) {
    arrival_streams.emplace_back(ledger(
        "wd" + std::to_string(k) + ".arrivals",
        derive_stream_id(master, StreamKind::wd_arrivals, k)));
    channel_streams.emplace_back(ledger(
        "wd" + std::to_string(k) + ".channel",
        derive_stream_id(master, StreamKind::wd_channel, k)));
    policy_streams.emplace_back(ledger(
        "wd" + std::to_string(k) + ".policy",
        derive_stream_id(master, StreamKind::wd_policy, k)));
    RngStream placement(ledger("wd" + std::to_string(k) + ".placement",
                               derive_stream_id(master, StreamKind::wd_placement, k)));
    RngStream shadow(ledger("wd" + std::to_string(k) + ".shadow",
                            derive_stream_id(master, StreamKind::wd_shadow, k)));
    // Uniform over the disk, at least one meter out.
    const double d = std::max(1.0, sys.cell_radius_m * std::sqrt(placement.uniform01()));
    const double s_db = sys.shadow_std_db * shadow.normal();
    trace.wd_distance_m.push_back(d);
    trace.wd_shadow_db.push_back(s_db);
    mean_gain[k] = mean_channel_gain(d, s_db, sys);
    trace.wd_mean_gain.push_back(mean_gain[k]);
  }

  std::vector<WdLearner> learners;
  if (config.policy == PolicyKind::proposed) {
    for (int k = 0; k < K; ++k) {
      learners.push_back(make_wd_learner(
          sys, mean_gain[k],
          ledger("wd" + std::to_string(k) + ".bank",
                 derive_stream_id(master, StreamKind::wd_bank, k)),
          config.p_init_w, config.schedule, config.epsilon));
    }
  }
  ServerLearner server = make_server_learner(
      sys, ledger("server.bank", derive_stream_id(master, StreamKind::server_bank)),
      config.schedule, config.epsilon);
  if (config.fixed_rate_server)
    server.cpu_rates.setConstant(config.fixed_rate_frac * sys.f_max_ser);

  std::vector<double> q_wd(K, config.initial_queue_tasks * sys.task_cycles);
  double q_ser = 0.0;

  std::vector<WdState> exec_prev;  // executed states of the previous block
  bool have_prev = false;
  bool diverged = false;

  double disc = 0.0;
  double gamma_pow = 1.0;
  double cost_max = 0.0;

  for (long t = 0; t < T && !diverged; ++t) {
    // (i) draws for this block
    std::vector<Eigen::VectorXd> beta(K);
    std::vector<double> h(K);
    for (int k = 0; k < K; ++k) {
      beta[k] = sample_arrivals(arrival_streams[k], sys.arrival_prob, n);
      h[k] = sample_channel(channel_streams[k], mean_gain[k]);
    }

    // (ii) finish the previous block's device updates now that the new
    // state realization is known; this also advances the power proposals.
    if (config.policy == PolicyKind::proposed && have_prev) {
      for (int k = 0; k < K; ++k) {
        WdState next_view = exec_prev[k];
        next_view.queue_cycles = q_wd[k];
        next_view.channel_gain = h[k];
        next_view.arrivals = beta[k];
        const WdBlockResult res =
            algorithm1_block(learners[k], exec_prev[k], next_view, sys);
        WdBlockRow& row = trace.wd_rows[(t - 1) * K + k];
        row.td_err = res.delta;
        row.grad_norm = std::sqrt(res.grad_sq_norm);
        row.grad_sq_norm = res.grad_sq_norm;
        row.theta_rel_change = res.rel_change;
        if (learners[k].diverged) diverged = true;
      }
    }

    // (iii) device decisions
    std::vector<WdState> exec(K);
    Eigen::VectorXd offload_cycles = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd wd_energy(K);
    std::vector<double> e_wd(K), e_off(K);
    for (int k = 0; k < K; ++k) {
      WdState state = make_wd_state(sys);
      state.queue_cycles = q_wd[k];
      state.channel_gain = h[k];
      state.arrivals = beta[k];
      if (config.policy == PolicyKind::proposed) {
        double proposal = learners[k].power;
        if (config.action_jitter_std > 0.0)
          proposal = std::max(
              0.0, proposal + config.action_jitter_std * policy_streams[k].normal());
        auto [p_exec, rates] = project_action(proposal, state, sys);
        state.power = p_exec;
        state.cpu_rates = rates;
        // Shipped remainder, computed exactly as the queue step sees it.
        const double remaining =
            std::max(state.queue_cycles - served_cycles(rates, sys), 0.0);
        offload_cycles[k] = std::fmod(remaining, sys.task_cycles);
      } else {
        WdAction action;
        switch (config.policy) {
          case PolicyKind::binary:
            action = binary_offload_decide(state, sys, config.binary_power_cap_w);
            break;
          case PolicyKind::even:
            action = even_allocation_decide(state, sys, config.rho_even);
            break;
          default:
            action = random_offload_decide(state, sys, policy_streams[k]);
            break;
        }
        state.power = action.power;
        state.cpu_rates = action.cpu_rates;
        offload_cycles[k] = action.offload_cycles;
      }
      e_wd[k] = local_energy(state.cpu_rates, sys);
      e_off[k] = offload_energy(state.power, sys);
      wd_energy[k] = e_wd[k] + e_off[k];
      exec[k] = state;
    }

    // (iv) stage costs at the start-of-block state
    ServerState server_state = make_server_state(sys);
    server_state.queue_cycles = q_ser;
    for (int k = 0; k < K; ++k) server_state.wd_queues[k] = q_wd[k];
    server_state.cpu_rates = server.cpu_rates;
    const StageCosts costs =
        stage_costs(server_state, exec, wd_energy,
                    server_energy(server_state.cpu_rates, sys), sys);
    cost_max = std::max(cost_max, costs.total);

    for (int k = 0; k < K; ++k) {
      WdBlockRow row;
      row.block = t;
      row.wd_id = k;
      row.cost = costs.wd[k];
      row.e_wd = e_wd[k];
      row.e_off = e_off[k];
      row.q_wd = q_wd[k];
      row.channel_gain = h[k];
      trace.wd_rows.push_back(row);
    }

    // (v) queue evolution
    for (int k = 0; k < K; ++k) {
      if (config.policy == PolicyKind::proposed)
        q_wd[k] = wd_queue_step(q_wd[k], exec[k].cpu_rates, beta[k], sys);
      else
        q_wd[k] = wd_queue_step_explicit(q_wd[k], exec[k].cpu_rates,
                                         offload_cycles[k], beta[k], sys);
    }
    q_ser = server_queue_step(server_state.queue_cycles, server_state.cpu_rates,
                              offload_cycles, sys);

    // (vi) server update over the realized queue transition
    SystemBlockRow srow;
    srow.block = t;
    srow.cost_ser = costs.server;
    srow.e_ser = server_energy(server_state.cpu_rates, sys);
    srow.q_ser = server_state.queue_cycles;
    srow.cost_total = costs.total;
    if (!config.fixed_rate_server) {
      ServerState next_state = make_server_state(sys);
      next_state.queue_cycles = q_ser;
      for (int k = 0; k < K; ++k) next_state.wd_queues[k] = q_wd[k];
      const ServerBlockResult res =
          algorithm2_block(server, server_state, next_state, sys);
      srow.rho = res.rho;
      srow.grad_norm = std::sqrt(res.grad_sq_norm);
      srow.grad_sq_norm = res.grad_sq_norm;
      srow.eta_rel_change = res.rel_change;
      if (server.diverged) diverged = true;
    }

    disc += gamma_pow * costs.total;
    gamma_pow *= gamma;
    srow.discounted_cum = disc;
    trace.system_rows.push_back(srow);

    exec_prev = std::move(exec);
    have_prev = true;
  }

  trace.status = diverged ? "diverged" : "ok";
  trace.discounted_sum = disc;
  trace.tail_bound = gamma_pow * cost_max / (1.0 - gamma);
  for (int k = 0; k < K; ++k)
    trace.wd_converged_block.push_back(
        config.policy == PolicyKind::proposed ? learners[k].converged_block : -1);
  trace.server_converged_block =
      config.fixed_rate_server ? -1 : server.converged_block;
  return trace;
}

std::vector<SweepCell> sweep(const ExperimentConfig& base,
                             const std::string& axis,
                             const std::vector<double>& values, int seeds,
                             int jobs) {
  if (axis != "b" && axis != "K")
    throw std::invalid_argument("sweep: axis must be 'b' or 'K'");
  if (values.size() < 2) throw std::invalid_argument("sweep: need >= 2 axis values");
  if (seeds < 3) throw std::invalid_argument("sweep: need >= 3 seeds per cell");

  const std::vector<PolicyKind> policies = {PolicyKind::proposed, PolicyKind::binary,
                                            PolicyKind::even, PolicyKind::random};
  struct Task {
    size_t cell;
    int seed_index;
    ExperimentConfig config;
  };
  std::vector<SweepCell> cells;
  std::vector<Task> tasks;
  for (double v : values) {
    for (PolicyKind p : policies) {
      SweepCell cell;
      cell.axis = axis;
      cell.value = v;
      cell.policy = p;
      cell.sums.assign(seeds, std::numeric_limits<double>::quiet_NaN());
      cell.statuses.assign(seeds, "");
      const size_t idx = cells.size();
      cells.push_back(cell);
      for (int s = 0; s < seeds; ++s) {
        ExperimentConfig cfg = base;
        if (axis == "b")
          cfg.system.arrival_prob = v;
        else
          cfg.system.num_wds = static_cast<int>(v);
        cfg.policy = p;
        cfg.master_seed = episode_seed_for(base.master_seed, s);
        tasks.push_back(Task{idx, s, std::move(cfg)});
      }
    }
  }

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      SweepCell& cell = cells[task.cell];
      try {
        const EpisodeTrace trace = run_episode(task.config);
        cell.statuses[task.seed_index] = trace.status;
        if (trace.status == "ok")
          cell.sums[task.seed_index] = trace.discounted_sum;
      } catch (const std::exception& e) {
        cell.statuses[task.seed_index] = std::string("error: ") + e.what();
      }
    }
  };
  const int workers = std::max(1, jobs);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (SweepCell& cell : cells) {
    double sum = 0.0;
    int count = 0;
    for (double s : cell.sums)
      if (std::isfinite(s)) {
        sum += s;
        ++count;
      }
    cell.mean = count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
    double var = 0.0;
    for (double s : cell.sums)
      if (std::isfinite(s)) var += (s - cell.mean) * (s - cell.mean);
    cell.stddev = count > 1 ? std::sqrt(var / (count - 1)) : 0.0;
    cell.ci95_halfwidth =
        count > 1 ? 1.96 * cell.stddev / std::sqrt(static_cast<double>(count)) : 0.0;
  }
  return cells;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
  }
  fs::rename(tmp, target);
}

namespace {

std::string trace_header(const EpisodeTrace& trace, const ExperimentConfig& config) {
  nlohmann::json cfg = config;
  std::ostringstream os;
  os << "# mecsim trace v1\n";
  os << "# config: " << cfg.dump() << "\n";
  os << "# seeds:";
  for (size_t i = 0; i < trace.seed_ledger_names.size(); ++i)
    os << (i ? "," : " ") << trace.seed_ledger_names[i] << "="
       << trace.seed_ledger_ids[i];
  os << "\n# status: " << trace.status << "\n";
  return os.str();
}

}  // namespace

std::string wd_csv_text(const EpisodeTrace& trace, const ExperimentConfig& config) {
  std::ostringstream os;
  os << trace_header(trace, config);
  os << "block,wd_id,cost,e_wd,e_off,q_wd,td_err,grad_norm,theta_rel_change\n";
  for (const WdBlockRow& r : trace.wd_rows) {
    os << r.block << ',' << r.wd_id << ',' << fmt_double(r.cost) << ','
       << fmt_double(r.e_wd) << ',' << fmt_double(r.e_off) << ','
       << fmt_double(r.q_wd) << ',' << fmt_double(r.td_err) << ','
       << fmt_double(r.grad_norm) << ',' << fmt_double(r.theta_rel_change)
       << '\n';
  }
  return os.str();
}

std::string system_csv_text(const EpisodeTrace& trace,
                            const ExperimentConfig& config) {
  std::ostringstream os;
  os << trace_header(trace, config);
  os << "block,cost_ser,e_ser,q_ser,rho,grad_norm,eta_rel_change,cost_total,"
        "discounted_cum\n";
  for (const SystemBlockRow& r : trace.system_rows) {
    os << r.block << ',' << fmt_double(r.cost_ser) << ',' << fmt_double(r.e_ser)
       << ',' << fmt_double(r.q_ser) << ',' << fmt_double(r.rho) << ','
       << fmt_double(r.grad_norm) << ',' << fmt_double(r.eta_rel_change) << ','
       << fmt_double(r.cost_total) << ',' << fmt_double(r.discounted_cum)
       << '\n';
  }
  return os.str();
}

nlohmann::json episode_summary(const EpisodeTrace& trace,
                               const ExperimentConfig& config) {
  nlohmann::json seeds = nlohmann::json::object();
  for (size_t i = 0; i < trace.seed_ledger_names.size(); ++i)
    seeds[trace.seed_ledger_names[i]] = trace.seed_ledger_ids[i];
  return nlohmann::json{
      {"config", config},
      {"status", trace.status},
      {"blocks", trace.system_rows.size()},
      {"discounted_sum", trace.discounted_sum},
      {"discount_tail_bound", trace.tail_bound},
      {"wd_converged_block", trace.wd_converged_block},
      {"server_converged_block", trace.server_converged_block},
      {"wd_distance_m", trace.wd_distance_m},
      {"wd_shadow_db", trace.wd_shadow_db},
      {"wd_mean_gain", trace.wd_mean_gain},
      {"seed_ledger", seeds},
  };
}

void write_episode_outputs(const EpisodeTrace& trace,
                           const ExperimentConfig& config,
                           const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_file_atomic((fs::path(out_dir) / "wd_metrics.csv").string(),
                    wd_csv_text(trace, config));
  write_file_atomic((fs::path(out_dir) / "system_metrics.csv").string(),
                    system_csv_text(trace, config));
  write_file_atomic((fs::path(out_dir) / "summary.json").string(),
                    episode_summary(trace, config).dump(2) + "\n");
}

std::string sweep_summary_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  os << "axis,value,policy,seeds_ok,mean_discounted,std_discounted,ci95_halfwidth\n";
  for (const SweepCell& c : cells) {
    int ok = 0;
    for (double s : c.sums)
      if (std::isfinite(s)) ++ok;
    os << c.axis << ',' << fmt_double(c.value) << ',' << to_string(c.policy)
       << ',' << ok << ',' << fmt_double(c.mean) << ',' << fmt_double(c.stddev)
       << ',' << fmt_double(c.ci95_halfwidth) << '\n';
  }
  return os.str();
}

std::string sweep_raw_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  os << "axis,value,policy,seed_index,discounted_sum,status\n";
  for (const SweepCell& c : cells) {
    for (size_t s = 0; s < c.sums.size(); ++s) {
      os << c.axis << ',' << fmt_double(c.value) << ',' << to_string(c.policy)
         << ',' << s << ',' << fmt_double(c.sums[s]) << ',' << c.statuses[s]
         << '\n';
    }
  }
  return os.str();
}

}  // namespace mecsim
