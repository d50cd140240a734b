// mecsim command-line front end.
//
// Subcommands:
//   run            one seeded episode -> wd_metrics.csv, system_metrics.csv, summary.json
//   sweep          policies x axis values x seeds -> sweep_raw.csv, sweep_summary.csv
//   gradcheck      analytic gradients vs finite differences -> JSON report
//   oracle-compare learned device policy vs exact dynamic-programming oracle
//   plotdata       two-column series extracted from run/sweep outputs
//
// Exit codes: 0 ok, 1 usage/config error, 2 verification failure,
// 3 learner divergence.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mecsim/diagnostics.hpp"
#include "mecsim/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerification = 2;
constexpr int kExitDivergence = 3;

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    mecsim::write_file_atomic(out_path, text);
  }
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  CsvTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) fields.push_back(cell);
    if (table.columns.empty())
      table.columns = fields;
    else
      table.rows.push_back(fields);
  }
  if (table.columns.empty())
    throw std::runtime_error("trace '" + path + "' has no header row");
  return table;
}

int column_index(const CsvTable& table, const std::string& name) {
  const auto it = std::find(table.columns.begin(), table.columns.end(), name);
  if (it == table.columns.end())
    throw std::runtime_error("trace is missing column '" + name + "'");
  return static_cast<int>(it - table.columns.begin());
}

int run_command(const std::string& config_path, const std::string& policy,
                long seed, bool seed_set, const std::string& out_dir) {
  mecsim::ExperimentConfig config = mecsim::experiment_config_from_file(config_path);
  if (!policy.empty()) config.policy = mecsim::policy_from_string(policy);
  if (seed_set) config.master_seed = static_cast<std::uint64_t>(seed);
  const mecsim::EpisodeTrace trace = mecsim::run_episode(config);
  mecsim::write_episode_outputs(trace, config, out_dir);
  std::cout << "status=" << trace.status
            << " blocks=" << trace.system_rows.size()
            << " discounted_sum=" << trace.discounted_sum << "\n";
  return trace.status == "ok" ? kExitOk : kExitDivergence;
}

int sweep_command(const std::string& config_path, const std::string& axis,
                  const std::string& values_csv, int seeds, int jobs,
                  const std::string& out_dir) {
  mecsim::ExperimentConfig base = mecsim::experiment_config_from_file(config_path);
  const std::vector<double> values = parse_values(values_csv);
  const auto cells = mecsim::sweep(base, axis, values, seeds, jobs);
  fs::create_directories(out_dir);

  json cfg_echo = base;
  std::ostringstream header;
  header << "# mecsim sweep v1\n# config: " << cfg_echo.dump()
         << "\n# axis: " << axis << "\n# seeds: " << seeds
         << "\n# episode_seeds:";
  for (int s = 0; s < seeds; ++s)
    header << (s ? "," : " ") << "s" << s << "="
           << mecsim::episode_seed_for(base.master_seed, s);
  header << "\n";
  mecsim::write_file_atomic((fs::path(out_dir) / "sweep_summary.csv").string(),
                            header.str() + mecsim::sweep_summary_csv(cells));
  mecsim::write_file_atomic((fs::path(out_dir) / "sweep_raw.csv").string(),
                            header.str() + mecsim::sweep_raw_csv(cells));
  bool any_error = false;
  for (const auto& cell : cells)
    for (const auto& status : cell.statuses)
      if (status != "ok") any_error = true;
  std::cout << "cells=" << cells.size() << " out=" << out_dir << "\n";
  return any_error ? kExitDivergence : kExitOk;
}

int gradcheck_command(int trials, const std::string& out_path) {
  mecsim::RngStream rng(0xC0FFEEull);
  const std::map<std::string, mecsim::GradTarget> targets = {
      {"wd_power", mecsim::GradTarget::wd_power},
      {"wd_params", mecsim::GradTarget::wd_params},
      {"server_rate", mecsim::GradTarget::server_rate},
      {"server_params", mecsim::GradTarget::server_params},
  };
  json report;
  bool ok = true;
  for (const auto& [name, target] : targets) {
    double worst = 0.0;
    for (int i = 0; i < trials; ++i)
      worst = std::max(worst, mecsim::finite_diff_check(target, rng));
    report[name] = {{"trials", trials}, {"max_rel_err", worst}};
    if (worst > 1e-5) ok = false;
  }
  report["pass"] = ok;
  report["threshold"] = 1e-5;
  emit(out_path, report.dump(2) + "\n");
  return ok ? kExitOk : kExitVerification;
}

int oracle_compare_command(int seeds, const std::string& out_path) {
  const mecsim::TinyInstance tiny = mecsim::make_tiny_instance();
  const auto vi = mecsim::value_iteration_oracle(tiny);
  auto oracle_policy = [&](int s) {
    int best = 0;
    vi.q.row(s).minCoeff(&best);
    return best;
  };

  json report;
  report["value_iteration"] = {{"sweeps", vi.sweeps}, {"sup_delta", vi.sup_delta}};

  const int start_qi = 4;  // one full task queued
  std::vector<double> oracle_costs, learned_costs;
  int residual_improved = 0;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = mecsim::episode_seed_for(1234, s);
    mecsim::WdLearner learner = mecsim::train_wd_on_tiny(tiny, seed, 10000);

    mecsim::RngStream roll_a(mecsim::derive_stream_id(seed, mecsim::StreamKind::misc, 7));
    mecsim::RngStream roll_b(mecsim::derive_stream_id(seed, mecsim::StreamKind::misc, 7));
    oracle_costs.push_back(
        mecsim::tiny_rollout_discounted(tiny, oracle_policy, 10000, roll_a, start_qi));
    learned_costs.push_back(
        mecsim::tiny_rollout_learner(tiny, learner, 10000, roll_b, start_qi));

    mecsim::RngStream res_rng(mecsim::derive_stream_id(seed, mecsim::StreamKind::misc, 8));
    mecsim::RngStream res_rng2(res_rng);
    auto learned_eval = [&](int st, int a) {
      int qi, hi, beta;
      tiny.decode(st, qi, hi, beta);
      mecsim::WdState ws = mecsim::make_wd_state(tiny.config);
      ws.queue_cycles = tiny.queue_grid[qi];
      ws.channel_gain = tiny.channel_grid[hi];
      ws.arrivals[0] = beta;
      return mecsim::q_value(
          learner.params,
          learner.bank.features(mecsim::wd_action_state(tiny.power_grid[a], ws)));
    };
    const double res_trained = mecsim::bellman_residual(learned_eval, tiny, 2000, res_rng);
    const double res_untrained = mecsim::bellman_residual(
        [](int, int) { return 0.0; }, tiny, 2000, res_rng2);
    if (res_trained < res_untrained) ++residual_improved;
  }

  const double oracle_mean =
      std::accumulate(oracle_costs.begin(), oracle_costs.end(), 0.0) / seeds;
  const double learned_mean =
      std::accumulate(learned_costs.begin(), learned_costs.end(), 0.0) / seeds;
  const double gap = std::abs(learned_mean - oracle_mean) / oracle_mean;
  const bool ok = gap <= 0.15 && residual_improved * 10 >= seeds * 9;

  report["oracle_mean_discounted"] = oracle_mean;
  report["learned_mean_discounted"] = learned_mean;
  report["relative_gap"] = gap;
  report["residual_improved_seeds"] = residual_improved;
  report["seeds"] = seeds;
  report["pass"] = ok;
  emit(out_path, report.dump(2) + "\n");
  return ok ? kExitOk : kExitVerification;
}

int plotdata_command(const std::string& trace_path, const std::string& figure,
                     const std::string& out_path) {
  const CsvTable table = read_csv(trace_path);
  std::ostringstream os;

  if (figure == "conv") {
    // Per-block relative parameter change (mean over devices when the trace
    // has per-device rows).
    const int bcol = column_index(table, "block");
    const bool wd = std::count(table.columns.begin(), table.columns.end(),
                               std::string("theta_rel_change")) > 0;
    const int vcol = column_index(table, wd ? "theta_rel_change" : "eta_rel_change");
    std::map<long, std::pair<double, int>> acc;
    for (const auto& row : table.rows) {
      const double v = std::stod(row[vcol]);
      if (!std::isfinite(v)) continue;
      auto& slot = acc[std::stol(row[bcol])];
      slot.first += v;
      slot.second += 1;
    }
    os << "block,rel_change\n";
    for (const auto& [block, slot] : acc)
      os << block << ',' << slot.first / slot.second << '\n';
  } else if (figure == "per-block") {
    const int bcol = column_index(table, "block");
    const int ccol = column_index(table, "cost_total");
    os << "block,cost_raw,cost_ma100\n";
    std::vector<double> costs;
    for (const auto& row : table.rows) costs.push_back(std::stod(row[ccol]));
    double window_sum = 0.0;
    for (size_t i = 0; i < table.rows.size(); ++i) {
      window_sum += costs[i];
      if (i >= 100) window_sum -= costs[i - 100];
      const double ma = window_sum / std::min<size_t>(i + 1, 100);
      os << table.rows[i][bcol] << ',' << costs[i] << ',' << ma << '\n';
    }
  } else if (figure == "vs-b" || figure == "vs-K") {
    const std::string want_axis = figure == "vs-b" ? "b" : "K";
    const int acol = column_index(table, "axis");
    const int vcol = column_index(table, "value");
    const int pcol = column_index(table, "policy");
    const int mcol = column_index(table, "mean_discounted");
    os << "value,policy,mean_discounted\n";
    for (const auto& row : table.rows) {
      if (row[acol] != want_axis) continue;
      os << row[vcol] << ',' << row[pcol] << ',' << row[mcol] << '\n';
    }
  } else {
    std::cerr << "unknown figure '" << figure << "'\n";
    return kExitUsage;
  }
  emit(out_path, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiuser edge-offloading simulator with online Q-learning"};
  app.require_subcommand(1);

  std::string config_path, policy, out_dir = "out", out_path, axis = "b";
  std::string values_csv = "0.2,0.4,0.6", trace_path, figure = "conv";
  long seed = 0;
  int seeds = 5, jobs = 1, trials = 100;

  auto* run = app.add_subcommand("run", "run one seeded episode");
  run->add_option("--config", config_path, "experiment JSON")->required();
  run->add_option("--policy", policy, "proposed|binary|even|random");
  auto* seed_opt = run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out_dir, "output directory");

  auto* sw = app.add_subcommand("sweep", "sweep an axis over all policies");
  sw->add_option("--config", config_path, "experiment JSON")->required();
  sw->add_option("--axis", axis, "b|K")->required();
  sw->add_option("--values", values_csv, "comma-separated axis values")->required();
  sw->add_option("--seeds", seeds, "seeds per cell");
  sw->add_option("--jobs", jobs, "worker threads");
  sw->add_option("--out", out_dir, "output directory");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--trials", trials, "instances per gradient target");
  gc->add_option("--out", out_path, "report file (default stdout)");

  auto* oc = app.add_subcommand("oracle-compare",
                                "learned policy vs value-iteration oracle");
  oc->add_option("--seeds", seeds, "training seeds");
  oc->add_option("--out", out_path, "report file (default stdout)");

  auto* pd = app.add_subcommand("plotdata", "extract plot-ready series");
  pd->add_option("--trace", trace_path, "run/sweep CSV")->required();
  pd->add_option("--figure", figure, "conv|per-block|vs-b|vs-K")->required();
  pd->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed())
      return run_command(config_path, policy, seed, seed_opt->count() > 0, out_dir);
    if (sw->parsed())
      return sweep_command(config_path, axis, values_csv, seeds, jobs, out_dir);
    if (gc->parsed()) return gradcheck_command(trials, out_path);
    if (oc->parsed()) return oracle_compare_command(seeds, out_path);
    if (pd->parsed()) return plotdata_command(trace_path, figure, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
