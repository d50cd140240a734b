#include "mecsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mecsim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

}  // namespace

std::string to_string(QueueMode mode) {
  return mode == QueueMode::paper_faithful ? "paper_faithful" : "conserving";
}

QueueMode queue_mode_from_string(const std::string& name) {
  if (name == "paper_faithful") return QueueMode::paper_faithful;
  if (name == "conserving") return QueueMode::conserving;
  throw std::invalid_argument("config: unknown queue_mode '" + name + "'");
}

double SystemConfig::noise_power_w() const {
  // dBm/Hz spectral density integrated over the offload bandwidth.
  return std::pow(10.0, (noise_dbm_per_hz - 30.0) / 10.0) * bandwidth_hz;
}

void SystemConfig::validate() const {
  require(num_wds >= 1, "num_wds must be >= 1");
  require(slots_per_block >= 1, "slots_per_block must be >= 1");
  require(slot_seconds > 0.0, "slot_seconds must be > 0");
  require(task_cycles > 0.0, "task_cycles must be > 0");
  require(arrival_prob > 0.0 && arrival_prob < 1.0,
          "arrival_prob must lie in (0, 1)");
  require(bandwidth_hz > 0.0, "bandwidth_hz must be > 0");
  require(snr_gap >= 1.0, "snr_gap must be >= 1");
  require(cap_wd > 0.0 && cap_ser > 0.0, "switched capacitances must be > 0");
  require(bits_per_cycle > 0.0, "bits_per_cycle must be > 0");
  require(f_max_wd > 0.0 && f_max_ser > 0.0, "CPU rate caps must be > 0");
  require(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0 && w4 >= 0.0,
          "weights must be non-negative");
  require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  require(feature_dim >= 1, "feature_dim must be >= 1");
  require(cell_radius_m > 0.0, "cell_radius_m must be > 0");
  require(shadow_std_db >= 0.0, "shadow_std_db must be >= 0");
  // One full task's worth of intermediate output must fit a single offload
  // slot at a sane spectral efficiency, or the power law explodes.
  const double worst_bits = bits_per_cycle * task_cycles;
  if (worst_bits > 30.0 * slot_bandwidth_bits()) {
    std::ostringstream os;
    os << "config: bits_per_cycle * task_cycles = " << worst_bits
       << " exceeds 30 bits/s/Hz over one offload slot ("
       << 30.0 * slot_bandwidth_bits() << " bits)";
    throw std::invalid_argument(os.str());
  }
}

void to_json(nlohmann::json& j, const SystemConfig& c) {
  j = nlohmann::json{
      {"num_wds", c.num_wds},
      {"slots_per_block", c.slots_per_block},
      {"slot_seconds", c.slot_seconds},
      {"task_cycles", c.task_cycles},
      {"arrival_prob", c.arrival_prob},
      {"bandwidth_hz", c.bandwidth_hz},
      {"snr_gap", c.snr_gap},
      {"cap_wd", c.cap_wd},
      {"cap_ser", c.cap_ser},
      {"bits_per_cycle", c.bits_per_cycle},
      {"f_max_wd", c.f_max_wd},
      {"f_max_ser", c.f_max_ser},
      {"weights", {c.w1, c.w2, c.w3, c.w4}},
      {"discount", c.discount},
      {"feature_dim", c.feature_dim},
      {"cell_radius_m", c.cell_radius_m},
      {"pathloss", {c.pathloss_a, c.pathloss_b}},
      {"shadow_std_db", c.shadow_std_db},
      {"noise_dbm_per_hz", c.noise_dbm_per_hz},
      {"queue_mode", to_string(c.queue_mode)},
      {"seed", c.seed},
  };
}

void from_json(const nlohmann::json& j, SystemConfig& c) {
  static const std::set<std::string> known = {
      "num_wds",        "slots_per_block", "slot_seconds",
      "task_cycles",    "arrival_prob",    "bandwidth_hz",
      "snr_gap",        "cap_wd",          "cap_ser",
      "bits_per_cycle", "f_max_wd",        "f_max_ser",
      "weights",        "discount",        "feature_dim",
      "cell_radius_m",  "pathloss",        "shadow_std_db",
      "noise_dbm_per_hz", "queue_mode",    "seed",
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown field '" + it.key() + "'");
  }
  c = SystemConfig{};
  if (j.contains("num_wds")) j.at("num_wds").get_to(c.num_wds);
  if (j.contains("slots_per_block")) j.at("slots_per_block").get_to(c.slots_per_block);
  if (j.contains("slot_seconds")) j.at("slot_seconds").get_to(c.slot_seconds);
  if (j.contains("task_cycles")) j.at("task_cycles").get_to(c.task_cycles);
  if (j.contains("arrival_prob")) j.at("arrival_prob").get_to(c.arrival_prob);
  if (j.contains("bandwidth_hz")) j.at("bandwidth_hz").get_to(c.bandwidth_hz);
  if (j.contains("snr_gap")) j.at("snr_gap").get_to(c.snr_gap);
  if (j.contains("cap_wd")) j.at("cap_wd").get_to(c.cap_wd);
  if (j.contains("cap_ser")) j.at("cap_ser").get_to(c.cap_ser);
  if (j.contains("bits_per_cycle")) j.at("bits_per_cycle").get_to(c.bits_per_cycle);
  if (j.contains("f_max_wd")) j.at("f_max_wd").get_to(c.f_max_wd);
  if (j.contains("f_max_ser")) j.at("f_max_ser").get_to(c.f_max_ser);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (!w.is_array() || w.size() != 4)
      throw std::invalid_argument("config: weights must be an array of 4");
    c.w1 = w[0].get<double>();
    c.w2 = w[1].get<double>();
    c.w3 = w[2].get<double>();
    c.w4 = w[3].get<double>();
  }
  if (j.contains("discount")) j.at("discount").get_to(c.discount);
  if (j.contains("feature_dim")) j.at("feature_dim").get_to(c.feature_dim);
  if (j.contains("cell_radius_m")) j.at("cell_radius_m").get_to(c.cell_radius_m);
  if (j.contains("pathloss")) {
    const auto& p = j.at("pathloss");
    if (!p.is_array() || p.size() != 2)
      throw std::invalid_argument("config: pathloss must be an array of 2");
    c.pathloss_a = p[0].get<double>();
    c.pathloss_b = p[1].get<double>();
  }
  if (j.contains("shadow_std_db")) j.at("shadow_std_db").get_to(c.shadow_std_db);
  if (j.contains("noise_dbm_per_hz")) j.at("noise_dbm_per_hz").get_to(c.noise_dbm_per_hz);
  if (j.contains("queue_mode"))
    c.queue_mode = queue_mode_from_string(j.at("queue_mode").get<std::string>());
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  c.validate();
}

SystemConfig system_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j.get<SystemConfig>();
}

}  // namespace mecsim
