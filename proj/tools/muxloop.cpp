// Command-line surface for the switch-and-loop multiplexed source tools:
// analytic sweeps, Monte Carlo runs, figure CSVs, tag-stream calibration and
// topology comparison.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "muxloop/io.hpp"
#include "muxloop/model.hpp"
#include "muxloop/rng.hpp"
#include "muxloop/sim.hpp"
#include "muxloop/tags.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace muxloop;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  PhotonStatistics stats;
  ChannelModel channels{0.145, 0.143, 1.0};
  MuxConfig mux;
  std::uint64_t cycles = 1'000'000;
  std::uint64_t seed = 1;
  double dead_time_ns = 0.0;
  double dark_rate_hz = 0.0;
  bool hbt_split = false;
  bool gated = true;
  double latency_ns = 120.0;
  double pulse_width_ns = 100.0;
  std::int64_t window_ps = 1000;
  double pulse_rate_hz = 0.0;  // 0: defaults to m * clock_hz
};

void require_keys(const json& j, const std::string& ctx,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError(ctx + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T* out) {
  if (const auto it = j.find(key); it != j.end()) {
    try {
      *out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("bad value for '") + key + "'");
    }
  }
}

RunConfig parse_config(const json& root) {
  require_keys(root, "config",
               {"statistics", "channels", "mux", "sim", "analysis"});
  RunConfig c;
  c.stats.mu = 0.009;

  if (root.contains("statistics")) {
    const json& s = root["statistics"];
    require_keys(s, "statistics", {"law", "mu"});
    std::string law = "thermal";
    read_field(s, "law", &law);
    if (law == "thermal") {
      c.stats.law = PhotonLaw::Thermal;
    } else if (law == "poisson") {
      c.stats.law = PhotonLaw::Poisson;
    } else {
      throw ConfigError("statistics.law must be 'thermal' or 'poisson'");
    }
    read_field(s, "mu", &c.stats.mu);
  }
  if (root.contains("channels")) {
    const json& s = root["channels"];
    require_keys(s, "channels",
                 {"eta_h", "eta_s_prime", "loss_db_per_round_trip"});
    read_field(s, "eta_h", &c.channels.eta_h);
    read_field(s, "eta_s_prime", &c.channels.eta_s_prime);
    read_field(s, "loss_db_per_round_trip", &c.channels.loss_db_per_round_trip);
  }
  if (root.contains("mux")) {
    const json& s = root["mux"];
    require_keys(s, "mux",
                 {"m", "tau_ns", "clock_hz", "delta_tau_ns", "delay_ns",
                  "coherence_ps"});
    read_field(s, "m", &c.mux.m);
    read_field(s, "tau_ns", &c.mux.tau_ns);
    read_field(s, "clock_hz", &c.mux.clock_hz);
    read_field(s, "delta_tau_ns", &c.mux.delta_tau_ns);
    read_field(s, "delay_ns", &c.mux.delay_ns);
    read_field(s, "coherence_ps", &c.mux.coherence_ps);
  }
  if (root.contains("sim")) {
    const json& s = root["sim"];
    require_keys(s, "sim",
                 {"cycles", "seed", "dead_time_ns", "dark_rate_hz", "hbt_split",
                  "gated", "latency_ns", "pulse_width_ns"});
    read_field(s, "cycles", &c.cycles);
    read_field(s, "seed", &c.seed);
    read_field(s, "dead_time_ns", &c.dead_time_ns);
    read_field(s, "dark_rate_hz", &c.dark_rate_hz);
    read_field(s, "hbt_split", &c.hbt_split);
    read_field(s, "gated", &c.gated);
    read_field(s, "latency_ns", &c.latency_ns);
    read_field(s, "pulse_width_ns", &c.pulse_width_ns);
  }
  if (root.contains("analysis")) {
    const json& s = root["analysis"];
    require_keys(s, "analysis", {"window_ps", "pulse_rate_hz"});
    read_field(s, "window_ps", &c.window_ps);
    read_field(s, "pulse_rate_hz", &c.pulse_rate_hz);
  }

  try {
    c.stats.validate();
    c.channels.validate();
    c.mux.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  json root;
  try {
    root = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(root);
}

json resolved_json(const RunConfig& c) {
  return json{
      {"statistics",
       {{"law", c.stats.law == PhotonLaw::Thermal ? "thermal" : "poisson"},
        {"mu", c.stats.mu}}},
      {"channels",
       {{"eta_h", c.channels.eta_h},
        {"eta_s_prime", c.channels.eta_s_prime},
        {"loss_db_per_round_trip", c.channels.loss_db_per_round_trip}}},
      {"mux",
       {{"m", c.mux.m},
        {"tau_ns", c.mux.tau_ns},
        {"clock_hz", c.mux.clock_hz},
        {"delta_tau_ns", c.mux.delta_tau_ns},
        {"delay_ns", c.mux.delay_ns},
        {"coherence_ps", c.mux.coherence_ps}}},
      {"sim",
       {{"cycles", c.cycles},
        {"seed", c.seed},
        {"dead_time_ns", c.dead_time_ns},
        {"dark_rate_hz", c.dark_rate_hz},
        {"hbt_split", c.hbt_split},
        {"gated", c.gated},
        {"latency_ns", c.latency_ns},
        {"pulse_width_ns", c.pulse_width_ns}}},
      {"analysis",
       {{"window_ps", c.window_ps}, {"pulse_rate_hz", c.pulse_rate_hz}}}};
}

sim::SimConfig sim_config_for_m(const RunConfig& c, int m) {
  sim::SimConfig sc;
  sc.cycles = c.cycles;
  // per-m substream so sweeps stay reproducible independent of order
  sc.seed = CycleRng(c.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(m)).next_u64();
  sc.stats = c.stats;
  sc.channels = c.channels;
  sc.mux = c.mux;
  sc.mux.m = m;
  sc.dead_time_ns = c.dead_time_ns;
  sc.dark_rate_hz = c.dark_rate_hz;
  sc.hbt_split = c.hbt_split;
  sc.gated = c.gated;
  sc.latency_ns = c.latency_ns;
  sc.pulse_width_ns = c.pulse_width_ns;
  return sc;
}

unsigned env_threads() {
  if (const char* v = std::getenv("MUXLOOP_THREADS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return 0;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::ofstream open_csv(const fs::path& path, const std::string& command,
                       const RunConfig& cfg) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# muxloop " << command << "\n";
  f << "# config: " << resolved_json(cfg).dump() << "\n";
  f << "# seed: " << cfg.seed << "\n";
  return f;
}

io::Metadata tag_metadata(const RunConfig& cfg, const sim::SimConfig& sc) {
  return {
      {"config", resolved_json(cfg).dump()},
      {"seed", std::to_string(sc.seed)},
      {"m", std::to_string(sc.mux.m)},
      {"tau_ns", num(sc.mux.tau_ns)},
      {"clock_hz", num(sc.mux.clock_hz)},
      {"delta_tau_ns", num(sc.mux.delta_tau_ns)},
      {"delay_ns", num(sc.mux.delay_ns)},
      {"gated", sc.gated ? "1" : "0"},
      {"pulse_rate_hz", num(sc.mux.m * sc.mux.clock_hz)},
  };
}

struct SweepRow {
  int m;
  model::AnalyticResult model;
  std::optional<sim::SimSummary> sim;
};

std::vector<SweepRow> analytic_sweep(const RunConfig& cfg, int m_max) {
  std::vector<SweepRow> rows;
  for (int m = 1; m <= m_max; ++m) {
    MuxConfig mux = cfg.mux;
    mux.m = m;
    rows.push_back({m, model::solve(cfg.stats, cfg.channels, mux), {}});
  }
  return rows;
}

void write_result_table(const fs::path& path, const std::string& command,
                        const RunConfig& cfg, const std::vector<SweepRow>& rows) {
  std::ofstream f = open_csv(path, command, cfg);
  f << "m,p_m_model,p_m_sim,ci_low,ci_high,E,x_m_hz,p_h,herald_rate_hz\n";
  const double base_sim =
      rows.front().sim ? rows.front().sim->p_m_hat : 0.0;
  for (const SweepRow& r : rows) {
    f << r.m << ',' << num(r.model.p_m) << ',';
    if (r.sim) {
      const double e_sim = base_sim > 0.0 ? r.sim->p_m_hat / base_sim : 0.0;
      f << num(r.sim->p_m_hat) << ',' << num(r.sim->ci_low) << ','
        << num(r.sim->ci_high) << ',' << num(e_sim) << ','
        << num(cfg.mux.clock_hz * r.sim->p_m_hat) << ','
        << num(r.sim->p_h_hat) << ','
        << num(cfg.mux.clock_hz * r.sim->p_h_hat) << "\n";
    } else {
      f << ",,," << num(r.model.enhancement) << ',' << num(r.model.x_m_hz)
        << ',' << num(r.model.p_h) << ','
        << num(cfg.mux.clock_hz * r.model.p_h) << "\n";
    }
  }
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

int cmd_analytic(const RunConfig& cfg, const fs::path& out, int m_max) {
  fs::create_directories(out);
  write_result_table(out / "analytic.csv", "analytic", cfg,
                     analytic_sweep(cfg, m_max));
  std::cout << "wrote " << (out / "analytic.csv").string() << "\n";
  return 0;
}

std::vector<SweepRow> simulate_sweep(const RunConfig& cfg, const fs::path& out,
                                     int m_max, bool persist) {
  std::vector<SweepRow> rows = analytic_sweep(cfg, m_max);
  const unsigned threads = env_threads();
  for (SweepRow& r : rows) {
    const sim::SimConfig sc = sim_config_for_m(cfg, r.m);
    r.sim = sim::simulate_cycles(sc, threads);
    if (persist) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_m%02d", r.m);
      const sim::TagData tags = sim::generate_timetags(sc);
      io::write_tags((out / (std::string("tags") + suffix + ".txt")).string(),
                     tags, tag_metadata(cfg, sc));
      const auto traces = sim::collect_traces(sc, 25);
      io::write_trace((out / (std::string("trace") + suffix + ".txt")).string(),
                      traces, tag_metadata(cfg, sc));
    }
  }
  return rows;
}

json summary_json(const RunConfig& cfg, const std::vector<SweepRow>& rows) {
  json jrows = json::array();
  for (const SweepRow& r : rows) {
    json j{{"m", r.m},
           {"p_m_model", r.model.p_m},
           {"enhancement_model", r.model.enhancement},
           {"x_m_hz_model", r.model.x_m_hz},
           {"p_h_model", r.model.p_h}};
    if (r.sim) {
      j["p_m_sim"] = r.sim->p_m_hat;
      j["ci_low"] = r.sim->ci_low;
      j["ci_high"] = r.sim->ci_high;
      j["p_h_sim"] = r.sim->p_h_hat;
      j["cycles"] = r.sim->cycles;
      j["herald_cycles"] = r.sim->herald_cycles;
      j["output_cycles"] = r.sim->output_cycles;
      j["first_fire_counts"] = r.sim->first_fire_counts;
    }
    jrows.push_back(std::move(j));
  }
  return json{{"config", resolved_json(cfg)}, {"rows", jrows}};
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out, int m_max) {
  fs::create_directories(out);
  const std::vector<SweepRow> rows = simulate_sweep(cfg, out, m_max, true);
  write_result_table(out / "results.csv", "simulate", cfg, rows);
  std::ofstream js(out / "summary.json", std::ios::binary);
  js << summary_json(cfg, rows).dump(2) << "\n";
  if (!js) throw std::runtime_error("write failed: summary.json");
  std::cout << "wrote " << (out / "results.csv").string() << "\n";
  return 0;
}

int cmd_reproduce_figure(const RunConfig& cfg, const fs::path& out, int m_max) {
  fs::create_directories(out);
  const std::vector<SweepRow> rows = simulate_sweep(cfg, out, m_max, false);
  {
    std::ofstream f = open_csv(out / "fig2a.csv", "reproduce-figure", cfg);
    f << "m,probability,rate_hz,model_probability,model_rate_hz\n";
    for (const SweepRow& r : rows) {
      f << r.m << ',' << num(r.sim->p_m_hat) << ','
        << num(cfg.mux.clock_hz * r.sim->p_m_hat) << ',' << num(r.model.p_m)
        << ',' << num(r.model.x_m_hz) << "\n";
    }
  }
  {
    std::ofstream f = open_csv(out / "fig2b.csv", "reproduce-figure", cfg);
    f << "m,probability,rate_hz,model_probability,model_rate_hz\n";
    for (const SweepRow& r : rows) {
      f << r.m << ',' << num(r.sim->p_h_hat) << ','
        << num(cfg.mux.clock_hz * r.sim->p_h_hat) << ',' << num(r.model.p_h)
        << ',' << num(cfg.mux.clock_hz * r.model.p_h) << "\n";
    }
  }
  std::cout << "wrote " << (out / "fig2a.csv").string() << " and fig2b.csv\n";
  return 0;
}

int cmd_calibrate(const std::string& tag_path, double pulse_rate_hz,
                  const std::string& channel_map_path, std::int64_t window_ps,
                  const fs::path& out) {
  const io::TagFile file = io::read_tags(tag_path);
  tags::AnalysisConfig ac;
  ac.window_ps = window_ps;

  const auto meta_num = [&](const char* key, double fallback) {
    const auto it = file.meta.find(key);
    return it != file.meta.end() ? std::strtod(it->second.c_str(), nullptr)
                                 : fallback;
  };
  ac.m = static_cast<int>(meta_num("m", 1));
  ac.tau_ns = meta_num("tau_ns", ac.tau_ns);
  ac.clock_hz = meta_num("clock_hz", ac.clock_hz);
  ac.delta_tau_ns = meta_num("delta_tau_ns", ac.delta_tau_ns);
  ac.delay_ns = meta_num("delay_ns", ac.delay_ns);
  ac.folded = meta_num("gated", 0) != 0.0;
  ac.pulse_rate_hz =
      pulse_rate_hz > 0.0 ? pulse_rate_hz : meta_num("pulse_rate_hz", 0.0);
  if (!(ac.pulse_rate_hz > 0.0)) {
    throw ConfigError("calibrate: --pulse-rate required (not in tag metadata)");
  }
  if (!channel_map_path.empty()) {
    for (const auto& [id, role] : io::read_channel_map(channel_map_path)) {
      if (role == "herald") ac.herald_channel = id;
      if (role == "signal") ac.signal_channel = id;
    }
  }

  const tags::CountsSummary s = tags::analyze(file.stream, ac);
  json j{{"duration_s", s.duration_s},
         {"singles_herald", {{"count", s.s_h.count}, {"rate_hz", s.s_h.rate_hz}}},
         {"singles_signal", {{"count", s.s_s.count}, {"rate_hz", s.s_s.rate_hz}}},
         {"coincidences", s.coincidences},
         {"coincidence_rate_hz", s.coincidence_rate_hz},
         {"accidental_rate_hz", s.accidental_rate_hz},
         {"car", s.car_infinite ? json("inf") : json(s.car)},
         {"car_infinite", s.car_infinite},
         {"mu", s.mu},
         {"eta_h", s.eta_h},
         {"eta_s", s.eta_s},
         {"delay_ps", s.delay_ps},
         {"per_bin_herald_counts", s.per_bin_herald_counts}};
  if (s.g2_valid) j["g2"] = s.g2;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream f(out / "calibration.json", std::ios::binary);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: calibration.json");
  }
  return 0;
}

int cmd_compare_topologies(const RunConfig& cfg, const fs::path& out, int m_max) {
  fs::create_directories(out);
  std::ofstream f = open_csv(out / "topologies.csv", "compare-topologies", cfg);
  f << "m,loop_avg_passes,tree_passes,loop_avg_transmission,tree_transmission\n";
  for (int m = 1; m <= m_max; ++m) {
    const model::TopologyComparison t =
        model::topology_compare(m, cfg.channels.loss_db_per_round_trip);
    f << m << ',' << num(t.loop_avg_passes) << ',' << t.tree_passes << ','
      << num(t.loop_avg_transmission) << ',' << num(t.tree_transmission) << "\n";
  }
  std::cout << "wrote " << (out / "topologies.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporally multiplexed heralded single-photon source toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  std::optional<std::uint64_t> cycles_override;
  std::optional<int> m_max_override;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed_override, "override config seed");
    sub->add_option("--cycles", cycles_override, "override simulated cycles");
    sub->add_option("--m-max", m_max_override, "sweep bin counts 1..m_max");
  };

  CLI::App* analytic = app.add_subcommand("analytic", "closed-form sweep over m");
  add_common(analytic, true);
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo sweep with tags and traces");
  add_common(simulate, true);
  CLI::App* figure = app.add_subcommand("reproduce-figure",
                                        "plot-ready probability/rate CSV pair");
  add_common(figure, true);
  CLI::App* topo =
      app.add_subcommand("compare-topologies", "loop vs log-tree switch passes");
  add_common(topo, true);

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "reduce a tag stream to mu, eta, CAR, g2");
  std::string tag_path, channel_map_path;
  double pulse_rate_hz = 0.0;
  std::int64_t window_ps = 1000;
  calibrate->add_option("--tags", tag_path, "tag stream file")->required();
  calibrate->add_option("--pulse-rate", pulse_rate_hz, "pump pulse rate, Hz");
  calibrate->add_option("--channel-map", channel_map_path, "CSV channel_id,role");
  calibrate->add_option("--window-ps", window_ps, "coincidence window, ps");
  calibrate->add_option("--out", out_dir, "output directory ('' = stdout only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) {
      return cmd_calibrate(tag_path, pulse_rate_hz, channel_map_path, window_ps,
                           out_dir);
    }
    RunConfig cfg = load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (cycles_override) cfg.cycles = *cycles_override;
    const int m_max = m_max_override.value_or(cfg.mux.m);
    if (m_max < 1 || m_max > cfg.mux.m) {
      throw ConfigError("--m-max must be in 1..mux.m");
    }
    if (analytic->parsed()) return cmd_analytic(cfg, out_dir, m_max);
    if (simulate->parsed()) return cmd_simulate(cfg, out_dir, m_max);
    if (figure->parsed()) return cmd_reproduce_figure(cfg, out_dir, m_max);
    if (topo->parsed()) return cmd_compare_topologies(cfg, out_dir, m_max);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
