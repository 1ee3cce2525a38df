#include "muxloop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "muxloop/model.hpp"
#include "muxloop/rng.hpp"

namespace muxloop::sim {

namespace {

constexpr std::uint64_t kOutcomeCap = 2'000'000;
constexpr std::uint64_t kEventCap = 200'000'000;
constexpr std::uint64_t kDarkStreamKey = 0xDA12C0DE;

std::int64_t ns_to_ps(double ns) { return std::llround(ns * 1e3); }

struct CycleDraw {
  // per-bin pair counts for clicked bins are looked up via fired index;
  // we retain the clicked bins and the pair count of each clicked bin.
  std::vector<int> clicked_bins;
  std::vector<int> clicked_pairs;
  // populated only when record_all is set: every bin with >= 1 pair,
  // whether or not the herald clicked (needed for ungated calibration runs)
  std::vector<int> all_bins;
  std::vector<int> all_pairs;
};

// Draw all m bins in fixed order. Returns via out-params to avoid
// reallocation in the hot loop. The RNG consumption order is identical
// whether or not record_all is set.
inline void draw_bins(CycleRng& rng, const SimConfig& cfg, CycleDraw* draw,
                      bool record_all = false) {
  draw->clicked_bins.clear();
  draw->clicked_pairs.clear();
  draw->all_bins.clear();
  draw->all_pairs.clear();
  const double eta_h = cfg.channels.eta_h;
  for (int j = 1; j <= cfg.mux.m; ++j) {
    const int n = rng.sample_pairs(cfg.stats);
    if (n == 0) continue;
    if (record_all) {
      draw->all_bins.push_back(j);
      draw->all_pairs.push_back(n);
    }
    const double click_p =
        eta_h >= 1.0 ? 1.0 : 1.0 - std::pow(1.0 - eta_h, n);
    if (rng.bernoulli(click_p)) {
      draw->clicked_bins.push_back(j);
      draw->clicked_pairs.push_back(n);
    }
  }
}

// Signal transmission after k stored round trips.
std::vector<double> transmission_table(const SimConfig& cfg) {
  std::vector<double> t(static_cast<std::size_t>(cfg.mux.m) + 1, 0.0);
  const double b = cfg.channels.round_trip_transmission();
  for (int k = 1; k <= cfg.mux.m; ++k) {
    t[static_cast<std::size_t>(k)] = cfg.channels.eta_s_prime * std::pow(b, k);
  }
  return t;
}

}  // namespace

void SimConfig::validate() const {
  stats.validate();
  channels.validate();
  mux.validate();
  if (cycles < 1) throw std::invalid_argument("SimConfig: cycles must be >= 1");
  if (mux.m > 64) {
    throw CapacityError("SimConfig: the controller supports at most 64 bins");
  }
  if (!(dead_time_ns >= 0.0) || !(dark_rate_hz >= 0.0)) {
    throw std::invalid_argument("SimConfig: dead time and dark rate must be >= 0");
  }
  if (latency_ns > mux.delay_ns) {
    throw std::invalid_argument(
        "SimConfig: herald-to-switch latency beyond the compensation delay");
  }
  const double span_ns =
      mux.m * mux.tau_ns + mux.delay_ns +
      std::max(mux.m * mux.delta_tau_ns + pulse_width_ns,
               mux.tau_ns + mux.delta_tau_ns);
  if (span_ns > mux.cycle_period_ns() * (1.0 + 1e-9)) {
    throw std::invalid_argument(
        "SimConfig: release window does not fit in the output cycle");
  }
}

fsm::FsmTiming make_timing(const SimConfig& cfg) {
  fsm::FsmTiming t;
  t.m = cfg.mux.m;
  t.tau_ps = ns_to_ps(cfg.mux.tau_ns);
  t.delay_ps = ns_to_ps(cfg.mux.delay_ns);
  t.latency_ps = ns_to_ps(cfg.latency_ns);
  t.pulse_width_ps = ns_to_ps(cfg.pulse_width_ns);
  t.cycle_ps = ns_to_ps(cfg.mux.cycle_period_ns());
  return t;
}

void SimSummary::merge(const SimSummary& other) {
  cycles += other.cycles;
  herald_cycles += other.herald_cycles;
  output_cycles += other.output_cycles;
  signal_photons += other.signal_photons;
  n_ha += other.n_ha;
  n_hb += other.n_hb;
  n_hab += other.n_hab;
  if (first_fire_counts.size() < other.first_fire_counts.size()) {
    first_fire_counts.resize(other.first_fire_counts.size(), 0);
  }
  for (std::size_t i = 0; i < other.first_fire_counts.size(); ++i) {
    first_fire_counts[i] += other.first_fire_counts[i];
  }
}

void SimSummary::finalize() {
  if (cycles == 0) return;
  p_m_hat = static_cast<double>(output_cycles) / static_cast<double>(cycles);
  p_h_hat = static_cast<double>(herald_cycles) / static_cast<double>(cycles);
  wilson_interval(output_cycles, cycles, &ci_low, &ci_high);
}

void wilson_interval(std::uint64_t successes, std::uint64_t trials, double* low,
                     double* high) {
  if (trials == 0) {
    *low = 0.0;
    *high = 1.0;
    return;
  }
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // pin the degenerate edges exactly against rounding in center - half
  *low = successes == 0 ? 0.0 : std::max(0.0, center - half);
  *high = successes == trials ? 1.0 : std::min(1.0, center + half);
}

namespace {

SimSummary run_shard(const SimConfig& cfg, std::uint64_t lo, std::uint64_t hi,
                     const std::vector<double>& t_k,
                     const fsm::FsmTiming& timing) {
  SimSummary s;
  s.first_fire_counts.assign(static_cast<std::size_t>(cfg.mux.m), 0);
  CycleDraw draw;
  for (std::uint64_t c = lo; c < hi; ++c) {
    CycleRng rng(cfg.seed, c);
    draw_bins(rng, cfg, &draw);
    ++s.cycles;
    if (draw.clicked_bins.empty()) continue;
    ++s.herald_cycles;
    const int stored = fsm::pick_stored_bin(draw.clicked_bins, timing);
    s.first_fire_counts[static_cast<std::size_t>(stored - 1)] += 1;
    const int k = cfg.mux.m - stored + 1;
    const int pairs = draw.clicked_pairs.front();
    const int out = rng.binomial(pairs, t_k[static_cast<std::size_t>(k)]);
    if (out > 0) {
      ++s.output_cycles;
      s.signal_photons += static_cast<std::uint64_t>(out);
      if (cfg.hbt_split) {
        const int a = rng.binomial(out, 0.5);
        const int b = out - a;
        if (a > 0) ++s.n_ha;
        if (b > 0) ++s.n_hb;
        if (a > 0 && b > 0) ++s.n_hab;
      }
    }
  }
  return s;
}

}  // namespace

SimSummary simulate_cycles(const SimConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::vector<double> t_k = transmission_table(cfg);
  const fsm::FsmTiming timing = make_timing(cfg);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, cfg.cycles / 1024 + 1)));

  if (threads <= 1) {
    SimSummary s = run_shard(cfg, 0, cfg.cycles, t_k, timing);
    s.finalize();
    return s;
  }

  std::vector<SimSummary> partials(threads);
  std::vector<std::thread> pool;
  const std::uint64_t chunk = cfg.cycles / threads;
  for (unsigned i = 0; i < threads; ++i) {
    const std::uint64_t lo = i * chunk;
    const std::uint64_t hi = (i + 1 == threads) ? cfg.cycles : lo + chunk;
    pool.emplace_back([&, i, lo, hi] {
      partials[i] = run_shard(cfg, lo, hi, t_k, timing);
    });
  }
  for (auto& t : pool) t.join();

  SimSummary s;
  s.first_fire_counts.assign(static_cast<std::size_t>(cfg.mux.m), 0);
  for (const SimSummary& p : partials) s.merge(p);
  s.finalize();
  return s;
}

SimResult simulate_outcomes(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.cycles > kOutcomeCap) {
    throw CapacityError("simulate_outcomes: outcome list would be oversized");
  }
  const std::vector<double> t_k = transmission_table(cfg);
  const fsm::FsmTiming timing = make_timing(cfg);
  const std::int64_t dtau_ps = ns_to_ps(cfg.mux.delta_tau_ns);

  SimResult result;
  result.summary.first_fire_counts.assign(static_cast<std::size_t>(cfg.mux.m), 0);
  result.outcomes.reserve(cfg.cycles);
  CycleDraw draw;
  for (std::uint64_t c = 0; c < cfg.cycles; ++c) {
    CycleRng rng(cfg.seed, c);
    draw_bins(rng, cfg, &draw);
    TrialOutcome o;
    o.cycle_index = c;
    ++result.summary.cycles;
    if (!draw.clicked_bins.empty()) {
      ++result.summary.herald_cycles;
      o.herald_detected = true;
      o.fired_bin = fsm::pick_stored_bin(draw.clicked_bins, timing);
      o.round_trips = cfg.mux.m - o.fired_bin + 1;
      o.pairs_in_fired_bin = draw.clicked_pairs.front();
      o.output_offset_ps = o.round_trips * dtau_ps;
      result.summary
          .first_fire_counts[static_cast<std::size_t>(o.fired_bin - 1)] += 1;
      o.signal_photons_out = rng.binomial(
          o.pairs_in_fired_bin, t_k[static_cast<std::size_t>(o.round_trips)]);
      if (o.signal_photons_out > 0) {
        ++result.summary.output_cycles;
        result.summary.signal_photons +=
            static_cast<std::uint64_t>(o.signal_photons_out);
      }
    }
    result.outcomes.push_back(o);
  }
  result.summary.finalize();
  return result;
}

namespace {

void apply_dead_time(std::vector<std::int64_t>* channel, std::int64_t dead_ps) {
  if (dead_ps <= 0 || channel->size() < 2) return;
  std::vector<std::int64_t> kept;
  kept.reserve(channel->size());
  std::int64_t last = std::numeric_limits<std::int64_t>::min();
  for (std::int64_t t : *channel) {
    if (kept.empty() || t - last >= dead_ps) {
      kept.push_back(t);
      last = t;
    }
  }
  channel->swap(kept);
}

void add_dark_counts(std::vector<std::int64_t>* channel, double rate_hz,
                     std::int64_t duration_ps, std::uint64_t seed, int ch_id) {
  if (rate_hz <= 0.0) return;
  CycleRng rng(seed, kDarkStreamKey + static_cast<std::uint64_t>(ch_id));
  double t_s = 0.0;
  const double duration_s = static_cast<double>(duration_ps) * 1e-12;
  for (;;) {
    t_s += rng.exponential(rate_hz);
    if (t_s >= duration_s) break;
    channel->push_back(std::llround(t_s * 1e12));
  }
  std::sort(channel->begin(), channel->end());
}

}  // namespace

TagData generate_timetags(const SimConfig& cfg) {
  cfg.validate();
  const double q = model::herald_click_prob(cfg.stats, cfg.channels.eta_h);
  const double expected =
      static_cast<double>(cfg.cycles) *
          (cfg.mux.m * (q + 0.05) + 2.0) +
      cfg.dark_rate_hz * static_cast<double>(cfg.cycles) * cfg.mux.cycle_period_ns() * 1e-9 * 4.0;
  if (expected > static_cast<double>(kEventCap)) {
    throw CapacityError("generate_timetags: event stream would be oversized");
  }

  const std::vector<double> t_k = transmission_table(cfg);
  const fsm::FsmTiming timing = make_timing(cfg);
  const std::int64_t period_ps = ns_to_ps(cfg.mux.cycle_period_ns());
  const std::int64_t tau_ps = timing.tau_ps;
  const std::int64_t dtau_ps = ns_to_ps(cfg.mux.delta_tau_ns);
  const std::int64_t slot_ps = timing.output_slot_ps();
  const double eta_s_cal = cfg.channels.eta_s();  // one switch-and-loop pass

  std::vector<std::int64_t> herald, signal, signal_a, signal_b, switch_cmd;
  CycleDraw draw;
  for (std::uint64_t c = 0; c < cfg.cycles; ++c) {
    CycleRng rng(cfg.seed, c);
    draw_bins(rng, cfg, &draw, /*record_all=*/!cfg.gated);
    const std::int64_t t0 = static_cast<std::int64_t>(c) * period_ps;
    for (int j : draw.clicked_bins) {
      herald.push_back(t0 + (j - 1) * tau_ps);
    }
    if (cfg.gated) {
      if (draw.clicked_bins.empty()) continue;
      const int stored = fsm::pick_stored_bin(draw.clicked_bins, timing);
      const int k = cfg.mux.m - stored + 1;
      switch_cmd.push_back(t0 + (stored - 1) * tau_ps + timing.latency_ps);
      switch_cmd.push_back(t0 + slot_ps);
      const int out = rng.binomial(draw.clicked_pairs.front(),
                                   t_k[static_cast<std::size_t>(k)]);
      if (out > 0) {
        const std::int64_t ts = t0 + slot_ps + k * dtau_ps;
        if (cfg.hbt_split) {
          const int a = rng.binomial(out, 0.5);
          if (a > 0) signal_a.push_back(ts);
          if (out - a > 0) signal_b.push_back(ts);
        } else {
          signal.push_back(ts);
        }
      }
    } else {
      // calibration mode: every bin's signal photons pass one switch-and-loop
      // trip, no gating; the signal arm is thinned independently of the
      // herald click
      for (std::size_t i = 0; i < draw.all_bins.size(); ++i) {
        const int j = draw.all_bins[i];
        const int out = rng.binomial(draw.all_pairs[i], eta_s_cal);
        if (out > 0) {
          const std::int64_t ts =
              t0 + (j - 1) * tau_ps + timing.delay_ps + tau_ps + dtau_ps;
          if (cfg.hbt_split) {
            const int a = rng.binomial(out, 0.5);
            if (a > 0) signal_a.push_back(ts);
            if (out - a > 0) signal_b.push_back(ts);
          } else {
            signal.push_back(ts);
          }
        }
      }
    }
  }

  TagData data;
  data.duration_ps = static_cast<std::int64_t>(cfg.cycles) * period_ps;
  const std::int64_t dead_ps = ns_to_ps(cfg.dead_time_ns);

  struct NamedChannel {
    Channel id;
    std::vector<std::int64_t>* tags;
    bool detector;
  };
  NamedChannel channels[] = {
      {Channel::Herald, &herald, true},
      {Channel::Signal, &signal, true},
      {Channel::SignalA, &signal_a, true},
      {Channel::SignalB, &signal_b, true},
      {Channel::SwitchCmd, &switch_cmd, false},
  };
  for (NamedChannel& ch : channels) {
    if (ch.detector) {
      add_dark_counts(ch.tags, cfg.dark_rate_hz, data.duration_ps, cfg.seed,
                      static_cast<int>(ch.id));
      apply_dead_time(ch.tags, dead_ps);
    }
    for (std::int64_t t : *ch.tags) data.events.push_back({ch.id, t});
  }
  std::sort(data.events.begin(), data.events.end(),
            [](const EventRecord& a, const EventRecord& b) {
              if (a.timestamp_ps != b.timestamp_ps) {
                return a.timestamp_ps < b.timestamp_ps;
              }
              return static_cast<int>(a.channel) < static_cast<int>(b.channel);
            });
  return data;
}

G2Estimate estimate_g2(const SimConfig& cfg, unsigned threads) {
  if (!cfg.hbt_split) {
    throw std::invalid_argument("estimate_g2: hbt_split must be enabled");
  }
  const SimSummary s = simulate_cycles(cfg, threads);
  if (s.herald_cycles == 0) {
    throw std::domain_error("estimate_g2: no heralds, estimate undefined");
  }
  G2Estimate g;
  g.n_h = s.herald_cycles;
  g.n_ha = s.n_ha;
  g.n_hb = s.n_hb;
  g.n_hab = s.n_hab;
  if (s.n_ha == 0 || s.n_hb == 0) {
    g.g2 = 0.0;
    g.low_stats = true;
    return g;
  }
  g.g2 = static_cast<double>(s.n_hab) * static_cast<double>(s.herald_cycles) /
         (static_cast<double>(s.n_ha) * static_cast<double>(s.n_hb));
  g.stat_error =
      g.n_hab > 0 ? g.g2 / std::sqrt(static_cast<double>(g.n_hab)) : 0.0;
  g.low_stats = g.n_hab < 100;
  return g;
}

std::vector<fsm::FsmTrace> collect_traces(const SimConfig& cfg,
                                          std::size_t max_traces) {
  cfg.validate();
  const fsm::FsmTiming timing = make_timing(cfg);
  std::vector<fsm::FsmTrace> traces;
  CycleDraw draw;
  for (std::uint64_t c = 0; c < cfg.cycles && traces.size() < max_traces; ++c) {
    CycleRng rng(cfg.seed, c);
    draw_bins(rng, cfg, &draw);
    if (draw.clicked_bins.empty()) continue;
    traces.push_back(fsm::run_cycle(draw.clicked_bins, timing));
  }
  return traces;
}

}  // namespace muxloop::sim
