#pragma once

#include <cstdint>
#include <vector>

#include "muxloop/fsm.hpp"
#include "muxloop/types.hpp"

// Seeded Monte Carlo of output cycles. Identical SimConfig (including seed)
// gives bit-identical outputs regardless of thread count.
namespace muxloop::sim {

struct SimConfig {
  std::uint64_t cycles = 1;
  std::uint64_t seed = 1;
  PhotonStatistics stats;
  ChannelModel channels;
  MuxConfig mux;
  double dead_time_ns = 0.0;
  double dark_rate_hz = 0.0;   // per detector channel
  bool hbt_split = false;      // balanced two-detector split on the output
  bool gated = true;           // false: calibration mode, no switch gating
  double latency_ns = 120.0;   // herald-to-switch electronic latency
  double pulse_width_ns = 100.0;

  void validate() const;
};

fsm::FsmTiming make_timing(const SimConfig& cfg);

enum class Channel : int {
  Herald = 0,
  Signal = 1,
  SignalA = 2,
  SignalB = 3,
  SwitchCmd = 4,
};

struct EventRecord {
  Channel channel;
  std::int64_t timestamp_ps;

  bool operator==(const EventRecord&) const = default;
};

struct TrialOutcome {
  std::uint64_t cycle_index = 0;
  int fired_bin = 0;        // chronological j, 0 when no herald
  int round_trips = 0;      // m - j + 1 when fired
  bool herald_detected = false;
  int pairs_in_fired_bin = 0;
  int signal_photons_out = 0;
  std::int64_t output_offset_ps = 0;  // k * delta_tau from the nominal slot
};

struct SimSummary {
  std::uint64_t cycles = 0;
  std::uint64_t herald_cycles = 0;
  std::uint64_t output_cycles = 0;   // cycles with >=1 signal photon out
  std::uint64_t signal_photons = 0;
  std::vector<std::uint64_t> first_fire_counts;  // chronological bin j-1
  // HBT counters, populated when hbt_split is set
  std::uint64_t n_ha = 0, n_hb = 0, n_hab = 0;

  double p_m_hat = 0.0;
  double p_h_hat = 0.0;
  double ci_low = 0.0;   // Wilson 95% interval on p_m_hat
  double ci_high = 0.0;

  void merge(const SimSummary& other);
  void finalize();
};

// Parallel across cycle shards; threads = 0 picks hardware concurrency.
SimSummary simulate_cycles(const SimConfig& cfg, unsigned threads = 0);

struct SimResult {
  SimSummary summary;
  std::vector<TrialOutcome> outcomes;
};

// Per-cycle outcome list; rejects runs whose outcome buffer would be
// oversized (> 2e6 cycles).
SimResult simulate_outcomes(const SimConfig& cfg);

struct TagData {
  std::vector<EventRecord> events;  // sorted by (timestamp, channel)
  std::int64_t duration_ps = 0;
};

// Raw time-tag stream: heralds at their bin times, signals at the output
// slot plus the k * delta_tau storage offset (gated) or one loop pass after
// their bin (calibration mode), dark counts as a homogeneous point process,
// dead time enforced per detector channel.
TagData generate_timetags(const SimConfig& cfg);

struct G2Estimate {
  double g2 = 0.0;
  double stat_error = 0.0;
  std::uint64_t n_h = 0, n_ha = 0, n_hb = 0, n_hab = 0;
  bool low_stats = false;
};

// Heralded HBT estimate g2 = N_hab * N_h / (N_ha * N_hb); requires
// hbt_split, throws when no heralds occurred.
G2Estimate estimate_g2(const SimConfig& cfg, unsigned threads = 0);

// FSM traces of the first heralded cycles, for export and validation.
std::vector<fsm::FsmTrace> collect_traces(const SimConfig& cfg,
                                          std::size_t max_traces);

// Wilson score interval, z = 1.96.
void wilson_interval(std::uint64_t successes, std::uint64_t trials,
                     double* low, double* high);

}  // namespace muxloop::sim
