#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "muxloop/sim.hpp"
#include "muxloop/types.hpp"

// Reduction of time-tag streams to singles, coincidences, calibration
// quantities and heralded g2.
namespace muxloop::tags {

struct TagStream {
  std::map<int, std::vector<std::int64_t>> channels;  // sorted timestamps, ps
  std::int64_t duration_ps = 0;

  const std::vector<std::int64_t>& channel(int id) const;
  void sort_channels();
};

TagStream from_events(const std::vector<sim::EventRecord>& events,
                      std::int64_t duration_ps);

struct SinglesCount {
  std::uint64_t count = 0;
  double rate_hz = 0.0;
};

SinglesCount count_singles(const TagStream& stream, int channel);

struct CoincidenceWindow {
  std::int64_t width_ps = 1000;  // full width
  std::int64_t delay_ps = 0;     // applied to the signal channel
};

struct CoincidenceResult {
  std::uint64_t count = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;  // (herald, signal)
};

// Greedy earliest-first one-to-one matching in time order; each tag is used
// at most once. Symmetric under swapping channels and negating the delay.
CoincidenceResult count_coincidences(const TagStream& stream, int herald_ch,
                                     int signal_ch,
                                     const CoincidenceWindow& window);

struct AccidentalsResult {
  std::uint64_t accidental_count = 0;
  double accidental_rate_hz = 0.0;
  double car = 0.0;
  bool car_infinite = false;
};

// Shifted-window accidental estimate: the same matcher with the signal
// channel offset by an integer number of output periods.
AccidentalsResult accidentals_and_car(const TagStream& stream, int herald_ch,
                                      int signal_ch,
                                      const CoincidenceWindow& window,
                                      int offset_multiple,
                                      std::int64_t period_ps);

// Mode of nearest herald-to-signal differences, quantised to bin_ps.
std::int64_t estimate_delay(const TagStream& stream, int herald_ch,
                            int signal_ch, std::int64_t bin_ps = 1000);

struct AnalysisConfig {
  double pulse_rate_hz = 500e3;  // pump pulses per second, for calibration
  double clock_hz = 500e3;       // output cycle clock
  int m = 1;
  double tau_ns = 125.0;
  double delta_tau_ns = 1.7;
  double delay_ns = 200.0;
  std::int64_t window_ps = 1000;
  std::int64_t delay_override_ps = -1;  // < 0: estimate from the stream
  bool folded = false;  // multiplexed stream: fold heralds to the output slot
  int herald_channel = static_cast<int>(sim::Channel::Herald);
  int signal_channel = static_cast<int>(sim::Channel::Signal);
};

struct CountsSummary {
  double duration_s = 0.0;
  SinglesCount s_h, s_s;
  std::uint64_t coincidences = 0;
  double coincidence_rate_hz = 0.0;
  double accidental_rate_hz = 0.0;
  double car = 0.0;
  bool car_infinite = false;
  double mu = 0.0;
  double eta_h = 0.0;
  double eta_s = 0.0;
  double g2 = 0.0;
  bool g2_valid = false;
  std::int64_t delay_ps = 0;
  std::vector<std::uint64_t> per_bin_herald_counts;  // chronological bin 1..m
};

// Aggregate singles, coincidences, accidentals and the calibration inversion.
// Throws when the stream is too sparse to calibrate (no coincidences).
CountsSummary analyze(const TagStream& stream, const AnalysisConfig& cfg);

}  // namespace muxloop::tags
