#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "muxloop/types.hpp"

// Detect-switch-release controller, validated independently of the photon
// physics. All timing is integer picoseconds.
namespace muxloop::fsm {

enum class Phase { Idle, Storing, Releasing };

struct FsmState {
  Phase phase = Phase::Idle;
  int remaining_round_trips = 0;  // meaningful while Storing

  bool operator==(const FsmState&) const = default;
};

enum class SwitchAction { CoupleIn, HoldLoop, CoupleOut, Rest };

struct SwitchCommand {
  SwitchAction action;
  std::int64_t at_time_ps = 0;
  std::int64_t width_ps = 0;  // actuation pulse width; 0 for passive commands

  bool operator==(const SwitchCommand&) const = default;
};

struct FsmEvent {
  enum class Kind { HeraldClick, LoopTick, OutputSlot, Noop };
  Kind kind = Kind::Noop;
  int bin = 0;  // HeraldClick only, chronological 1..m
  std::int64_t time_ps = 0;
};

// Cycle timing derived from the mux geometry plus the switch datasheet
// constraints it must satisfy.
struct FsmTiming {
  int m = 11;
  std::int64_t tau_ps = 125000;
  std::int64_t delay_ps = 200000;     // signal-path fibre delay
  std::int64_t latency_ps = 120000;   // herald-to-switch electronic latency
  std::int64_t pulse_width_ps = 100000;
  std::int64_t cycle_ps = 2000000;
  std::int64_t rise_fall_ps = 8000;
  std::int64_t min_pulse_ps = 80000;
  double max_actuation_pair_hz = 1e6;

  std::int64_t output_slot_ps() const { return m * tau_ps + delay_ps; }

  void validate() const {
    if (m < 1) throw std::domain_error("FsmTiming: m must be >= 1");
    if (latency_ps > delay_ps) {
      throw std::domain_error(
          "FsmTiming: electronic latency exceeds the compensation delay");
    }
    if (output_slot_ps() + pulse_width_ps > cycle_ps) {
      throw CapacityError("FsmTiming: release window exceeds the output cycle");
    }
  }
};

struct StepResult {
  FsmState next;
  std::optional<SwitchCommand> command;
};

// Transition relation. First-photon policy: heralds while Storing or
// Releasing are ignored. OutputSlot with more than one trip outstanding
// signals a timing bug and throws std::logic_error.
StepResult step(const FsmState& state, const FsmEvent& event,
                const FsmTiming& timing);

struct TraceEntry {
  std::int64_t time_ps;
  FsmEvent event;
  FsmState before;
  FsmState after;
  std::optional<SwitchCommand> command;
};
using FsmTrace = std::vector<TraceEntry>;

// Drive one output cycle from its herald pattern: complete trace from Idle
// back to Idle, with exactly one CoupleOut iff at least one herald occurred.
FsmTrace run_cycle(const std::vector<int>& herald_bins, const FsmTiming& timing);

// step()-composed first-photon selection without trace materialisation.
// Returns 0 when no herald fires.
int pick_stored_bin(const std::vector<int>& herald_bins, const FsmTiming& timing);

struct Violation {
  enum class Kind {
    BadTransition,
    EarlyRelease,
    RiseFall,
    PulseWidth,
    ActuationRate,
    DoubleRelease,
  };
  Kind kind;
  std::int64_t time_ps;
  std::string detail;
};

// Empty iff the transition relation holds and every switch datasheet
// constraint (edge spacing, pulse width, actuation rate, single release)
// is satisfied. Violations are data, not errors.
std::vector<Violation> validate_trace(const FsmTrace& trace,
                                      const FsmTiming& timing);

// Pulse-pick mask over one window of the free-running laser: m picks at tau
// spacing. Throws CapacityError when m * tau exceeds the window.
std::vector<bool> pulse_pick_pattern(double laser_hz, int m, double tau_ns,
                                     double window_ns);

const char* to_string(Phase p);
const char* to_string(SwitchAction a);
const char* to_string(FsmEvent::Kind k);
const char* to_string(Violation::Kind k);

}  // namespace muxloop::fsm
