#include "muxloop/fsm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace muxloop::fsm {

StepResult step(const FsmState& state, const FsmEvent& event,
                const FsmTiming& timing) {
  using Kind = FsmEvent::Kind;
  StepResult r;
  r.next = state;

  switch (event.kind) {
    case Kind::HeraldClick: {
      if (event.bin < 1 || event.bin > timing.m) {
        throw std::domain_error("fsm::step: herald bin out of range");
      }
      if (state.phase == Phase::Idle) {
        r.next = {Phase::Storing, timing.m - event.bin + 1};
        r.command = SwitchCommand{SwitchAction::CoupleIn,
                                  event.time_ps + timing.latency_ps,
                                  timing.pulse_width_ps};
      }
      // later heralds are ignored: first-photon policy
      break;
    }
    case Kind::LoopTick: {
      if (state.phase == Phase::Storing && state.remaining_round_trips > 0) {
        r.next = {Phase::Storing, state.remaining_round_trips - 1};
        r.command = SwitchCommand{SwitchAction::HoldLoop, event.time_ps, 0};
      }
      break;
    }
    case Kind::OutputSlot: {
      if (state.phase == Phase::Idle) {
        r.command = SwitchCommand{SwitchAction::Rest, event.time_ps, 0};
      } else if (state.phase == Phase::Storing) {
        if (state.remaining_round_trips > 1) {
          throw std::logic_error(
              "fsm::step: output slot reached with round trips outstanding");
        }
        r.next = {Phase::Releasing, 0};
        r.command = SwitchCommand{SwitchAction::CoupleOut, event.time_ps,
                                  timing.pulse_width_ps};
      }
      break;
    }
    case Kind::Noop: {
      if (state.phase == Phase::Releasing) r.next = {Phase::Idle, 0};
      break;
    }
  }
  return r;
}

namespace {

std::vector<FsmEvent> cycle_events(const std::vector<int>& herald_bins,
                                   const FsmTiming& t) {
  std::vector<FsmEvent> events;
  std::vector<int> bins = herald_bins;
  std::sort(bins.begin(), bins.end());
  for (int j : bins) {
    if (j < 1 || j > t.m) {
      throw std::domain_error("fsm: herald bin out of range");
    }
    events.push_back({FsmEvent::Kind::HeraldClick, j, (j - 1) * t.tau_ps});
  }
  if (!bins.empty()) {
    const int first = bins.front();
    const int k = t.m - first + 1;
    // pass completions while the photon stays in the loop
    for (int i = 1; i < k; ++i) {
      events.push_back({FsmEvent::Kind::LoopTick, 0,
                        (first - 1) * t.tau_ps + t.delay_ps + i * t.tau_ps});
    }
  }
  events.push_back({FsmEvent::Kind::OutputSlot, 0, t.output_slot_ps()});
  events.push_back(
      {FsmEvent::Kind::Noop, 0, t.output_slot_ps() + t.pulse_width_ps});
  std::stable_sort(events.begin(), events.end(),
                   [](const FsmEvent& a, const FsmEvent& b) {
                     if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
                     return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                   });
  return events;
}

}  // namespace

FsmTrace run_cycle(const std::vector<int>& herald_bins, const FsmTiming& timing) {
  timing.validate();
  FsmTrace trace;
  FsmState state;
  for (const FsmEvent& ev : cycle_events(herald_bins, timing)) {
    const StepResult r = step(state, ev, timing);
    trace.push_back({ev.time_ps, ev, state, r.next, r.command});
    state = r.next;
  }
  return trace;
}

int pick_stored_bin(const std::vector<int>& herald_bins, const FsmTiming& timing) {
  FsmState state;
  int stored = 0;
  for (int j : herald_bins) {
    const FsmEvent ev{FsmEvent::Kind::HeraldClick, j, (j - 1) * timing.tau_ps};
    const StepResult r = step(state, ev, timing);
    if (state.phase == Phase::Idle && r.next.phase == Phase::Storing) {
      stored = j;
    }
    state = r.next;
  }
  return stored;
}

std::vector<Violation> validate_trace(const FsmTrace& trace,
                                      const FsmTiming& timing) {
  std::vector<Violation> v;

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceEntry& e = trace[i];
    if (i > 0 && !(e.before == trace[i - 1].after)) {
      v.push_back({Violation::Kind::BadTransition, e.time_ps,
                   "state does not chain from previous entry"});
    }
    try {
      const StepResult r = step(e.before, e.event, timing);
      if (!(r.next == e.after) || r.command != e.command) {
        v.push_back({Violation::Kind::BadTransition, e.time_ps,
                     "recorded transition disagrees with the relation"});
      }
    } catch (const std::logic_error&) {
      v.push_back({Violation::Kind::EarlyRelease, e.time_ps,
                   "output slot while round trips outstanding"});
    }
  }

  std::vector<SwitchCommand> pulses;
  int couple_out_count = 0;
  for (const TraceEntry& e : trace) {
    if (!e.command) continue;
    const SwitchAction a = e.command->action;
    if (a == SwitchAction::CoupleIn || a == SwitchAction::CoupleOut) {
      pulses.push_back(*e.command);
      if (a == SwitchAction::CoupleOut) ++couple_out_count;
    }
  }
  std::sort(pulses.begin(), pulses.end(),
            [](const SwitchCommand& a, const SwitchCommand& b) {
              return a.at_time_ps < b.at_time_ps;
            });

  for (const SwitchCommand& p : pulses) {
    if (p.width_ps < timing.min_pulse_ps) {
      v.push_back({Violation::Kind::PulseWidth, p.at_time_ps,
                   "actuation pulse shorter than the short-pulse capability"});
    }
  }
  for (std::size_t i = 1; i < pulses.size(); ++i) {
    const std::int64_t gap =
        pulses[i].at_time_ps - (pulses[i - 1].at_time_ps + pulses[i - 1].width_ps);
    if (gap < timing.rise_fall_ps) {
      v.push_back({Violation::Kind::RiseFall, pulses[i].at_time_ps,
                   "actuation edges closer than the rise/fall time"});
    }
  }
  if (couple_out_count > 1) {
    v.push_back({Violation::Kind::DoubleRelease,
                 pulses.empty() ? 0 : pulses.back().at_time_ps,
                 "more than one release in a cycle"});
  }
  if (timing.cycle_ps > 0 && !pulses.empty()) {
    const double pairs = pulses.size() / 2.0;
    const double rate = pairs / (static_cast<double>(timing.cycle_ps) * 1e-12);
    if (rate > timing.max_actuation_pair_hz * (1.0 + 1e-9)) {
      v.push_back({Violation::Kind::ActuationRate, pulses.back().at_time_ps,
                   "average actuation rate above the switch limit"});
    }
  }
  return v;
}

std::vector<bool> pulse_pick_pattern(double laser_hz, int m, double tau_ns,
                                     double window_ns) {
  if (!(laser_hz > 0.0) || m < 1 || !(tau_ns > 0.0) || !(window_ns > 0.0)) {
    throw std::invalid_argument("pulse_pick_pattern: bad parameters");
  }
  const double period_ns = 1e9 / laser_hz;
  const double stride_f = tau_ns / period_ns;
  const long long stride = std::llround(stride_f);
  if (stride < 1 || std::abs(stride_f - static_cast<double>(stride)) > 1e-6) {
    throw std::invalid_argument(
        "pulse_pick_pattern: tau must be a multiple of the laser period");
  }
  if (m * tau_ns > window_ns * (1.0 + 1e-9)) {
    throw CapacityError("pulse_pick_pattern: m * tau exceeds the pick window");
  }
  const long long n_pulses = std::llround(window_ns / period_ns);
  std::vector<bool> mask(static_cast<std::size_t>(n_pulses), false);
  for (int i = 0; i < m; ++i) {
    mask[static_cast<std::size_t>(i) * static_cast<std::size_t>(stride)] = true;
  }
  return mask;
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Storing: return "storing";
    case Phase::Releasing: return "releasing";
  }
  return "?";
}

const char* to_string(SwitchAction a) {
  switch (a) {
    case SwitchAction::CoupleIn: return "couple_in";
    case SwitchAction::HoldLoop: return "hold_loop";
    case SwitchAction::CoupleOut: return "couple_out";
    case SwitchAction::Rest: return "rest";
  }
  return "?";
}

const char* to_string(FsmEvent::Kind k) {
  switch (k) {
    case FsmEvent::Kind::HeraldClick: return "herald";
    case FsmEvent::Kind::LoopTick: return "loop_tick";
    case FsmEvent::Kind::OutputSlot: return "output_slot";
    case FsmEvent::Kind::Noop: return "noop";
  }
  return "?";
}

const char* to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::BadTransition: return "BadTransition";
    case Violation::Kind::EarlyRelease: return "EarlyRelease";
    case Violation::Kind::RiseFall: return "RiseFall";
    case Violation::Kind::PulseWidth: return "PulseWidth";
    case Violation::Kind::ActuationRate: return "ActuationRate";
    case Violation::Kind::DoubleRelease: return "DoubleRelease";
  }
  return "?";
}

}  // namespace muxloop::fsm
