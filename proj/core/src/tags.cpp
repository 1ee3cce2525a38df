#include "muxloop/tags.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "muxloop/model.hpp"

namespace muxloop::tags {

namespace {
const std::vector<std::int64_t> kEmpty;
}

const std::vector<std::int64_t>& TagStream::channel(int id) const {
  const auto it = channels.find(id);
  return it == channels.end() ? kEmpty : it->second;
}

void TagStream::sort_channels() {
  for (auto& [id, tags] : channels) std::sort(tags.begin(), tags.end());
}

TagStream from_events(const std::vector<sim::EventRecord>& events,
                      std::int64_t duration_ps) {
  TagStream s;
  s.duration_ps = duration_ps;
  for (const sim::EventRecord& e : events) {
    s.channels[static_cast<int>(e.channel)].push_back(e.timestamp_ps);
  }
  s.sort_channels();
  return s;
}

SinglesCount count_singles(const TagStream& stream, int channel) {
  if (stream.duration_ps <= 0) {
    throw std::invalid_argument("count_singles: stream duration must be > 0");
  }
  SinglesCount sc;
  sc.count = stream.channel(channel).size();
  sc.rate_hz = static_cast<double>(sc.count) /
               (static_cast<double>(stream.duration_ps) * 1e-12);
  return sc;
}

namespace {

CoincidenceResult match_sorted(const std::vector<std::int64_t>& heralds,
                               const std::vector<std::int64_t>& signals,
                               const CoincidenceWindow& window) {
  if (window.width_ps <= 0) {
    throw std::invalid_argument("count_coincidences: window width must be > 0");
  }
  const std::int64_t half = window.width_ps / 2;
  CoincidenceResult r;
  std::size_t i = 0, j = 0;
  while (i < heralds.size() && j < signals.size()) {
    const std::int64_t h = heralds[i];
    const std::int64_t s = signals[j] - window.delay_ps;
    if (s < h - half) {
      ++j;
    } else if (s > h + half) {
      ++i;
    } else {
      ++r.count;
      r.pairs.emplace_back(h, signals[j]);
      ++i;
      ++j;
    }
  }
  return r;
}

}  // namespace

CoincidenceResult count_coincidences(const TagStream& stream, int herald_ch,
                                     int signal_ch,
                                     const CoincidenceWindow& window) {
  return match_sorted(stream.channel(herald_ch), stream.channel(signal_ch),
                      window);
}

AccidentalsResult accidentals_and_car(const TagStream& stream, int herald_ch,
                                      int signal_ch,
                                      const CoincidenceWindow& window,
                                      int offset_multiple,
                                      std::int64_t period_ps) {
  if (offset_multiple == 0 || period_ps <= 0) {
    throw std::invalid_argument(
        "accidentals_and_car: need a non-zero period offset");
  }
  const std::uint64_t c = count_coincidences(stream, herald_ch, signal_ch, window).count;
  CoincidenceWindow shifted = window;
  shifted.delay_ps += offset_multiple * period_ps;
  AccidentalsResult r;
  r.accidental_count =
      count_coincidences(stream, herald_ch, signal_ch, shifted).count;
  const double duration_s = static_cast<double>(stream.duration_ps) * 1e-12;
  r.accidental_rate_hz = static_cast<double>(r.accidental_count) / duration_s;
  if (r.accidental_count == 0) {
    r.car_infinite = true;
    r.car = std::numeric_limits<double>::infinity();
  } else {
    r.car = static_cast<double>(c) / static_cast<double>(r.accidental_count);
  }
  return r;
}

std::int64_t estimate_delay(const TagStream& stream, int herald_ch,
                            int signal_ch, std::int64_t bin_ps) {
  const auto& heralds = stream.channel(herald_ch);
  const auto& signals = stream.channel(signal_ch);
  if (heralds.empty() || signals.empty()) {
    throw std::domain_error("estimate_delay: empty channel");
  }
  std::unordered_map<std::int64_t, std::uint64_t> hist;
  const std::size_t cap = 200000;
  const std::size_t stride = std::max<std::size_t>(1, heralds.size() / cap);
  for (std::size_t i = 0; i < heralds.size(); i += stride) {
    const std::int64_t h = heralds[i];
    auto it = std::lower_bound(signals.begin(), signals.end(), h);
    // nearest signal at or after h; forward delays only
    if (it == signals.end()) continue;
    const std::int64_t diff = *it - h;
    hist[diff / bin_ps] += 1;
  }
  std::int64_t best = 0;
  std::uint64_t best_n = 0;
  for (const auto& [q, n] : hist) {
    if (n > best_n) {
      best_n = n;
      best = q;
    }
  }
  return best * bin_ps + bin_ps / 2;
}

namespace {

// Fold heralds onto their cycle's nominal output slot, one marker per cycle.
std::vector<std::int64_t> fold_heralds(const std::vector<std::int64_t>& heralds,
                                       std::int64_t period_ps,
                                       std::int64_t slot_ps) {
  std::vector<std::int64_t> folded;
  std::int64_t last_cycle = -1;
  for (std::int64_t t : heralds) {
    const std::int64_t cycle = t / period_ps;
    if (cycle != last_cycle) {
      folded.push_back(cycle * period_ps + slot_ps);
      last_cycle = cycle;
    }
  }
  return folded;
}

// Heralded HBT occupancy per cycle over split detectors.
void hbt_counts(const std::vector<std::int64_t>& heralds,
                const std::vector<std::int64_t>& a,
                const std::vector<std::int64_t>& b, std::int64_t period_ps,
                std::uint64_t* n_h, std::uint64_t* n_ha, std::uint64_t* n_hb,
                std::uint64_t* n_hab) {
  std::size_t ia = 0, ib = 0;
  std::int64_t last_cycle = -1;
  for (std::int64_t t : heralds) {
    const std::int64_t cycle = t / period_ps;
    if (cycle == last_cycle) continue;
    last_cycle = cycle;
    ++*n_h;
    const std::int64_t lo = cycle * period_ps;
    const std::int64_t hi = lo + period_ps;
    while (ia < a.size() && a[ia] < lo) ++ia;
    while (ib < b.size() && b[ib] < lo) ++ib;
    const bool has_a = ia < a.size() && a[ia] < hi;
    const bool has_b = ib < b.size() && b[ib] < hi;
    if (has_a) ++*n_ha;
    if (has_b) ++*n_hb;
    if (has_a && has_b) ++*n_hab;
  }
}

}  // namespace

CountsSummary analyze(const TagStream& stream, const AnalysisConfig& cfg) {
  if (stream.duration_ps <= 0) {
    throw std::invalid_argument("analyze: stream duration must be > 0");
  }
  if (!(cfg.pulse_rate_hz > 0.0) || !(cfg.clock_hz > 0.0) || cfg.m < 1) {
    throw std::invalid_argument("analyze: bad configuration");
  }

  CountsSummary out;
  out.duration_s = static_cast<double>(stream.duration_ps) * 1e-12;
  out.s_h = count_singles(stream, cfg.herald_channel);

  const int ch_a = static_cast<int>(sim::Channel::SignalA);
  const int ch_b = static_cast<int>(sim::Channel::SignalB);
  const bool split = !stream.channel(ch_a).empty() || !stream.channel(ch_b).empty();
  std::vector<std::int64_t> merged_signal;
  if (split && stream.channel(cfg.signal_channel).empty()) {
    const auto& a = stream.channel(ch_a);
    const auto& b = stream.channel(ch_b);
    merged_signal.resize(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), merged_signal.begin());
  }
  const std::vector<std::int64_t>& signals =
      merged_signal.empty() ? stream.channel(cfg.signal_channel) : merged_signal;
  out.s_s.count = signals.size();
  out.s_s.rate_hz = static_cast<double>(signals.size()) / out.duration_s;

  if (out.s_h.count == 0 || out.s_s.count == 0) {
    throw std::domain_error("analyze: no data on herald or signal channel");
  }

  const std::int64_t period_ps =
      std::llround(1e12 / cfg.clock_hz);
  const std::int64_t tau_ps = std::llround(cfg.tau_ns * 1e3);
  const std::int64_t dtau_ps = std::llround(cfg.delta_tau_ns * 1e3);
  const std::int64_t slot_ps =
      cfg.m * tau_ps + std::llround(cfg.delay_ns * 1e3);
  const auto& heralds = stream.channel(cfg.herald_channel);

  TagStream matched;
  matched.duration_ps = stream.duration_ps;
  CoincidenceWindow window;
  if (cfg.folded) {
    matched.channels[0] = fold_heralds(heralds, period_ps, slot_ps);
    matched.channels[1] = signals;
    window.delay_ps = (cfg.m + 1) / 2 * dtau_ps;
    window.width_ps = (cfg.m - 1) * dtau_ps + 2 * cfg.window_ps;
  } else {
    matched.channels[0] = heralds;
    matched.channels[1] = signals;
    window.delay_ps = cfg.delay_override_ps >= 0
                          ? cfg.delay_override_ps
                          : estimate_delay(matched, 0, 1, cfg.window_ps);
    window.width_ps = cfg.window_ps;
  }
  out.delay_ps = window.delay_ps;
  out.coincidences = count_coincidences(matched, 0, 1, window).count;
  out.coincidence_rate_hz = static_cast<double>(out.coincidences) / out.duration_s;

  const AccidentalsResult acc =
      accidentals_and_car(matched, 0, 1, window, 1, period_ps);
  out.accidental_rate_hz = acc.accidental_rate_hz;
  out.car = acc.car;
  out.car_infinite = acc.car_infinite;

  if (out.coincidences == 0) {
    throw std::domain_error("analyze: no coincidences, calibration undefined");
  }
  const model::Calibration cal = model::calibrate_mu(
      out.coincidence_rate_hz, out.s_h.rate_hz, out.s_s.rate_hz,
      cfg.pulse_rate_hz);
  out.mu = cal.mu;
  out.eta_h = cal.eta_h;
  out.eta_s = cal.eta_s;

  if (split) {
    std::uint64_t n_h = 0, n_ha = 0, n_hb = 0, n_hab = 0;
    hbt_counts(heralds, stream.channel(ch_a), stream.channel(ch_b), period_ps,
               &n_h, &n_ha, &n_hb, &n_hab);
    if (n_ha > 0 && n_hb > 0) {
      out.g2 = static_cast<double>(n_hab) * static_cast<double>(n_h) /
               (static_cast<double>(n_ha) * static_cast<double>(n_hb));
      out.g2_valid = true;
    }
  }

  // first herald of each cycle only: the histogram mirrors the first-fire
  // geometric weighting rather than the flat per-bin click rate
  out.per_bin_herald_counts.assign(static_cast<std::size_t>(cfg.m), 0);
  std::int64_t last_cycle = -1;
  for (std::int64_t t : heralds) {
    const std::int64_t cycle = t / period_ps;
    if (cycle == last_cycle) continue;
    last_cycle = cycle;
    std::int64_t bin = (t % period_ps) / tau_ps;
    bin = std::clamp<std::int64_t>(bin, 0, cfg.m - 1);
    out.per_bin_herald_counts[static_cast<std::size_t>(bin)] += 1;
  }
  return out;
}

}  // namespace muxloop::tags
