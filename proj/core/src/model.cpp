#include "muxloop/model.hpp"

#include <algorithm>
#include <cmath>

namespace muxloop::model {

namespace {

constexpr double kTailTarget = 1e-12;
constexpr int kHardCap = 64;

}  // namespace

NumberDistribution pair_number_distribution(const PhotonStatistics& stats,
                                            int n_max) {
  stats.validate();
  if (n_max < 0) {
    throw std::invalid_argument("pair_number_distribution: n_max must be >= 0");
  }
  NumberDistribution out;
  out.p.resize(static_cast<std::size_t>(n_max) + 1);
  if (stats.mu == 0.0) {
    out.p[0] = 1.0;
    out.tail = 0.0;
    return out;
  }
  double sum = 0.0;
  if (stats.law == PhotonLaw::Thermal) {
    const double ratio = stats.mu / (1.0 + stats.mu);
    double pn = 1.0 / (1.0 + stats.mu);
    for (int n = 0; n <= n_max; ++n) {
      out.p[static_cast<std::size_t>(n)] = pn;
      sum += pn;
      pn *= ratio;
    }
  } else {
    double pn = std::exp(-stats.mu);
    for (int n = 0; n <= n_max; ++n) {
      out.p[static_cast<std::size_t>(n)] = pn;
      sum += pn;
      pn *= stats.mu / static_cast<double>(n + 1);
    }
  }
  out.tail = std::max(0.0, 1.0 - sum);
  return out;
}

int adaptive_n_max(const PhotonStatistics& stats) {
  stats.validate();
  if (stats.mu == 0.0) return 0;
  for (int n_max = 4; n_max < kHardCap; n_max *= 2) {
    if (pair_number_distribution(stats, n_max).tail < kTailTarget) {
      // shrink back to the smallest n_max that still meets the target
      int lo = n_max / 2, hi = n_max;
      while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (pair_number_distribution(stats, mid).tail < kTailTarget) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
      return lo;
    }
  }
  return kHardCap;
}

double herald_click_prob(const PhotonStatistics& stats, double eta_h) {
  stats.validate();
  if (!(eta_h >= 0.0 && eta_h <= 1.0)) {
    throw std::domain_error("herald_click_prob: eta_h must be in [0, 1]");
  }
  if (stats.mu == 0.0 || eta_h == 0.0) return 0.0;
  if (stats.law == PhotonLaw::Thermal) {
    const double x = stats.mu * eta_h;
    return x / (1.0 + x);
  }
  return -std::expm1(-stats.mu * eta_h);
}

FirstFire first_fire_distribution(double q, int m) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::domain_error("first_fire_distribution: q must be in [0, 1]");
  }
  if (m < 1) throw std::domain_error("first_fire_distribution: m must be >= 1");
  FirstFire out;
  out.per_bin.resize(static_cast<std::size_t>(m));
  double miss = 1.0;  // (1-q)^(j-1)
  for (int j = 0; j < m; ++j) {
    out.per_bin[static_cast<std::size_t>(j)] = miss * q;
    miss *= 1.0 - q;
  }
  out.no_fire = miss;
  return out;
}

int stored_round_trips(int j, int m) {
  if (m < 1 || j < 1 || j > m) {
    throw std::domain_error("stored_round_trips: need 1 <= j <= m");
  }
  return m - j + 1;
}

double joint_click_survival(const PhotonStatistics& stats, double eta_h,
                            double t_signal) {
  stats.validate();
  if (!(eta_h >= 0.0 && eta_h <= 1.0) || !(t_signal >= 0.0 && t_signal <= 1.0)) {
    throw std::domain_error("joint_click_survival: transmissions in [0, 1]");
  }
  if (stats.mu == 0.0) return 0.0;
  const int n_max = adaptive_n_max(stats);
  const NumberDistribution dist = pair_number_distribution(stats, n_max);
  double acc = 0.0;
  double miss_h = 1.0;  // (1-eta_h)^n
  double miss_s = 1.0;  // (1-t_signal)^n
  for (int n = 0; n <= n_max; ++n) {
    acc += dist.p[static_cast<std::size_t>(n)] * (1.0 - miss_h) * (1.0 - miss_s);
    miss_h *= 1.0 - eta_h;
    miss_s *= 1.0 - t_signal;
  }
  return acc;
}

double multiplexed_coincidence_prob(const PhotonStatistics& stats,
                                    const ChannelModel& channels, int m) {
  stats.validate();
  channels.validate();
  if (m < 1) throw std::domain_error("multiplexed_coincidence_prob: m >= 1");
  if (stats.mu == 0.0) return 0.0;
  const double q = herald_click_prob(stats, channels.eta_h);
  const double b = channels.round_trip_transmission();
  double acc = 0.0;
  double miss = 1.0;  // (1-q)^(j-1)
  for (int j = 1; j <= m; ++j) {
    const int k = stored_round_trips(j, m);
    const double t = channels.eta_s_prime * std::pow(b, k);
    acc += miss * joint_click_survival(stats, channels.eta_h, t);
    miss *= 1.0 - q;
  }
  return acc;
}

double enhancement(const PhotonStatistics& stats, const ChannelModel& channels,
                   int m) {
  const double base = multiplexed_coincidence_prob(stats, channels, 1);
  if (base <= 0.0) {
    throw std::domain_error("enhancement: p_m(1) = 0, ratio undefined");
  }
  if (m == 1) return 1.0;
  return multiplexed_coincidence_prob(stats, channels, m) / base;
}

Rates output_rates(const PhotonStatistics& stats, const ChannelModel& channels,
                   const MuxConfig& cfg) {
  cfg.validate();
  Rates r;
  r.x_b_hz = cfg.clock_hz * multiplexed_coincidence_prob(stats, channels, 1);
  r.x_m_hz = cfg.clock_hz * multiplexed_coincidence_prob(stats, channels, cfg.m);
  return r;
}

double asymptotic_limit(const ChannelModel& channels,
                        const PhotonStatistics& stats, bool lossless_switch) {
  stats.validate();
  channels.validate();
  const double q = herald_click_prob(stats, channels.eta_h);
  if (q == 0.0) return 0.0;
  if (lossless_switch || channels.loss_db_per_round_trip == 0.0) {
    return channels.eta_s_prime;
  }
  const double b = channels.round_trip_transmission();
  double acc = 0.0;
  for (int k = 1; k <= 100000; ++k) {
    const double c =
        joint_click_survival(stats, channels.eta_h, channels.eta_s_prime * std::pow(b, k));
    acc += c;
    if (c < acc * 1e-16) break;
  }
  return acc;
}

double herald_prob_at_least_one(double q, int m) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::domain_error("herald_prob_at_least_one: q must be in [0, 1]");
  }
  if (m < 1) throw std::domain_error("herald_prob_at_least_one: m >= 1");
  return 1.0 - std::pow(1.0 - q, m);
}

Calibration calibrate_mu(double c_hz, double s_h_hz, double s_s_hz,
                         double pulse_rate_hz) {
  if (!(c_hz > 0.0) || !(s_h_hz > 0.0) || !(s_s_hz > 0.0) ||
      !(pulse_rate_hz > 0.0)) {
    throw std::invalid_argument("calibrate_mu: all rates must be > 0");
  }
  if (c_hz > std::min(s_h_hz, s_s_hz) * (1.0 + 1e-9)) {
    throw std::domain_error(
        "calibrate_mu: coincidences exceed singles, counts inconsistent");
  }
  Calibration cal;
  cal.mu = s_h_hz * s_s_hz / (c_hz * pulse_rate_hz);
  cal.eta_h = c_hz / s_s_hz;
  cal.eta_s = c_hz / s_h_hz;
  return cal;
}

ForwardRates forward_rates(double mu, double eta_h, double eta_s,
                           double pulse_rate_hz) {
  ForwardRates fr;
  fr.s_h_hz = pulse_rate_hz * mu * eta_h;
  fr.s_s_hz = pulse_rate_hz * mu * eta_s;
  fr.c_hz = pulse_rate_hz * mu * eta_h * eta_s;
  return fr;
}

double heralded_g2(const PhotonStatistics& stats, double eta_h) {
  stats.validate();
  if (!(eta_h >= 0.0 && eta_h <= 1.0)) {
    throw std::domain_error("heralded_g2: eta_h must be in [0, 1]");
  }
  if (stats.mu == 0.0) return 0.0;
  const int n_max = std::max(adaptive_n_max(stats), 16);
  const NumberDistribution dist = pair_number_distribution(stats, n_max);
  // eta_h -> 0 limit: the click weight 1-(1-eta)^n tends to n*eta, so the
  // heralded law becomes the size-biased one.
  const bool blind_limit = eta_h < 1e-12;
  double norm = 0.0, m1 = 0.0, m2 = 0.0;
  double miss = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    const double w =
        dist.p[static_cast<std::size_t>(n)] *
        (blind_limit ? static_cast<double>(n) : (1.0 - miss));
    norm += w;
    m1 += w * n;
    m2 += w * n * (n - 1.0);
    miss *= 1.0 - eta_h;
  }
  if (norm <= 0.0 || m1 <= 0.0) return 0.0;
  m1 /= norm;
  m2 /= norm;
  return m2 / (m1 * m1);
}

double g2_singles_convention(const PhotonStatistics& stats) {
  stats.validate();
  return stats.mu;
}

TopologyComparison topology_compare(int m, double per_pass_loss_db) {
  if (m < 1) throw std::domain_error("topology_compare: m must be >= 1");
  if (!(per_pass_loss_db >= 0.0)) {
    throw std::domain_error("topology_compare: loss must be >= 0 dB");
  }
  TopologyComparison t;
  t.loop_avg_passes = (m + 1) / 2.0;
  int passes = 0;
  while ((1 << passes) < m) ++passes;  // ceil(log2 m), 0 for m = 1
  t.tree_passes = passes;
  t.loop_avg_transmission = std::pow(10.0, -t.loop_avg_passes * per_pass_loss_db / 10.0);
  t.tree_transmission = std::pow(10.0, -t.tree_passes * per_pass_loss_db / 10.0);
  return t;
}

ArrivalOverlap arrival_offset_and_overlap(int k1, int k2, const MuxConfig& cfg) {
  if (k1 < 1 || k2 < 1) {
    throw std::domain_error("arrival_offset_and_overlap: round trips >= 1");
  }
  cfg.validate();
  ArrivalOverlap out;
  out.offset_ps = std::abs(k1 - k2) * cfg.delta_tau_ns * 1e3;
  if (out.offset_ps == 0.0) {
    out.overlap = 1.0;
  } else {
    const double ratio = out.offset_ps / cfg.coherence_ps;
    out.overlap = std::exp(-ratio * ratio / 4.0);
  }
  return out;
}

AnalyticResult solve(const PhotonStatistics& stats, const ChannelModel& channels,
                     const MuxConfig& cfg) {
  cfg.validate();
  AnalyticResult r;
  r.q = herald_click_prob(stats, channels.eta_h);
  r.p_h = herald_prob_at_least_one(r.q, cfg.m);
  r.first_fire = first_fire_distribution(r.q, cfg.m);
  r.p_m = multiplexed_coincidence_prob(stats, channels, cfg.m);
  const double base = multiplexed_coincidence_prob(stats, channels, 1);
  r.enhancement = base > 0.0 ? r.p_m / base : 1.0;
  r.x_b_hz = cfg.clock_hz * base;
  r.x_m_hz = cfg.clock_hz * r.p_m;
  return r;
}

}  // namespace muxloop::model
