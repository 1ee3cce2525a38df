#pragma once

#include <vector>

#include "muxloop/types.hpp"

// Closed-form engine for all probabilities, rates and limits of the
// switch-and-loop multiplexed source.
namespace muxloop::model {

struct NumberDistribution {
  std::vector<double> p;  // p[n], n = 0..n_max
  double tail;            // mass beyond n_max
};

// p(n) for n = 0..n_max. Thermal: mu^n / (1+mu)^(n+1); Poisson:
// e^-mu mu^n / n!. Tail mass is reported, not folded in.
NumberDistribution pair_number_distribution(const PhotonStatistics& stats,
                                            int n_max);

// Smallest truncation with tail mass < 1e-12, capped at 64.
int adaptive_n_max(const PhotonStatistics& stats);

// Click probability of a non-number-resolving herald detector:
// q = 1 - sum_n p(n) (1 - eta_h)^n.
double herald_click_prob(const PhotonStatistics& stats, double eta_h);

struct FirstFire {
  std::vector<double> per_bin;  // P(first herald in chronological bin j)
  double no_fire;
};

// P(j) = (1-q)^(j-1) q for j = 1..m, plus the (1-q)^m no-fire mass.
FirstFire first_fire_distribution(double q, int m);

// Round-trip-equivalent passes charged to a photon heralded in
// chronological bin j of m: k = m - j + 1. The last bin makes one pass.
int stored_round_trips(int j, int m);

// Joint probability of a herald click and >=1 surviving signal photon when
// both detectors thin the same pair number n independently:
// sum_n p(n) [1-(1-eta_h)^n] [1-(1-t_signal)^n].
double joint_click_survival(const PhotonStatistics& stats, double eta_h,
                            double t_signal);

// Heralded coincidence probability per output cycle,
// p_m = sum_j (1-q)^(j-1) c(j) with the stored signal charged
// eta_s' * eta_rt^(m-j+1).
double multiplexed_coincidence_prob(const PhotonStatistics& stats,
                                    const ChannelModel& channels, int m);

// E = p_m(m) / p_m(1). Throws if p_m(1) = 0.
double enhancement(const PhotonStatistics& stats, const ChannelModel& channels,
                   int m);

struct Rates {
  double x_b_hz;  // base heralded rate, R * p_m(1)
  double x_m_hz;  // multiplexed heralded rate, R * p_m(m)
};
Rates output_rates(const PhotonStatistics& stats, const ChannelModel& channels,
                   const MuxConfig& cfg);

// m -> infinity output probability. With a lossless switch this saturates at
// eta_s' for any q > 0. With a lossy switch it is the convergent sum
// sum_{k>=1} c(k), the first-fire-saturated (low-mu) limit.
double asymptotic_limit(const ChannelModel& channels,
                        const PhotonStatistics& stats, bool lossless_switch);

// p_h = 1 - (1-q)^m.
double herald_prob_at_least_one(double q, int m);

struct Calibration {
  double mu;
  double eta_h;
  double eta_s;
};

// Invert the heralded-source count identities C = R mu eta_h eta_s,
// S_h = R mu eta_h, S_s = R mu eta_s:
// mu = S_h S_s / (C R), eta_h = C / S_s, eta_s = C / S_h.
Calibration calibrate_mu(double c_hz, double s_h_hz, double s_s_hz,
                         double pulse_rate_hz);

struct ForwardRates {
  double c_hz;
  double s_h_hz;
  double s_s_hz;
};

// Low-mu closed-form rates for a calibrated source; the exact inverse of
// calibrate_mu.
ForwardRates forward_rates(double mu, double eta_h, double eta_s,
                           double pulse_rate_hz);

// Heralded second-order correlation from the heralded number distribution
// p(n | click) ~ p(n) [1-(1-eta_h)^n]: g2 = <n(n-1)>_h / <n>_h^2.
// Low-mu expansions: ~4 mu (thermal), ~2 mu (Poisson).
double heralded_g2(const PhotonStatistics& stats, double eta_h);

// The coincidence-to-singles convention g2 ~ mu, kept as an alternative
// estimator alongside the moment-based one.
double g2_singles_convention(const PhotonStatistics& stats);

struct TopologyComparison {
  double loop_avg_passes;    // (m+1)/2
  int tree_passes;           // ceil(log2 m)
  double loop_avg_transmission;
  double tree_transmission;
};
TopologyComparison topology_compare(int m, double per_pass_loss_db);

struct ArrivalOverlap {
  double offset_ps;  // |k1 - k2| * delta_tau
  double overlap;    // Gaussian wavepacket overlap exp(-dt^2 / (4 Tc^2))
};
ArrivalOverlap arrival_offset_and_overlap(int k1, int k2, const MuxConfig& cfg);

struct AnalyticResult {
  double q;            // per-bin herald click probability
  double p_h;          // >=1 herald among m bins
  FirstFire first_fire;
  double p_m;          // heralded coincidence probability per cycle
  double enhancement;  // p_m(m) / p_m(1)
  double x_b_hz;
  double x_m_hz;
};
AnalyticResult solve(const PhotonStatistics& stats, const ChannelModel& channels,
                     const MuxConfig& cfg);

}  // namespace muxloop::model
