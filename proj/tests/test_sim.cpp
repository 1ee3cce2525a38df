#include <cmath>

#include <doctest.h>

#include "muxloop/model.hpp"
#include "muxloop/sim.hpp"

using namespace muxloop;

namespace {

sim::SimConfig reference_config(std::uint64_t cycles, std::uint64_t seed) {
  sim::SimConfig cfg;
  cfg.cycles = cycles;
  cfg.seed = seed;
  cfg.stats = {PhotonLaw::Thermal, 0.009};
  cfg.channels = {0.145, 0.143, 1.0};
  return cfg;
}

double standard_error(double p, std::uint64_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

TEST_CASE("Monte Carlo agrees with the closed form within 4 standard errors") {
  struct Case {
    PhotonLaw law;
    double mu, eta_h, eta_s_prime, loss_db;
    int m;
  };
  const Case cases[] = {
      {PhotonLaw::Thermal, 0.009, 0.145, 0.143, 1.0, 11},
      {PhotonLaw::Thermal, 0.18, 0.145, 0.143, 1.0, 11},
      {PhotonLaw::Poisson, 0.009, 0.145, 0.143, 1.0, 5},
      {PhotonLaw::Thermal, 0.05, 0.5, 0.6, 0.5, 3},
  };
  std::uint64_t seed = 11;
  for (const Case& c : cases) {
    sim::SimConfig cfg = reference_config(1'000'000, seed++);
    cfg.stats = {c.law, c.mu};
    cfg.channels = {c.eta_h, c.eta_s_prime, c.loss_db};
    cfg.mux.m = c.m;
    const sim::SimSummary s = sim::simulate_cycles(cfg);
    const double p_m =
        model::multiplexed_coincidence_prob(cfg.stats, cfg.channels, c.m);
    CHECK(std::abs(s.p_m_hat - p_m) < 4.0 * standard_error(p_m, cfg.cycles));

    const double q = model::herald_click_prob(cfg.stats, c.eta_h);
    const double p_h = model::herald_prob_at_least_one(q, c.m);
    CHECK(std::abs(s.p_h_hat - p_h) < 4.0 * standard_error(p_h, cfg.cycles));
  }
}

TEST_CASE("first-fire histogram matches the geometric law") {
  sim::SimConfig cfg = reference_config(2'000'000, 5);
  const sim::SimSummary s = sim::simulate_cycles(cfg);
  const double q = model::herald_click_prob(cfg.stats, cfg.channels.eta_h);
  const auto ff = model::first_fire_distribution(q, cfg.mux.m);
  REQUIRE(s.first_fire_counts.size() == 11);
  for (int j = 0; j < 11; ++j) {
    const double expected = ff.per_bin[static_cast<std::size_t>(j)];
    const double observed = static_cast<double>(s.first_fire_counts[j]) /
                            static_cast<double>(cfg.cycles);
    CHECK(std::abs(observed - expected) <
          4.0 * standard_error(expected, cfg.cycles));
  }
}

TEST_CASE("determinism and shard independence") {
  const sim::SimConfig cfg = reference_config(300'000, 99);

  const sim::SimSummary a = sim::simulate_cycles(cfg, 1);
  const sim::SimSummary b = sim::simulate_cycles(cfg, 7);
  CHECK(a.herald_cycles == b.herald_cycles);
  CHECK(a.output_cycles == b.output_cycles);
  CHECK(a.signal_photons == b.signal_photons);
  CHECK(a.first_fire_counts == b.first_fire_counts);

  const sim::TagData t1 = sim::generate_timetags(cfg);
  const sim::TagData t2 = sim::generate_timetags(cfg);
  CHECK(t1.duration_ps == t2.duration_ps);
  REQUIRE(t1.events.size() == t2.events.size());
  CHECK(t1.events == t2.events);

  sim::SimConfig reseeded = cfg;
  reseeded.seed = 100;
  const sim::SimSummary c = sim::simulate_cycles(reseeded, 1);
  CHECK(a.herald_cycles != c.herald_cycles);  // seeds actually matter
}

TEST_CASE("per-cycle outcomes conserve photons and bookkeeping") {
  sim::SimConfig cfg = reference_config(100'000, 3);
  cfg.stats.mu = 0.18;  // denser traffic exercises multi-pair bins
  const sim::SimResult r = sim::simulate_outcomes(cfg);
  REQUIRE(r.outcomes.size() == cfg.cycles);
  const std::int64_t period_ps = 2'000'000;
  for (const sim::TrialOutcome& o : r.outcomes) {
    if (o.herald_detected) {
      CHECK(o.fired_bin >= 1);
      CHECK(o.fired_bin <= cfg.mux.m);
      CHECK(o.round_trips == cfg.mux.m - o.fired_bin + 1);
      CHECK(o.signal_photons_out <= o.pairs_in_fired_bin);
      CHECK(o.output_offset_ps == o.round_trips * 1700);
      CHECK(o.output_offset_ps < period_ps);
    } else {
      CHECK(o.fired_bin == 0);
      CHECK(o.signal_photons_out == 0);
    }
  }
  CHECK(r.summary.p_m_hat ==
        doctest::Approx(sim::simulate_cycles(cfg).p_m_hat));
}

TEST_CASE("degenerate sources") {
  SUBCASE("dark source yields nothing") {
    sim::SimConfig cfg = reference_config(10'000, 1);
    cfg.stats.mu = 0.0;
    const sim::SimSummary s = sim::simulate_cycles(cfg);
    CHECK(s.herald_cycles == 0);
    CHECK(s.output_cycles == 0);
    CHECK(sim::generate_timetags(cfg).events.empty());
  }

  SUBCASE("saturated source fires every cycle") {
    sim::SimConfig cfg = reference_config(5'000, 1);
    cfg.stats = {PhotonLaw::Poisson, 25.0};
    cfg.channels = {1.0, 1.0, 0.0};
    cfg.mux.m = 1;
    const sim::SimSummary s = sim::simulate_cycles(cfg);
    CHECK(s.herald_cycles == cfg.cycles);
    CHECK(s.output_cycles == cfg.cycles);
  }
}

TEST_CASE("time tags place signals at the storage-dependent offset") {
  // force the herald into bin 1 of 3: k = 3 round trips, offset 3 * 1.7 ns
  sim::SimConfig cfg = reference_config(200, 21);
  cfg.stats = {PhotonLaw::Poisson, 30.0};
  cfg.channels = {1.0, 1.0, 0.0};
  cfg.mux.m = 3;
  const sim::TagData tags = sim::generate_timetags(cfg);
  const std::int64_t slot_ps = 3 * 125'000 + 200'000;
  const std::int64_t period_ps = 2'000'000;
  bool saw_signal = false;
  for (const sim::EventRecord& e : tags.events) {
    if (e.channel == sim::Channel::Signal) {
      saw_signal = true;
      CHECK((e.timestamp_ps - slot_ps - 5100) % period_ps == 0);
    }
    if (e.channel == sim::Channel::Herald) {
      const std::int64_t local = e.timestamp_ps % period_ps;
      CHECK(local % 125'000 == 0);  // on the bin grid
      CHECK(local < 3 * 125'000);
    }
  }
  CHECK(saw_signal);
}

TEST_CASE("tag stream is sorted and inside the run") {
  sim::SimConfig cfg = reference_config(50'000, 8);
  cfg.dark_rate_hz = 200.0;
  cfg.dead_time_ns = 30.0;
  const sim::TagData tags = sim::generate_timetags(cfg);
  CHECK(tags.duration_ps == 50'000 * 2'000'000LL);
  std::int64_t prev = -1;
  for (const sim::EventRecord& e : tags.events) {
    CHECK(e.timestamp_ps >= prev);
    prev = e.timestamp_ps;
    CHECK(e.timestamp_ps >= 0);
    CHECK(e.timestamp_ps < tags.duration_ps);
  }
}

TEST_CASE("dead time prunes close pairs per channel") {
  sim::SimConfig cfg = reference_config(100'000, 8);
  cfg.dark_rate_hz = 50'000.0;
  cfg.dead_time_ns = 1'000.0;
  const sim::TagData tags = sim::generate_timetags(cfg);
  std::int64_t prev_herald = -10'000'000;
  for (const sim::EventRecord& e : tags.events) {
    if (e.channel != sim::Channel::Herald) continue;
    CHECK(e.timestamp_ps - prev_herald >= 1'000'000);
    prev_herald = e.timestamp_ps;
  }
}

TEST_CASE("heralded HBT estimate tracks the moment formula") {
  sim::SimConfig cfg = reference_config(2'000'000, 17);
  cfg.stats = {PhotonLaw::Thermal, 0.05};
  cfg.channels = {1.0, 1.0, 0.0};
  cfg.mux.m = 1;
  cfg.hbt_split = true;
  const sim::G2Estimate g = sim::estimate_g2(cfg);
  CHECK(!g.low_stats);
  const double expected = model::heralded_g2(cfg.stats, 1.0);
  CHECK(g.g2 == doctest::Approx(expected).epsilon(0.25));
  CHECK(g.g2 > 0.0);

  sim::SimConfig no_split = cfg;
  no_split.hbt_split = false;
  CHECK_THROWS_AS(sim::estimate_g2(no_split), std::invalid_argument);

  sim::SimConfig dark = cfg;
  dark.stats.mu = 0.0;
  CHECK_THROWS_AS(sim::estimate_g2(dark), std::domain_error);
}

TEST_CASE("wilson interval") {
  double lo = -1.0, hi = -1.0;
  sim::wilson_interval(0, 0, &lo, &hi);
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);

  sim::wilson_interval(50, 100, &lo, &hi);
  CHECK(lo > 0.40);
  CHECK(hi < 0.60);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);

  sim::wilson_interval(0, 100, &lo, &hi);
  CHECK(lo == 0.0);
  CHECK(hi > 0.0);
}

TEST_CASE("configuration guards") {
  sim::SimConfig cfg = reference_config(10, 1);
  cfg.mux.m = 65;
  cfg.mux.clock_hz = 100e3;
  CHECK_THROWS_AS(cfg.validate(), CapacityError);

  sim::SimConfig late = reference_config(10, 1);
  late.latency_ns = 500.0;
  CHECK_THROWS_AS(late.validate(), std::invalid_argument);

  sim::SimConfig big = reference_config(3'000'000, 1);
  CHECK_THROWS_AS(sim::simulate_outcomes(big), CapacityError);
}
