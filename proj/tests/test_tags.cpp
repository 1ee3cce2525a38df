#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "muxloop/model.hpp"
#include "muxloop/rng.hpp"
#include "muxloop/sim.hpp"
#include "muxloop/tags.hpp"

using namespace muxloop;

namespace {

tags::TagStream two_channel(std::vector<std::int64_t> h,
                            std::vector<std::int64_t> s,
                            std::int64_t duration_ps) {
  tags::TagStream stream;
  stream.channels[0] = std::move(h);
  stream.channels[1] = std::move(s);
  stream.duration_ps = duration_ps;
  stream.sort_channels();
  return stream;
}

std::vector<std::int64_t> poisson_train(double rate_hz, double duration_s,
                                        std::uint64_t seed) {
  CycleRng rng(seed, 0);
  std::vector<std::int64_t> out;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(rate_hz);
    if (t >= duration_s) break;
    out.push_back(static_cast<std::int64_t>(t * 1e12));
  }
  return out;
}

}  // namespace

TEST_CASE("singles counting") {
  std::vector<std::int64_t> h(1000);
  for (int i = 0; i < 1000; ++i) h[static_cast<std::size_t>(i)] = i * 1'000'000'000LL;
  const auto stream = two_channel(h, {}, 1'000'000'000'000LL);  // 1 s

  const tags::SinglesCount sc = tags::count_singles(stream, 0);
  CHECK(sc.count == 1000);
  CHECK(sc.rate_hz == doctest::Approx(1000.0));

  const tags::SinglesCount empty = tags::count_singles(stream, 1);
  CHECK(empty.count == 0);
  CHECK(empty.rate_hz == 0.0);

  tags::TagStream zero = stream;
  zero.duration_ps = 0;
  CHECK_THROWS_AS(tags::count_singles(zero, 0), std::invalid_argument);
}

TEST_CASE("coincidence matching") {
  SUBCASE("identical timestamps all match") {
    std::vector<std::int64_t> t{100, 5'000, 9'000, 42'000};
    const auto stream = two_channel(t, t, 1'000'000);
    const auto r = tags::count_coincidences(stream, 0, 1, {1'000, 0});
    CHECK(r.count == 4);
    CHECK(r.pairs.size() == 4);
  }

  SUBCASE("offsets beyond the window never match") {
    const auto stream =
        two_channel({0, 10'000, 20'000}, {5'000, 15'000, 25'000}, 1'000'000);
    CHECK(tags::count_coincidences(stream, 0, 1, {1'000, 0}).count == 0);
    // the same offset matched through the delay knob
    CHECK(tags::count_coincidences(stream, 0, 1, {1'000, 5'000}).count == 3);
  }

  SUBCASE("one-to-one: a burst consumes at most one herald") {
    const auto stream = two_channel({0}, {0, 100, 200}, 1'000'000);
    CHECK(tags::count_coincidences(stream, 0, 1, {1'000, 0}).count == 1);
  }

  SUBCASE("symmetric under channel swap with negated delay") {
    const auto h = poisson_train(50'000.0, 0.02, 31);
    const auto s = poisson_train(60'000.0, 0.02, 77);
    const auto stream = two_channel(h, s, 20'000'000'000LL);
    for (const std::int64_t delay : {0LL, 700LL, -1'300LL}) {
      const auto fwd = tags::count_coincidences(stream, 0, 1, {2'000, delay});
      const auto rev = tags::count_coincidences(stream, 1, 0, {2'000, -delay});
      CHECK(fwd.count == rev.count);
    }
  }

  SUBCASE("count is non-decreasing in window width") {
    const auto h = poisson_train(80'000.0, 0.02, 5);
    const auto s = poisson_train(80'000.0, 0.02, 6);
    const auto stream = two_channel(h, s, 20'000'000'000LL);
    std::uint64_t prev = 0;
    for (std::int64_t w = 500; w <= 64'000; w *= 2) {
      const std::uint64_t c = tags::count_coincidences(stream, 0, 1, {w, 0}).count;
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("accidentals and CAR") {
  SUBCASE("uncorrelated trains reproduce the product-rate formula") {
    const double r1 = 200'000.0, r2 = 150'000.0, duration_s = 0.5;
    const auto stream =
        two_channel(poisson_train(r1, duration_s, 1),
                    poisson_train(r2, duration_s, 2),
                    static_cast<std::int64_t>(duration_s * 1e12));
    const std::int64_t w = 10'000;  // 10 ns
    const auto acc =
        tags::accidentals_and_car(stream, 0, 1, {w, 0}, 1, 2'000'000);
    const double expected = r1 * r2 * static_cast<double>(w) * 1e-12;
    CHECK(acc.accidental_rate_hz == doctest::Approx(expected).epsilon(0.15));
    CHECK(acc.car == doctest::Approx(1.0).epsilon(0.2));
  }

  SUBCASE("perfectly correlated sparse trains flag infinite CAR") {
    const auto stream = two_channel({0, 2'000'000, 4'000'000},
                                    {0, 2'000'000, 4'000'000}, 100'000'000);
    const auto acc =
        tags::accidentals_and_car(stream, 0, 1, {1'000, 0}, 1, 1'000'000);
    CHECK(acc.car_infinite);
    CHECK(acc.accidental_count == 0);
  }

  CHECK_THROWS_AS(
      tags::accidentals_and_car(two_channel({0}, {0}, 100), 0, 1, {1'000, 0},
                                0, 1'000),
      std::invalid_argument);
}

TEST_CASE("delay estimation finds the dominant lag") {
  std::vector<std::int64_t> h, s;
  for (int i = 0; i < 4000; ++i) {
    const std::int64_t t = i * 2'000'000LL;
    h.push_back(t);
    s.push_back(t + 326'700);
  }
  const auto stream = two_channel(h, s, 8'000'000'000LL);
  const std::int64_t d = tags::estimate_delay(stream, 0, 1, 1'000);
  CHECK(std::abs(d - 326'700) <= 1'000);
  CHECK_THROWS_AS(tags::estimate_delay(two_channel({}, {0}, 100), 0, 1),
                  std::domain_error);
}

TEST_CASE("analyze closes the loop on an ungated calibration stream") {
  sim::SimConfig cfg;
  cfg.cycles = 2'000'000;
  cfg.seed = 7;
  cfg.stats = {PhotonLaw::Thermal, 0.02};
  cfg.channels = {0.145, 0.143, 1.0};
  cfg.mux.m = 1;
  cfg.gated = false;
  const sim::TagData data = sim::generate_timetags(cfg);
  const tags::TagStream stream = tags::from_events(data.events, data.duration_ps);

  tags::AnalysisConfig ac;
  ac.pulse_rate_hz = 500e3;
  ac.m = 1;
  const tags::CountsSummary out = tags::analyze(stream, ac);

  CHECK(out.mu == doctest::Approx(0.02).epsilon(0.10));
  CHECK(out.eta_h == doctest::Approx(0.145).epsilon(0.10));
  CHECK(out.eta_s == doctest::Approx(cfg.channels.eta_s()).epsilon(0.10));
  CHECK(out.car > 10.0);
  CHECK(out.coincidences <= std::min(out.s_h.count, out.s_s.count));
}

TEST_CASE("analyze folds multiplexed streams onto the output slot") {
  sim::SimConfig cfg;
  cfg.cycles = 4'000'000;
  cfg.seed = 13;
  cfg.stats = {PhotonLaw::Thermal, 0.009};
  cfg.channels = {0.145, 0.143, 1.0};
  const sim::TagData data = sim::generate_timetags(cfg);
  const tags::TagStream stream = tags::from_events(data.events, data.duration_ps);

  tags::AnalysisConfig ac;
  ac.m = 11;
  ac.folded = true;
  const tags::CountsSummary out = tags::analyze(stream, ac);

  // folded coincidence rate is the multiplexed output rate X_m
  const double x_m =
      500e3 * model::multiplexed_coincidence_prob(cfg.stats, cfg.channels, 11);
  const double se = std::sqrt(x_m / out.duration_s);
  CHECK(std::abs(out.coincidence_rate_hz - x_m) < 4.0 * se);

  // first-herald histogram shows the geometric first-fire weighting
  const double q = model::herald_click_prob(cfg.stats, cfg.channels.eta_h);
  const auto ff = model::first_fire_distribution(q, 11);
  REQUIRE(out.per_bin_herald_counts.size() == 11);
  for (int j = 0; j < 11; ++j) {
    const double expected =
        static_cast<double>(cfg.cycles) * ff.per_bin[static_cast<std::size_t>(j)];
    const double observed =
        static_cast<double>(out.per_bin_herald_counts[static_cast<std::size_t>(j)]);
    CHECK(std::abs(observed - expected) < 5.0 * std::sqrt(expected));
  }
}

TEST_CASE("analyze surfaces degenerate streams as errors") {
  tags::AnalysisConfig ac;
  CHECK_THROWS_AS(tags::analyze(two_channel({}, {}, 1'000'000), ac),
                  std::domain_error);
  CHECK_THROWS_AS(tags::analyze(two_channel({0}, {}, 1'000'000), ac),
                  std::domain_error);
}
