#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace muxloop {

// Run would exceed a hard resource bound (event buffers, outcome lists, the
// pulse-pick window, ...).
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class PhotonLaw { Thermal, Poisson };

// Photon-pair number law per pump pulse, parameterised by the mean pair
// number mu.
struct PhotonStatistics {
  PhotonLaw law = PhotonLaw::Thermal;
  double mu = 0.0;

  void validate() const {
    if (!(mu >= 0.0)) {
      throw std::domain_error("PhotonStatistics: mu must be >= 0");
    }
  }
};

// Transmissions of the herald arm, of the signal arm excluding the switch,
// and of one full pass of the storage loop (switch + fibre, in dB).
struct ChannelModel {
  double eta_h = 1.0;
  double eta_s_prime = 1.0;
  double loss_db_per_round_trip = 0.0;

  double round_trip_transmission() const {
    return std::pow(10.0, -loss_db_per_round_trip / 10.0);
  }

  // Signal transmission including a single switch-and-loop pass.
  double eta_s() const { return eta_s_prime * round_trip_transmission(); }

  void validate() const {
    if (!(eta_h >= 0.0 && eta_h <= 1.0)) {
      throw std::domain_error("ChannelModel: eta_h must be in [0, 1]");
    }
    if (!(eta_s_prime > 0.0 && eta_s_prime <= 1.0)) {
      throw std::domain_error("ChannelModel: eta_s_prime must be in (0, 1]");
    }
    if (!(loss_db_per_round_trip >= 0.0)) {
      throw std::domain_error("ChannelModel: round-trip loss must be >= 0 dB");
    }
  }
};

// Multiplexing geometry and timing. Defaults are the fibre-loop system
// parameters: 11 bins spaced 125 ns inside a 2 us output cycle.
struct MuxConfig {
  int m = 11;
  double tau_ns = 125.0;
  double clock_hz = 500e3;
  double delta_tau_ns = 1.7;   // loop / laser period mismatch
  double delay_ns = 200.0;     // electronic compensation fibre delay
  double coherence_ps = 5.0;

  double cycle_period_ns() const { return 1e9 / clock_hz; }

  void validate() const {
    if (m < 1) throw std::domain_error("MuxConfig: m must be >= 1");
    if (!(tau_ns > 0.0)) throw std::domain_error("MuxConfig: tau_ns must be > 0");
    if (!(clock_hz > 0.0)) throw std::domain_error("MuxConfig: clock_hz must be > 0");
    if (!(delta_tau_ns >= 0.0)) {
      throw std::domain_error("MuxConfig: delta_tau_ns must be >= 0");
    }
    if (!(delay_ns > 0.0)) throw std::domain_error("MuxConfig: delay_ns must be > 0");
    if (!(coherence_ps > 0.0)) {
      throw std::domain_error("MuxConfig: coherence_ps must be > 0");
    }
    if (m * tau_ns > cycle_period_ns() * (1.0 + 1e-9)) {
      throw std::domain_error(
          "MuxConfig: m * tau_ns exceeds the output clock period");
    }
  }
};

}  // namespace muxloop
