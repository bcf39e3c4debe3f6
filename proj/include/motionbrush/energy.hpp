#pragma once

#include <cstdint>
#include <deque>

#include "motionbrush/motion.hpp"

namespace motionbrush {

/// Sliding-window acceleration energy for one device.
///
/// Each sample stores s = |ax| + |ay| + |az| and dt, the gap to the previous
/// sample capped at twice the nominal period (the first sample uses the
/// nominal period). The energy is the left-Riemann sum of s * dt over the
/// samples whose timestamp lies strictly inside (t_newest - window, t_newest],
/// summed oldest first. Units: m/s.
class EnergyTracker {
 public:
  struct Sample {
    std::uint64_t t_us;
    double s;
    double dt_s;
  };

  explicit EnergyTracker(double window_s = 0.5, double nominal_period_s = 0.01);

  /// Throws Error(out_of_order) unless t_us is strictly greater than the
  /// previous sample; the tracker is unchanged in that case.
  double update(const SensorFrame& frame);
  double update(std::uint64_t t_us, double acc_l1);

  /// Energy evaluated as if the newest time were t_us, without mutating.
  /// Used to let a silent device decay.
  double energy_at(std::uint64_t t_us) const;

  double energy() const { return energy_; }
  double window_s() const { return window_s_; }
  double nominal_period_s() const { return nominal_period_s_; }
  /// Takes effect on the next update; retained samples are kept.
  void set_window(double window_s);

  bool empty() const { return samples_.empty(); }
  std::uint64_t last_t_us() const { return samples_.empty() ? 0 : samples_.back().t_us; }
  const std::deque<Sample>& samples() const { return samples_; }
  void reset();

  /// Window length in integer microseconds as used for eviction.
  std::uint64_t window_us() const { return window_us_; }

 private:
  double window_s_;
  std::uint64_t window_us_;
  double nominal_period_s_;
  std::deque<Sample> samples_;
  double energy_ = 0.0;
};

/// dt assigned to a sample given its predecessor's timestamp (if any).
double capped_gap_s(const std::uint64_t* prev_t_us, std::uint64_t t_us,
                    double nominal_period_s);

std::uint64_t seconds_to_us(double s);

}  // namespace motionbrush
