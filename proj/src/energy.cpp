#include "motionbrush/energy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "motionbrush/error.hpp"

namespace motionbrush {

std::uint64_t seconds_to_us(double s) {
  return static_cast<std::uint64_t>(std::llround(s * 1e6));
}

double capped_gap_s(const std::uint64_t* prev_t_us, std::uint64_t t_us,
                    double nominal_period_s) {
  if (prev_t_us == nullptr) return nominal_period_s;
  const double gap = static_cast<double>(t_us - *prev_t_us) * 1e-6;
  return std::min(gap, 2.0 * nominal_period_s);
}

EnergyTracker::EnergyTracker(double window_s, double nominal_period_s)
    : window_s_(window_s),
      window_us_(seconds_to_us(window_s)),
      nominal_period_s_(nominal_period_s) {
  if (!(window_s > 0.0) || !(nominal_period_s > 0.0))
    throw Error(ErrorCode::config, "energy window and sample period must be positive");
}

void EnergyTracker::set_window(double window_s) {
  if (!(window_s > 0.0))
    throw Error(ErrorCode::config, "energy window must be positive");
  window_s_ = window_s;
  window_us_ = seconds_to_us(window_s);
}

void EnergyTracker::reset() {
  samples_.clear();
  energy_ = 0.0;
}

double EnergyTracker::update(const SensorFrame& frame) {
  return update(frame.t_us, frame.acc_l1());
}

double EnergyTracker::update(std::uint64_t t_us, double acc_l1) {
  const std::uint64_t* prev = nullptr;
  if (!samples_.empty()) {
    prev = &samples_.back().t_us;
    if (t_us <= *prev)
      throw Error(ErrorCode::out_of_order,
                  "sample at t_us=" + std::to_string(t_us) +
                      " does not follow t_us=" + std::to_string(*prev));
  }
  const double dt = capped_gap_s(prev, t_us, nominal_period_s_);
  samples_.push_back({t_us, acc_l1, dt});
  while (samples_.front().t_us + window_us_ <= t_us) samples_.pop_front();

  double sum = 0.0;
  for (const Sample& s : samples_) sum += s.s * s.dt_s;
  energy_ = sum;
  return energy_;
}

double EnergyTracker::energy_at(std::uint64_t t_us) const {
  double sum = 0.0;
  for (const Sample& s : samples_)
    if (s.t_us + window_us_ > t_us) sum += s.s * s.dt_s;
  return sum;
}

}  // namespace motionbrush
