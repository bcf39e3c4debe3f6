#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "motionbrush/motion.hpp"

namespace motionbrush {

enum class GestureKind { smooth, staccato, still };

std::string_view to_string(GestureKind k);

struct GestureScript {
  GestureKind kind = GestureKind::smooth;
  double duration_s = 10.0;
  double sample_rate_hz = 100.0;
  std::uint64_t seed = 0;
  Placement placement = Placement::right_upper_arm;
  std::uint64_t start_t_us = 0;
  std::uint32_t seq_start = 0;
  /// Orientation the gesture is performed around.
  Quat base = Quat::identity();

  /// Throws Error(config) on a rate outside [50, 500] Hz or non-positive duration.
  void validate() const;
  std::size_t frame_count() const;
};

/// Parameters of the smooth sweep: the device rotates about a fixed axis
/// perpendicular to its forward axis by amplitude * sin(2 pi f t).
struct SmoothSweep {
  double amplitude_rad;
  double frequency_hz;
  Vec3 axis;  // body frame, unit, perpendicular to +Z
};

inline constexpr double kSmoothFrequencyHz = 0.2;
inline constexpr double kLimbRadiusM = 0.5;
inline constexpr double kStillAccSigma = 0.05;   // m/s^2, RMS of the noise vector
inline constexpr double kStillAngleSigmaDeg = 0.2;

SmoothSweep smooth_sweep_for(const GestureScript& script);

/// Deterministic frames for one device; a pure function of the script.
std::vector<SensorFrame> sim_generate(const GestureScript& script);

/// Four devices, each cycling through randomly ordered smooth, staccato and
/// still segments. Frames are interleaved by (t_us, device_id).
std::vector<SensorFrame> simulate_performance(std::uint64_t seed, double duration_s,
                                              double sample_rate_hz = 100.0);

}  // namespace motionbrush
