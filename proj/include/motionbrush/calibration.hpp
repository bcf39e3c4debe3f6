#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "motionbrush/analysis.hpp"
#include "motionbrush/motion.hpp"
#include "motionbrush/profile_io.hpp"
#include "motionbrush/recording.hpp"

namespace motionbrush {

struct CalibrationConfig {
  double window_s = 0.5;
  double nominal_period_s = 0.01;
  double noise_floor = 0.1;          // m/s, energy below this counts as still
  double min_still_s = 2.0;
  double min_duration_s = 10.0;
  double min_pitch_range_rad = 2.0 * kPi / 180.0;
  double p_lo = 5.0;
  double p_hi = 95.0;
};

struct StillSegment {
  std::size_t first = 0;  // index into the placement's sorted frames
  std::size_t last = 0;   // inclusive
  std::uint64_t t_begin_us = 0;
  std::uint64_t t_end_us = 0;
};

/// Earliest maximal run of frames with energy below the noise floor lasting
/// at least min_still_s. Frames inside the first energy window are skipped
/// since their energy has not settled.
std::optional<StillSegment> find_still_segment(std::span<const SensorFrame> frames,
                                               const CalibrationConfig& config);

/// Average rotation as the dominant eigenvector of sum(q q^T); insensitive to
/// the q / -q ambiguity. The result has w >= 0.
Quat mean_quaternion(std::span<const Quat> quats);

/// Errors: Error(unknown_placement), Error(insufficient_data) for less than
/// min_duration_s of data, Error(no_stillness), Error(degenerate_range) when
/// the pitch percentiles span less than min_pitch_range_rad or the energy
/// percentiles coincide.
CalibrationProfile build_profile(const SessionRecording& session, Placement p,
                                 const CalibrationConfig& config = {});

}  // namespace motionbrush
