#include "motionbrush/calibration.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "motionbrush/energy.hpp"
#include "motionbrush/error.hpp"

namespace motionbrush {

std::optional<StillSegment> find_still_segment(std::span<const SensorFrame> frames,
                                               const CalibrationConfig& config) {
  if (frames.empty()) return std::nullopt;
  EnergyTracker tracker(config.window_s, config.nominal_period_s);
  const std::uint64_t settled = frames.front().t_us + tracker.window_us();
  const std::uint64_t min_span = seconds_to_us(config.min_still_s);
  const std::uint64_t period = seconds_to_us(config.nominal_period_s);

  std::optional<std::size_t> run_start;
  auto run_ok = [&](std::size_t first, std::size_t last) {
    return frames[last].t_us - frames[first].t_us + period >= min_span;
  };
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double e = tracker.update(frames[i]);
    const bool still = frames[i].t_us >= settled && e < config.noise_floor;
    if (still) {
      if (!run_start) run_start = i;
      continue;
    }
    if (run_start && run_ok(*run_start, i - 1))
      return StillSegment{*run_start, i - 1, frames[*run_start].t_us, frames[i - 1].t_us};
    run_start.reset();
  }
  if (run_start && run_ok(*run_start, frames.size() - 1))
    return StillSegment{*run_start, frames.size() - 1, frames[*run_start].t_us,
                        frames.back().t_us};
  return std::nullopt;
}

Quat mean_quaternion(std::span<const Quat> quats) {
  if (quats.empty()) throw Error(ErrorCode::empty_input, "mean of no quaternions");
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (const Quat& q : quats) {
    const Quat n = q.normalized();
    const Eigen::Vector4d v(n.w, n.x, n.y, n.z);
    m += v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(m);
  // Eigenvalues are sorted ascending.
  Eigen::Vector4d v = solver.eigenvectors().col(3);
  if (v(0) < 0) v = -v;
  return Quat{v(0), v(1), v(2), v(3)}.normalized();
}

CalibrationProfile build_profile(const SessionRecording& session, Placement p,
                                 const CalibrationConfig& config) {
  const auto frames = placement_frames(session, p);
  const double span_s =
      static_cast<double>(frames.back().t_us - frames.front().t_us) * 1e-6 + config.nominal_period_s;
  if (frames.size() < kMinRangeSamples || span_s + 1e-9 < config.min_duration_s)
    throw Error(ErrorCode::insufficient_data,
                "calibration needs at least " + format_double(config.min_duration_s) +
                    " s of data for " + std::string(to_string(p)) + ", have " +
                    format_double(span_s) + " s");

  const auto still = find_still_segment(frames, config);
  if (!still)
    throw Error(ErrorCode::no_stillness,
                "no stillness segment of " + format_double(config.min_still_s) +
                    " s found; record the performer holding still facing the screen centre");

  std::vector<Quat> quats;
  for (std::size_t i = still->first; i <= still->last; ++i)
    quats.push_back(frames[i].orientation());

  CalibrationProfile profile;
  profile.placement = p;
  profile.q_ref = mean_quaternion(quats);
  profile.window_s = config.window_s;

  RangeOptions opts;
  opts.p_lo = config.p_lo;
  opts.p_hi = config.p_hi;
  opts.window_s = config.window_s;
  opts.q_ref = profile.q_ref;
  const RangeBounds bounds = range_bounds(session, p, opts);

  profile.pitch_lo = bounds.pitch_lo;
  profile.pitch_hi = bounds.pitch_hi;
  profile.energy_lo = std::max(0.0, bounds.energy_lo);
  profile.energy_hi = bounds.energy_hi;

  if (profile.pitch_hi - profile.pitch_lo < config.min_pitch_range_rad)
    throw Error(ErrorCode::degenerate_range,
                "pitch range " + format_double((profile.pitch_hi - profile.pitch_lo) * 180.0 / kPi) +
                    " deg is too narrow; capture a wider range of movement");
  if (!(profile.energy_hi > profile.energy_lo))
    throw Error(ErrorCode::degenerate_range,
                "energy range is empty; capture more varied movement");
  return profile;
}

}  // namespace motionbrush
