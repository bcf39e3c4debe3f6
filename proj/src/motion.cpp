#include "motionbrush/motion.hpp"

#include <algorithm>
#include <cmath>

#include "motionbrush/error.hpp"

namespace motionbrush {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_frame: return "invalid_frame";
    case ErrorCode::out_of_order: return "out_of_order";
    case ErrorCode::encode: return "encode";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
    case ErrorCode::schema: return "schema";
    case ErrorCode::unsupported_version: return "unsupported_version";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::missing_header: return "missing_header";
    case ErrorCode::unknown_placement: return "unknown_placement";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::no_stillness: return "no_stillness";
    case ErrorCode::degenerate_range: return "degenerate_range";
    case ErrorCode::empty_input: return "empty_input";
  }
  return "unknown";
}

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Quat Quat::from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  const double s = std::sin(angle_rad / 2) / n;
  return {std::cos(angle_rad / 2), axis.x * s, axis.y * s, axis.z * s};
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

bool Quat::finite() const {
  return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) &&
         std::isfinite(z);
}

Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vec3 Quat::rotate(const Vec3& v) const {
  // v' = v + 2w(u x v) + 2u x (u x v), u = (x, y, z)
  const double tx = 2.0 * (y * v.z - z * v.y);
  const double ty = 2.0 * (z * v.x - x * v.z);
  const double tz = 2.0 * (x * v.y - y * v.x);
  return {v.x + w * tx + (y * tz - z * ty),
          v.y + w * ty + (z * tx - x * tz),
          v.z + w * tz + (x * ty - y * tx)};
}

Quat SensorFrame::orientation() const {
  return Quat{quat[0], quat[1], quat[2], quat[3]}.normalized();
}

double SensorFrame::acc_l1() const {
  return std::abs(static_cast<double>(acc[0])) +
         std::abs(static_cast<double>(acc[1])) +
         std::abs(static_cast<double>(acc[2]));
}

std::optional<std::string> validate_frame(const SensorFrame& frame) {
  if (frame.device_id >= kMaxDevices) return "device_id out of range";
  for (float c : frame.quat)
    if (!std::isfinite(c)) return "non-finite quaternion";
  for (float c : frame.acc) {
    if (!std::isfinite(c)) return "non-finite acceleration";
    if (std::abs(c) >= kAccSanityBound) return "acceleration exceeds sanity bound";
  }
  const Quat q{frame.quat[0], frame.quat[1], frame.quat[2], frame.quat[3]};
  if (std::abs(q.norm() - 1.0) >= kQuatNormTolerance) return "quaternion not unit norm";
  return std::nullopt;
}

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::right_upper_arm: return "right_upper_arm";
    case Placement::left_wrist: return "left_wrist";
    case Placement::left_ankle: return "left_ankle";
    case Placement::right_ankle: return "right_ankle";
  }
  return "unknown";
}

std::optional<Placement> parse_placement(std::string_view name) {
  for (int i = 0; i < kMaxDevices; ++i) {
    const auto p = static_cast<Placement>(i);
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

Placement default_placement(int device_id) {
  return static_cast<Placement>(device_id);
}

int default_device(Placement p) { return static_cast<int>(p); }

std::optional<std::string> CalibrationProfile::validate() const {
  if (!q_ref.finite() || std::abs(q_ref.norm() - 1.0) > 1e-6)
    return "q_ref must be a unit quaternion";
  if (!(pitch_lo < pitch_hi)) return "pitch_lo must be below pitch_hi";
  if (!(energy_lo < energy_hi)) return "energy_lo must be below energy_hi";
  if (!(window_s > 0.0) || !std::isfinite(window_s)) return "window_s must be positive";
  return std::nullopt;
}

Vec3 pointing_direction(const Quat& quat, const Quat& q_ref) {
  if (!quat.finite() || !q_ref.finite())
    throw Error(ErrorCode::invalid_frame, "non-finite quaternion");
  const Quat rel = (q_ref.normalized().conjugate() * quat.normalized()).normalized();
  const Vec3 d = rel.rotate(kForwardAxis);
  const double n = d.norm();
  return {d.x / n, d.y / n, d.z / n};
}

YawPitch yaw_pitch(const Vec3& d) {
  const double dy = std::clamp(d.y, -1.0, 1.0);
  YawPitch out;
  out.pitch = std::asin(dy);
  if (std::abs(dy) > 1.0 - 1e-9) return out;
  out.yaw = std::atan2(d.x, d.z);
  if (out.yaw <= -kPi) out.yaw = kPi;
  return out;
}

double folded_sin(double theta) {
  if (std::abs(theta) > kPi) theta = std::remainder(theta, 2.0 * kPi);
  if (theta > kPi / 2)
    theta = kPi - theta;
  else if (theta < -kPi / 2)
    theta = -kPi - theta;
  return std::sin(theta);
}

CanvasPoint map_to_canvas(double yaw, double pitch,
                          const CalibrationProfile& profile) {
  CanvasPoint p;
  p.x = std::clamp(0.5 + 0.5 * folded_sin(yaw), 0.0, 1.0);
  p.y = std::clamp((pitch - profile.pitch_lo) / (profile.pitch_hi - profile.pitch_lo),
                   0.0, 1.0);
  return p;
}

double normalize_energy(double energy, const CalibrationProfile& profile) {
  return std::clamp(
      (energy - profile.energy_lo) / (profile.energy_hi - profile.energy_lo), 0.0, 1.0);
}

}  // namespace motionbrush
