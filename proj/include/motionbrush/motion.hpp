#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace motionbrush {

inline constexpr int kMaxDevices = 4;
inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Hamilton quaternion, w + xi + yj + zk.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }
  static Quat from_axis_angle(const Vec3& axis, double angle_rad);

  double norm() const;
  Quat normalized() const;
  Quat conjugate() const { return {w, -x, -y, -z}; }
  bool finite() const;
  Vec3 rotate(const Vec3& v) const;

  friend Quat operator*(const Quat& a, const Quat& b);
  friend bool operator==(const Quat&, const Quat&) = default;
};

/// One timestamped reading as it travels on the wire. The payload keeps
/// the f32 values bit-for-bit; orientation() gives the renormalized
/// double-precision quaternion used by all math.
struct SensorFrame {
  std::uint8_t device_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  std::array<float, 4> quat{1.0f, 0.0f, 0.0f, 0.0f};  // w, x, y, z
  std::array<float, 3> acc{0.0f, 0.0f, 0.0f};         // m/s^2

  Quat orientation() const;
  /// |ax| + |ay| + |az|
  double acc_l1() const;

  friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

inline constexpr double kQuatNormTolerance = 1e-4;
inline constexpr double kAccSanityBound = 200.0;

/// Empty when the frame satisfies the ingest invariants, otherwise the reason.
std::optional<std::string> validate_frame(const SensorFrame& frame);

enum class Placement : std::uint8_t {
  right_upper_arm,
  left_wrist,
  left_ankle,
  right_ankle,
};

std::string_view to_string(Placement p);
std::optional<Placement> parse_placement(std::string_view name);

/// Fixed binding used by the simulator and by sessions without an explicit map.
Placement default_placement(int device_id);
int default_device(Placement p);

/// Normalized canvas coordinates. x: 0 stage right .. 1 stage left;
/// y: 0 floor .. 1 ceiling.
struct CanvasPoint {
  double x = 0.5;
  double y = 0.5;
  friend bool operator==(const CanvasPoint&, const CanvasPoint&) = default;
};

struct CalibrationProfile {
  Placement placement = Placement::right_upper_arm;
  Quat q_ref;
  double pitch_lo = -kPi / 4;
  double pitch_hi = kPi / 4;
  double energy_lo = 0.0;  // m/s
  double energy_hi = 1.0;  // m/s
  double window_s = 0.5;

  std::optional<std::string> validate() const;
  friend bool operator==(const CalibrationProfile&,
                         const CalibrationProfile&) = default;
};

struct YawPitch {
  double yaw = 0.0;    // (-pi, pi], 0 = facing the screen, +pi/2 = stage left
  double pitch = 0.0;  // [-pi/2, pi/2], positive toward the ceiling
};

/// Device forward axis in the device frame.
inline constexpr Vec3 kForwardAxis{0.0, 0.0, 1.0};

/// Rotates the forward axis by conj(q_ref) * quat. Throws Error(invalid_frame)
/// on non-finite input.
Vec3 pointing_direction(const Quat& quat, const Quat& q_ref);

/// Near-vertical directions (|dy| > 1 - 1e-9) report yaw = 0.
YawPitch yaw_pitch(const Vec3& d);

/// sin(theta) evaluated after folding theta into [-pi/2, pi/2] with
/// sin(theta) = sin(pi - theta), so mirrored angles give identical results
/// and theta = 0 or pi give exactly 0.
double folded_sin(double theta);

CanvasPoint map_to_canvas(double yaw, double pitch,
                          const CalibrationProfile& profile);

double normalize_energy(double energy, const CalibrationProfile& profile);

}  // namespace motionbrush
