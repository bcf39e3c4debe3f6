#include "motionbrush/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "motionbrush/error.hpp"

namespace motionbrush {
namespace {

SensorFrame make_frame(const GestureScript& script, std::size_t k, const Quat& q,
                       const Vec3& acc) {
  SensorFrame f;
  f.device_id = static_cast<std::uint8_t>(default_device(script.placement));
  f.seq = script.seq_start + static_cast<std::uint32_t>(k);
  f.t_us = script.start_t_us +
           static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * 1e6 /
                                                   script.sample_rate_hz));
  const Quat n = q.normalized();
  f.quat = {static_cast<float>(n.w), static_cast<float>(n.x), static_cast<float>(n.y),
            static_cast<float>(n.z)};
  f.acc = {static_cast<float>(acc.x), static_cast<float>(acc.y), static_cast<float>(acc.z)};
  return f;
}

Quat slerp(const Quat& a, Quat b, double t) {
  double dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  if (dot < 0) {
    b = {-b.w, -b.x, -b.y, -b.z};
    dot = -dot;
  }
  if (dot > 0.9995) {
    return Quat{a.w + t * (b.w - a.w), a.x + t * (b.x - a.x), a.y + t * (b.y - a.y),
                a.z + t * (b.z - a.z)}
        .normalized();
  }
  const double theta = std::acos(dot);
  const double sa = std::sin((1 - t) * theta) / std::sin(theta);
  const double sb = std::sin(t * theta) / std::sin(theta);
  return {sa * a.w + sb * b.w, sa * a.x + sb * b.x, sa * a.y + sb * b.y,
          sa * a.z + sb * b.z};
}

Quat yaw_pitch_quat(double yaw, double pitch) {
  // Yaw about +Y turns forward toward +X; pitch about -X lifts it toward +Y.
  return Quat::from_axis_angle({0, 1, 0}, yaw) * Quat::from_axis_angle({-1, 0, 0}, pitch);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v{g(rng), g(rng), g(rng)};
  const double n = v.norm();
  return {v.x / n, v.y / n, v.z / n};
}

std::vector<SensorFrame> generate_smooth(const GestureScript& s) {
  const SmoothSweep sweep = smooth_sweep_for(s);
  const double omega = 2 * kPi * sweep.frequency_hz;
  const Vec3 tangent{sweep.axis.y, -sweep.axis.x, 0.0};  // axis x forward
  std::vector<SensorFrame> out;
  const std::size_t n = s.frame_count();
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / s.sample_rate_hz;
    const double angle = sweep.amplitude_rad * std::sin(omega * t);
    const double rate = sweep.amplitude_rad * omega * std::cos(omega * t);
    const double accel = -sweep.amplitude_rad * omega * omega * std::sin(omega * t);
    const Quat q = s.base * Quat::from_axis_angle(sweep.axis, angle);
    const Vec3 acc{kLimbRadiusM * accel * tangent.x, kLimbRadiusM * accel * tangent.y,
                   -kLimbRadiusM * rate * rate};
    out.push_back(make_frame(s, k, q, acc));
  }
  return out;
}

std::vector<SensorFrame> generate_staccato(const GestureScript& s) {
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> hold_dist(0.2, 0.45);
  std::uniform_real_distribution<double> yaw_dist(-80.0, 80.0);
  std::uniform_real_distribution<double> pitch_dist(-40.0, 40.0);
  std::uniform_real_distribution<double> peak_dist(10.0, 16.0);
  std::normal_distribution<double> noise(0.0, kStillAccSigma / std::sqrt(3.0));
  constexpr double kTransition = 0.1;
  constexpr double kDeg = kPi / 180.0;

  Quat from = s.base;
  Quat to = s.base;
  double seg_start = 0.0;
  double hold = std::uniform_real_distribution<double>(0.05, 0.2)(rng);
  double peak = 0.0;
  Vec3 dir{1, 0, 0};

  std::vector<SensorFrame> out;
  const std::size_t n = s.frame_count();
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / s.sample_rate_hz;
    while (t >= seg_start + hold + kTransition) {
      seg_start += hold + kTransition;
      hold = hold_dist(rng);
    }
    const double tau = t - seg_start - hold;
    if (tau >= 0.0 && peak == 0.0) {
      from = to;
      to = s.base * yaw_pitch_quat(yaw_dist(rng) * kDeg, pitch_dist(rng) * kDeg);
      peak = peak_dist(rng);
      dir = random_unit(rng);
    }
    Quat q = to;
    Vec3 acc{noise(rng), noise(rng), noise(rng)};
    if (tau < 0.0) {
      peak = 0.0;
    } else {
      // Accelerate then decelerate; orientation follows the matching
      // position profile u - sin(2 pi u) / (2 pi).
      const double u = tau / kTransition;
      const double a = peak * std::sin(2 * kPi * u);
      acc = {acc.x + a * dir.x, acc.y + a * dir.y, acc.z + a * dir.z};
      q = slerp(from, to, u - std::sin(2 * kPi * u) / (2 * kPi));
    }
    out.push_back(make_frame(s, k, q, acc));
  }
  return out;
}

std::vector<SensorFrame> generate_still(const GestureScript& s) {
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> acc_noise(0.0, kStillAccSigma / std::sqrt(3.0));
  std::normal_distribution<double> angle_noise(0.0, kStillAngleSigmaDeg * kPi / 180.0);
  std::vector<SensorFrame> out;
  const std::size_t n = s.frame_count();
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 jitter{angle_noise(rng), angle_noise(rng), angle_noise(rng)};
    const double angle = jitter.norm();
    const Quat q = angle > 0.0 ? s.base * Quat::from_axis_angle(jitter, angle) : s.base;
    const Vec3 acc{acc_noise(rng), acc_noise(rng), acc_noise(rng)};
    out.push_back(make_frame(s, k, q, acc));
  }
  return out;
}

}  // namespace

std::string_view to_string(GestureKind k) {
  switch (k) {
    case GestureKind::smooth: return "smooth";
    case GestureKind::staccato: return "staccato";
    case GestureKind::still: return "still";
  }
  return "unknown";
}

void GestureScript::validate() const {
  if (!(sample_rate_hz >= 50.0 && sample_rate_hz <= 500.0))
    throw Error(ErrorCode::config, "sample_rate_hz must lie in [50, 500]");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw Error(ErrorCode::config, "duration_s must be positive");
}

std::size_t GestureScript::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
}

SmoothSweep smooth_sweep_for(const GestureScript& script) {
  std::mt19937_64 rng(script.seed);
  const double amplitude =
      std::uniform_real_distribution<double>(22.0, 30.0)(rng) * kPi / 180.0;
  const double heading = std::uniform_real_distribution<double>(0.0, kPi)(rng);
  return {amplitude, kSmoothFrequencyHz, {-std::sin(heading), std::cos(heading), 0.0}};
}

std::vector<SensorFrame> sim_generate(const GestureScript& script) {
  script.validate();
  switch (script.kind) {
    case GestureKind::smooth: return generate_smooth(script);
    case GestureKind::staccato: return generate_staccato(script);
    case GestureKind::still: return generate_still(script);
  }
  return {};
}

std::vector<SensorFrame> simulate_performance(std::uint64_t seed, double duration_s,
                                              double sample_rate_hz) {
  std::vector<SensorFrame> all;
  const auto period_us = static_cast<std::uint64_t>(std::llround(1e6 / sample_rate_hz));
  const auto total = static_cast<std::uint64_t>(std::llround(duration_s * 1e6));
  for (int dev = 0; dev < kMaxDevices; ++dev) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(dev) * 7919ULL + 1);
    std::uniform_int_distribution<int> kind_dist(0, 2);
    std::uniform_real_distribution<double> yaw_dist(-1.2, 1.2);
    std::uniform_real_distribution<double> pitch_dist(-0.4, 0.4);
    std::uint64_t t = 0;
    std::uint32_t seq = 0;
    while (t < total) {
      GestureScript s;
      s.kind = static_cast<GestureKind>(kind_dist(rng));
      switch (s.kind) {
        case GestureKind::smooth:
          s.duration_s = std::uniform_real_distribution<double>(4.0, 8.0)(rng);
          break;
        case GestureKind::staccato:
          s.duration_s = std::uniform_real_distribution<double>(2.0, 5.0)(rng);
          break;
        case GestureKind::still:
          s.duration_s = std::uniform_real_distribution<double>(2.5, 4.5)(rng);
          break;
      }
      s.sample_rate_hz = sample_rate_hz;
      s.seed = rng();
      s.placement = default_placement(dev);
      s.start_t_us = t;
      s.seq_start = seq;
      s.base = yaw_pitch_quat(yaw_dist(rng), pitch_dist(rng));
      auto frames = sim_generate(s);
      for (const auto& f : frames) {
        if (f.t_us >= total) break;
        all.push_back(f);
      }
      seq += static_cast<std::uint32_t>(frames.size());
      t = frames.empty() ? total : frames.back().t_us + period_us;
    }
  }
  std::sort(all.begin(), all.end(), [](const SensorFrame& a, const SensorFrame& b) {
    return a.t_us != b.t_us ? a.t_us < b.t_us : a.device_id < b.device_id;
  });
  return all;
}

}  // namespace motionbrush
