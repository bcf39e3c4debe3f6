#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "motionbrush/motion.hpp"
#include "motionbrush/recording.hpp"

namespace motionbrush {

/// Frames bound to a placement, sorted by timestamp. Throws
/// Error(unknown_placement) if the placement is unmapped or has no frames.
std::vector<SensorFrame> placement_frames(const SessionRecording& session, Placement p);

struct EnergyPoint {
  std::uint64_t t_us;
  double energy;  // m/s
  friend bool operator==(const EnergyPoint&, const EnergyPoint&) = default;
};

/// One point per frame of the placement, computed with EnergyTracker.
std::vector<EnergyPoint> energy_trace(const SessionRecording& session, Placement p,
                                      double window_s = 0.5,
                                      double nominal_period_s = 0.01);

struct PathPoint {
  std::uint64_t t_us;
  Vec3 direction;  // unit, stage frame
  friend bool operator==(const PathPoint&, const PathPoint&) = default;
};

std::vector<PathPoint> orientation_path(const SessionRecording& session, Placement p,
                                        const Quat& q_ref = Quat::identity());

/// Latitude/longitude histogram over the unit sphere with the ceiling (+Y)
/// as pole: latitude = asin(y), longitude = atan2(x, z). Bins are
/// half-open in both angles, the last band in each axis being closed.
struct SphereHistogram {
  int n_lat = 18;
  int n_lon = 36;
  std::uint64_t total = 0;
  std::vector<std::uint64_t> counts;  // row-major [lat][lon]
  std::vector<double> solid_angle;    // steradians
  std::vector<double> density;        // count / (total * solid_angle)

  std::size_t index(int lat, int lon) const {
    return static_cast<std::size_t>(lat) * static_cast<std::size_t>(n_lon) +
           static_cast<std::size_t>(lon);
  }
  std::size_t bin_of(const Vec3& d) const;
  double lat_edge(int i) const;  // radians, i in [0, n_lat]
  double lon_edge(int j) const;  // radians, j in [0, n_lon]
};

/// Throws Error(empty_input) for an empty path and Error(config) for a
/// non-positive resolution.
SphereHistogram sphere_heatmap(std::span<const Vec3> path, int n_lat = 18, int n_lon = 36);

struct RangeOptions {
  double p_lo = 5.0;
  double p_hi = 95.0;
  double window_s = 0.5;
  Quat q_ref = Quat::identity();
};

struct RangeBounds {
  Placement placement = Placement::right_upper_arm;
  double pitch_lo = 0.0;   // radians, p_lo percentile
  double pitch_hi = 0.0;   // radians, p_hi percentile
  double energy_lo = 0.0;  // m/s
  double energy_hi = 0.0;  // m/s
  std::size_t samples = 0;
  friend bool operator==(const RangeBounds&, const RangeBounds&) = default;
};

inline constexpr std::size_t kMinRangeSamples = 20;

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * N) of the
/// sorted data (rank 1 for p = 0).
double nearest_rank_percentile(std::vector<double> values, double p);

/// Throws Error(insufficient_data) below 20 frames.
RangeBounds range_bounds(const SessionRecording& session, Placement p,
                         const RangeOptions& options = {});

// Export. Every CSV starts with a header row; numbers use the shortest
// representation that parses back to the same double.
enum class ExportFormat { csv, json };

void export_trace(std::span<const EnergyPoint> trace, ExportFormat format, std::ostream& out);
void export_path(std::span<const PathPoint> path, ExportFormat format, std::ostream& out);
void export_histogram(const SphereHistogram& h, ExportFormat format, std::ostream& out);
void export_bounds(const RangeBounds& b, ExportFormat format, std::ostream& out);

std::vector<EnergyPoint> parse_trace_csv(std::istream& in);
std::vector<PathPoint> parse_path_csv(std::istream& in);
SphereHistogram parse_histogram_json(std::istream& in);
RangeBounds parse_bounds_json(std::istream& in);

std::string format_double(double v);

}  // namespace motionbrush
