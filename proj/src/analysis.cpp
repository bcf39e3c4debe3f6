#include "motionbrush/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "motionbrush/energy.hpp"
#include "motionbrush/error.hpp"

namespace motionbrush {
namespace {

using ojson = nlohmann::ordered_json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::schema, "bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::schema, "bad integer '" + s + "'");
  return v;
}

void expect_header(std::istream& in, const char* expected) {
  std::string line;
  if (!std::getline(in, line) || line != expected)
    throw Error(ErrorCode::schema, std::string("expected CSV header '") + expected + "'");
}

void check_stream(const std::ostream& out) {
  if (!out) throw Error(ErrorCode::io, "export write failed");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<SensorFrame> placement_frames(const SessionRecording& session, Placement p) {
  const auto dev = session.device_for(p);
  if (!dev)
    throw Error(ErrorCode::unknown_placement,
                "placement '" + std::string(to_string(p)) + "' is not in the session");
  auto frames = session.frames_for(*dev);
  if (frames.empty())
    throw Error(ErrorCode::unknown_placement,
                "placement '" + std::string(to_string(p)) + "' has no frames");
  std::stable_sort(frames.begin(), frames.end(),
                   [](const SensorFrame& a, const SensorFrame& b) { return a.t_us < b.t_us; });
  return frames;
}

std::vector<EnergyPoint> energy_trace(const SessionRecording& session, Placement p,
                                      double window_s, double nominal_period_s) {
  EnergyTracker tracker(window_s, nominal_period_s);
  std::vector<EnergyPoint> out;
  for (const auto& f : placement_frames(session, p)) out.push_back({f.t_us, tracker.update(f)});
  return out;
}

std::vector<PathPoint> orientation_path(const SessionRecording& session, Placement p,
                                        const Quat& q_ref) {
  std::vector<PathPoint> out;
  for (const auto& f : placement_frames(session, p))
    out.push_back({f.t_us, pointing_direction(f.orientation(), q_ref)});
  return out;
}

double SphereHistogram::lat_edge(int i) const {
  return -kPi / 2 + kPi * static_cast<double>(i) / n_lat;
}

double SphereHistogram::lon_edge(int j) const {
  return -kPi + 2 * kPi * static_cast<double>(j) / n_lon;
}

std::size_t SphereHistogram::bin_of(const Vec3& d) const {
  const double lat = std::asin(std::clamp(d.y, -1.0, 1.0));
  const double lon = std::atan2(d.x, d.z);
  const int i = std::clamp(static_cast<int>(std::floor((lat + kPi / 2) / (kPi / n_lat))), 0,
                           n_lat - 1);
  const int j = std::clamp(static_cast<int>(std::floor((lon + kPi) / (2 * kPi / n_lon))), 0,
                           n_lon - 1);
  return index(i, j);
}

SphereHistogram sphere_heatmap(std::span<const Vec3> path, int n_lat, int n_lon) {
  if (path.empty()) throw Error(ErrorCode::empty_input, "heat map needs at least one sample");
  if (n_lat <= 0 || n_lon <= 0) throw Error(ErrorCode::config, "heat map resolution must be positive");
  SphereHistogram h;
  h.n_lat = n_lat;
  h.n_lon = n_lon;
  const std::size_t bins = static_cast<std::size_t>(n_lat) * static_cast<std::size_t>(n_lon);
  h.counts.assign(bins, 0);
  h.solid_angle.assign(bins, 0.0);
  h.density.assign(bins, 0.0);
  for (const auto& d : path) ++h.counts[h.bin_of(d)];
  h.total = path.size();

  const double dlon = 2 * kPi / n_lon;
  for (int i = 0; i < n_lat; ++i) {
    const double band = std::sin(h.lat_edge(i + 1)) - std::sin(h.lat_edge(i));
    for (int j = 0; j < n_lon; ++j) {
      const auto k = h.index(i, j);
      h.solid_angle[k] = dlon * band;
      h.density[k] = static_cast<double>(h.counts[k]) /
                     (static_cast<double>(h.total) * h.solid_angle[k]);
    }
  }
  return h;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::insufficient_data, "percentile of empty data");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

RangeBounds range_bounds(const SessionRecording& session, Placement p,
                         const RangeOptions& options) {
  const auto frames = placement_frames(session, p);
  if (frames.size() < kMinRangeSamples)
    throw Error(ErrorCode::insufficient_data,
                "range bounds need at least 20 frames, have " + std::to_string(frames.size()));
  std::vector<double> pitch;
  std::vector<double> energy;
  pitch.reserve(frames.size());
  energy.reserve(frames.size());
  EnergyTracker tracker(options.window_s);
  for (const auto& f : frames) {
    pitch.push_back(yaw_pitch(pointing_direction(f.orientation(), options.q_ref)).pitch);
    energy.push_back(tracker.update(f));
  }
  RangeBounds b;
  b.placement = p;
  b.samples = frames.size();
  b.pitch_lo = nearest_rank_percentile(pitch, options.p_lo);
  b.pitch_hi = nearest_rank_percentile(pitch, options.p_hi);
  b.energy_lo = nearest_rank_percentile(energy, options.p_lo);
  b.energy_hi = nearest_rank_percentile(std::move(energy), options.p_hi);
  return b;
}

void export_trace(std::span<const EnergyPoint> trace, ExportFormat format, std::ostream& out) {
  if (format == ExportFormat::csv) {
    out << "t_us,energy\n";
    for (const auto& p : trace) out << p.t_us << ',' << format_double(p.energy) << '\n';
  } else {
    ojson j;
    j["kind"] = "energy_trace";
    j["schema"] = 1;
    ojson points = ojson::array();
    for (const auto& p : trace) points.push_back({p.t_us, p.energy});
    j["points"] = points;
    out << j.dump() << '\n';
  }
  check_stream(out);
}

void export_path(std::span<const PathPoint> path, ExportFormat format, std::ostream& out) {
  if (format == ExportFormat::csv) {
    out << "t_us,x,y,z\n";
    for (const auto& p : path)
      out << p.t_us << ',' << format_double(p.direction.x) << ',' << format_double(p.direction.y)
          << ',' << format_double(p.direction.z) << '\n';
  } else {
    ojson j;
    j["kind"] = "orientation_path";
    j["schema"] = 1;
    ojson points = ojson::array();
    for (const auto& p : path)
      points.push_back({p.t_us, p.direction.x, p.direction.y, p.direction.z});
    j["points"] = points;
    out << j.dump() << '\n';
  }
  check_stream(out);
}

void export_histogram(const SphereHistogram& h, ExportFormat format, std::ostream& out) {
  if (format == ExportFormat::csv) {
    out << "lat_index,lon_index,lat_lo,lat_hi,lon_lo,lon_hi,count,solid_angle,density\n";
    for (int i = 0; i < h.n_lat; ++i)
      for (int j = 0; j < h.n_lon; ++j) {
        const auto k = h.index(i, j);
        out << i << ',' << j << ',' << format_double(h.lat_edge(i)) << ','
            << format_double(h.lat_edge(i + 1)) << ',' << format_double(h.lon_edge(j)) << ','
            << format_double(h.lon_edge(j + 1)) << ',' << h.counts[k] << ','
            << format_double(h.solid_angle[k]) << ',' << format_double(h.density[k]) << '\n';
      }
  } else {
    ojson j;
    j["kind"] = "sphere_histogram";
    j["schema"] = 1;
    j["grid"] = {{"n_lat", h.n_lat},
                 {"n_lon", h.n_lon},
                 {"pole", "+y"},
                 {"lat", "asin(y)"},
                 {"lon", "atan2(x, z)"}};
    j["total"] = h.total;
    j["counts"] = h.counts;
    j["solid_angle"] = h.solid_angle;
    j["density"] = h.density;
    out << j.dump() << '\n';
  }
  check_stream(out);
}

void export_bounds(const RangeBounds& b, ExportFormat format, std::ostream& out) {
  if (format == ExportFormat::csv) {
    out << "placement,pitch_lo,pitch_hi,energy_lo,energy_hi,samples\n";
    out << to_string(b.placement) << ',' << format_double(b.pitch_lo) << ','
        << format_double(b.pitch_hi) << ',' << format_double(b.energy_lo) << ','
        << format_double(b.energy_hi) << ',' << b.samples << '\n';
  } else {
    ojson j;
    j["kind"] = "range_bounds";
    j["schema"] = 1;
    j["placement"] = std::string(to_string(b.placement));
    j["pitch_lo"] = b.pitch_lo;
    j["pitch_hi"] = b.pitch_hi;
    j["energy_lo"] = b.energy_lo;
    j["energy_hi"] = b.energy_hi;
    j["samples"] = b.samples;
    out << j.dump() << '\n';
  }
  check_stream(out);
}

std::vector<EnergyPoint> parse_trace_csv(std::istream& in) {
  expect_header(in, "t_us,energy");
  std::vector<EnergyPoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) throw Error(ErrorCode::schema, "trace row needs 2 cells");
    out.push_back({parse_u64(cells[0]), parse_double(cells[1])});
  }
  return out;
}

std::vector<PathPoint> parse_path_csv(std::istream& in) {
  expect_header(in, "t_us,x,y,z");
  std::vector<PathPoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw Error(ErrorCode::schema, "path row needs 4 cells");
    out.push_back({parse_u64(cells[0]),
                   {parse_double(cells[1]), parse_double(cells[2]), parse_double(cells[3])}});
  }
  return out;
}

SphereHistogram parse_histogram_json(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("kind") != "sphere_histogram") throw Error(ErrorCode::schema, "not a sphere histogram");
    SphereHistogram h;
    h.n_lat = j.at("grid").at("n_lat").get<int>();
    h.n_lon = j.at("grid").at("n_lon").get<int>();
    h.total = j.at("total").get<std::uint64_t>();
    h.counts = j.at("counts").get<std::vector<std::uint64_t>>();
    h.solid_angle = j.at("solid_angle").get<std::vector<double>>();
    h.density = j.at("density").get<std::vector<double>>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, e.what());
  }
}

RangeBounds parse_bounds_json(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("kind") != "range_bounds") throw Error(ErrorCode::schema, "not range bounds");
    RangeBounds b;
    const auto p = parse_placement(j.at("placement").get<std::string>());
    if (!p) throw Error(ErrorCode::schema, "unknown placement");
    b.placement = *p;
    b.pitch_lo = j.at("pitch_lo").get<double>();
    b.pitch_hi = j.at("pitch_hi").get<double>();
    b.energy_lo = j.at("energy_lo").get<double>();
    b.energy_hi = j.at("energy_hi").get<double>();
    b.samples = j.at("samples").get<std::size_t>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, e.what());
  }
}

}  // namespace motionbrush
