#include "motionbrush/profile_io.hpp"

#include <fstream>

#include "motionbrush/error.hpp"

namespace motionbrush {
namespace {

double number_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw Error(ErrorCode::schema, std::string("missing field '") + name + "'");
  const auto& v = j.at(name);
  if (!v.is_number()) throw Error(ErrorCode::schema, std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

}  // namespace

nlohmann::ordered_json profile_to_json(const CalibrationProfile& p) {
  nlohmann::ordered_json j;
  j["version"] = kProfileVersion;
  j["placement"] = std::string(to_string(p.placement));
  j["q_ref"] = {p.q_ref.w, p.q_ref.x, p.q_ref.y, p.q_ref.z};
  j["pitch_lo"] = p.pitch_lo;
  j["pitch_hi"] = p.pitch_hi;
  j["energy_lo"] = p.energy_lo;
  j["energy_hi"] = p.energy_hi;
  j["window_s"] = p.window_s;
  return j;
}

CalibrationProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::schema, "profile must be a JSON object");
  if (!j.contains("version")) throw Error(ErrorCode::schema, "missing field 'version'");
  if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kProfileVersion)
    throw Error(ErrorCode::unsupported_version,
                "unsupported profile version " + j.at("version").dump());

  CalibrationProfile p;
  if (!j.contains("placement") || !j.at("placement").is_string())
    throw Error(ErrorCode::schema, "missing field 'placement'");
  const auto placement = parse_placement(j.at("placement").get<std::string>());
  if (!placement)
    throw Error(ErrorCode::schema, "unknown placement '" + j.at("placement").get<std::string>() + "'");
  p.placement = *placement;

  if (!j.contains("q_ref") || !j.at("q_ref").is_array() || j.at("q_ref").size() != 4)
    throw Error(ErrorCode::schema, "field 'q_ref' must be an array of 4 numbers");
  for (const auto& c : j.at("q_ref"))
    if (!c.is_number()) throw Error(ErrorCode::schema, "field 'q_ref' must be an array of 4 numbers");
  const auto& q = j.at("q_ref");
  p.q_ref = {q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()};

  p.pitch_lo = number_field(j, "pitch_lo");
  p.pitch_hi = number_field(j, "pitch_hi");
  p.energy_lo = number_field(j, "energy_lo");
  p.energy_hi = number_field(j, "energy_hi");
  p.window_s = number_field(j, "window_s");

  if (auto why = p.validate()) throw Error(ErrorCode::schema, "invalid profile: " + *why);
  return p;
}

void save_profile(const CalibrationProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  out << profile_to_json(profile).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "failed writing " + path);
}

CalibrationProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open profile " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::schema, path + ": " + e.what());
  }
  return profile_from_json(j);
}

}  // namespace motionbrush
