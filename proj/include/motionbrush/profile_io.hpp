#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "motionbrush/motion.hpp"

namespace motionbrush {

inline constexpr int kProfileVersion = 1;

nlohmann::ordered_json profile_to_json(const CalibrationProfile& profile);

/// Throws Error(unsupported_version) for a version other than 1 and
/// Error(schema) for missing or mistyped fields or an invalid profile.
CalibrationProfile profile_from_json(const nlohmann::json& j);

void save_profile(const CalibrationProfile& profile, const std::string& path);
CalibrationProfile load_profile(const std::string& path);

}  // namespace motionbrush
