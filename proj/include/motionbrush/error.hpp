#pragma once

#include <stdexcept>
#include <string>

namespace motionbrush {

enum class ErrorCode {
  invalid_frame,
  out_of_order,
  encode,
  config,
  io,
  schema,
  unsupported_version,
  ordering,
  missing_header,
  unknown_placement,
  insufficient_data,
  no_stillness,
  degenerate_range,
  empty_input,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace motionbrush
