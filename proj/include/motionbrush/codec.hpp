#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "motionbrush/motion.hpp"

namespace motionbrush {

// Wire frame, little-endian, 48 bytes:
//   0-1   magic 0xA1 0x53
//   2     version 0x01
//   3     device_id u8
//   4-7   seq u32
//   8-15  t_us u64
//   16-31 quat w, x, y, z f32
//   32-43 acc x, y, z f32
//   44-47 CRC32 (IEEE, reflected) over bytes 0-43
inline constexpr std::size_t kWireFrameSize = 48;
inline constexpr std::uint8_t kMagic0 = 0xA1;
inline constexpr std::uint8_t kMagic1 = 0x53;
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::uint16_t kDefaultUdpPort = 7401;

using WireFrame = std::array<std::uint8_t, kWireFrameSize>;

enum class DecodeStatus {
  ok,
  need_more_data,
  bad_magic,
  bad_version,
  bad_crc,
  bad_device,
  non_finite,
  non_unit_quaternion,
  acc_out_of_range,
};

const char* to_string(DecodeStatus s);

struct DecodeResult {
  DecodeStatus status = DecodeStatus::need_more_data;
  SensorFrame frame{};

  bool ok() const { return status == DecodeStatus::ok; }
};

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

/// Throws Error(encode) when device_id > 3.
WireFrame encode_frame(const SensorFrame& frame);

/// Decodes the first 48 bytes. Shorter input yields need_more_data.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

/// Byte-stream framing for TCP: frames are contiguous, and after garbage or
/// a corrupted frame the decoder resynchronizes by scanning for the magic
/// followed by a frame whose CRC checks out.
class StreamDecoder {
 public:
  struct Counters {
    std::uint64_t frames = 0;
    std::uint64_t skipped_bytes = 0;
    std::uint64_t rejected = 0;  // CRC-valid frames that failed validation
  };

  /// Appends bytes and returns every frame that became complete.
  std::vector<SensorFrame> feed(std::span<const std::uint8_t> bytes);

  const Counters& counters() const { return counters_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
  Counters counters_;
};

}  // namespace motionbrush
