#include "motionbrush/codec.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "motionbrush/error.hpp"

namespace motionbrush {
namespace {

static_assert(std::endian::native == std::endian::little,
              "wire codec assumes a little-endian host");

template <typename T>
void put(WireFrame& out, std::size_t offset, T value) {
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

const char* to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::ok: return "ok";
    case DecodeStatus::need_more_data: return "need_more_data";
    case DecodeStatus::bad_magic: return "bad_magic";
    case DecodeStatus::bad_version: return "bad_version";
    case DecodeStatus::bad_crc: return "bad_crc";
    case DecodeStatus::bad_device: return "bad_device";
    case DecodeStatus::non_finite: return "non_finite";
    case DecodeStatus::non_unit_quaternion: return "non_unit_quaternion";
    case DecodeStatus::acc_out_of_range: return "acc_out_of_range";
  }
  return "unknown";
}

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  const uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

WireFrame encode_frame(const SensorFrame& frame) {
  if (frame.device_id >= kMaxDevices)
    throw Error(ErrorCode::encode,
                "device_id " + std::to_string(frame.device_id) + " exceeds 3");
  WireFrame out{};
  out[0] = kMagic0;
  out[1] = kMagic1;
  out[2] = kWireVersion;
  out[3] = frame.device_id;
  put(out, 4, frame.seq);
  put(out, 8, frame.t_us);
  for (std::size_t i = 0; i < 4; ++i) put(out, 16 + 4 * i, frame.quat[i]);
  for (std::size_t i = 0; i < 3; ++i) put(out, 32 + 4 * i, frame.acc[i]);
  put(out, 44, crc32_ieee(std::span(out.data(), 44)));
  return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
  DecodeResult r;
  if (bytes.size() < kWireFrameSize) return r;
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) {
    r.status = DecodeStatus::bad_magic;
    return r;
  }
  if (bytes[2] != kWireVersion) {
    r.status = DecodeStatus::bad_version;
    return r;
  }
  if (get<std::uint32_t>(bytes, 44) != crc32_ieee(bytes.first(44))) {
    r.status = DecodeStatus::bad_crc;
    return r;
  }

  SensorFrame& f = r.frame;
  f.device_id = bytes[3];
  f.seq = get<std::uint32_t>(bytes, 4);
  f.t_us = get<std::uint64_t>(bytes, 8);
  for (std::size_t i = 0; i < 4; ++i) f.quat[i] = get<float>(bytes, 16 + 4 * i);
  for (std::size_t i = 0; i < 3; ++i) f.acc[i] = get<float>(bytes, 32 + 4 * i);

  if (f.device_id >= kMaxDevices) {
    r.status = DecodeStatus::bad_device;
    return r;
  }
  for (float c : f.quat)
    if (!std::isfinite(c)) r.status = DecodeStatus::non_finite;
  for (float c : f.acc)
    if (!std::isfinite(c)) r.status = DecodeStatus::non_finite;
  if (r.status == DecodeStatus::non_finite) return r;

  const Quat q{f.quat[0], f.quat[1], f.quat[2], f.quat[3]};
  if (std::abs(q.norm() - 1.0) >= kQuatNormTolerance) {
    r.status = DecodeStatus::non_unit_quaternion;
    return r;
  }
  for (float c : f.acc) {
    if (std::abs(c) >= kAccSanityBound) {
      r.status = DecodeStatus::acc_out_of_range;
      return r;
    }
  }
  r.status = DecodeStatus::ok;
  return r;
}

std::vector<SensorFrame> StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  std::vector<SensorFrame> out;
  std::size_t pos = 0;
  while (buffer_.size() - pos >= 2) {
    if (buffer_[pos] != kMagic0 || buffer_[pos + 1] != kMagic1) {
      ++pos;
      ++counters_.skipped_bytes;
      continue;
    }
    if (buffer_.size() - pos < kWireFrameSize) break;
    const auto result =
        decode_frame(std::span(buffer_.data() + pos, kWireFrameSize));
    switch (result.status) {
      case DecodeStatus::ok:
        out.push_back(result.frame);
        ++counters_.frames;
        pos += kWireFrameSize;
        break;
      case DecodeStatus::bad_version:
      case DecodeStatus::bad_crc:
      case DecodeStatus::bad_magic:
      case DecodeStatus::need_more_data:
        // Not a frame boundary after all.
        ++pos;
        ++counters_.skipped_bytes;
        break;
      default:
        // Checksummed frame with invalid content: drop it whole.
        ++counters_.rejected;
        pos += kWireFrameSize;
        break;
    }
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
  return out;
}

}  // namespace motionbrush
