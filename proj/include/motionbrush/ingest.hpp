#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "motionbrush/codec.hpp"
#include "motionbrush/motion.hpp"

namespace motionbrush {

/// Per-device ordering stage. Frames are held until they are at least
/// `hold_us` older than the newest frame seen for their device, then released
/// in timestamp order. A frame that can no longer be emitted in order (its
/// timestamp is at or behind the last emitted one) is dropped and counted.
class ReorderBuffer {
 public:
  struct DeviceCounters {
    std::uint64_t emitted = 0;
    std::uint64_t dropped_late = 0;
  };

  explicit ReorderBuffer(std::uint64_t hold_us = 20'000) : hold_us_(hold_us) {}

  /// Returns the frames released by this arrival, ordered per device.
  std::vector<SensorFrame> push(const SensorFrame& frame);
  /// Releases everything still held (end of stream).
  std::vector<SensorFrame> flush();

  const DeviceCounters& counters(int device) const { return counters_.at(device); }
  std::uint64_t total_dropped() const;
  std::uint64_t hold_us() const { return hold_us_; }

 private:
  struct Device {
    std::vector<SensorFrame> pending;  // min-heap on t_us
    std::uint64_t newest_seen = 0;
    std::uint64_t last_emitted = 0;
    bool emitted_any = false;
  };

  std::uint64_t hold_us_;
  std::array<Device, kMaxDevices> devices_{};
  std::array<DeviceCounters, kMaxDevices> counters_{};
};

/// Thread-safe FIFO of decoded frames between a network reader and the
/// engine loop.
class FrameQueue {
 public:
  void push(const SensorFrame& f);
  std::vector<SensorFrame> drain();

 private:
  std::mutex mu_;
  std::vector<SensorFrame> frames_;
};

/// Receives wire frames over UDP (one per datagram) or TCP (contiguous
/// stream) on a background thread and pushes decoded frames to a queue.
class NetworkSource {
 public:
  enum class Transport { udp, tcp };

  struct Counters {
    std::atomic<std::uint64_t> frames{0};
    std::atomic<std::uint64_t> rejected{0};
  };

  NetworkSource(Transport transport, std::uint16_t port);
  ~NetworkSource();
  NetworkSource(const NetworkSource&) = delete;
  NetworkSource& operator=(const NetworkSource&) = delete;

  /// Actual bound port (useful when constructed with port 0).
  std::uint16_t port() const;
  std::vector<SensorFrame> drain() { return queue_.drain(); }
  const Counters& counters() const { return counters_; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  FrameQueue queue_;
  Counters counters_;
};

/// Sends frames as UDP datagrams; used by tests and the simulator bridge.
void send_udp_frames(const std::vector<SensorFrame>& frames, const char* host,
                     std::uint16_t port);

}  // namespace motionbrush
