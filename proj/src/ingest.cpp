#include "motionbrush/ingest.hpp"

#include <algorithm>
#include <boost/asio.hpp>

namespace motionbrush {
namespace {

struct LaterFirst {
  bool operator()(const SensorFrame& a, const SensorFrame& b) const {
    return a.t_us > b.t_us;
  }
};

}  // namespace

std::vector<SensorFrame> ReorderBuffer::push(const SensorFrame& frame) {
  std::vector<SensorFrame> out;
  Device& dev = devices_.at(frame.device_id);
  DeviceCounters& cnt = counters_.at(frame.device_id);

  if (dev.emitted_any && frame.t_us <= dev.last_emitted) {
    ++cnt.dropped_late;
    return out;
  }
  const bool duplicate = std::any_of(dev.pending.begin(), dev.pending.end(),
                                     [&](const SensorFrame& p) { return p.t_us == frame.t_us; });
  if (duplicate) {
    ++cnt.dropped_late;
    return out;
  }

  dev.pending.push_back(frame);
  std::push_heap(dev.pending.begin(), dev.pending.end(), LaterFirst{});
  dev.newest_seen = std::max(dev.newest_seen, frame.t_us);

  while (!dev.pending.empty() &&
         dev.pending.front().t_us + hold_us_ <= dev.newest_seen) {
    std::pop_heap(dev.pending.begin(), dev.pending.end(), LaterFirst{});
    out.push_back(dev.pending.back());
    dev.pending.pop_back();
    dev.last_emitted = out.back().t_us;
    dev.emitted_any = true;
    ++cnt.emitted;
  }
  return out;
}

std::vector<SensorFrame> ReorderBuffer::flush() {
  std::vector<SensorFrame> out;
  for (std::size_t d = 0; d < devices_.size(); ++d) {
    Device& dev = devices_[d];
    std::sort_heap(dev.pending.begin(), dev.pending.end(), LaterFirst{});
    // sort_heap with a reversed comparator leaves the latest first.
    for (auto it = dev.pending.rbegin(); it != dev.pending.rend(); ++it) {
      out.push_back(*it);
      dev.last_emitted = it->t_us;
      dev.emitted_any = true;
      ++counters_[d].emitted;
    }
    dev.pending.clear();
  }
  return out;
}

std::uint64_t ReorderBuffer::total_dropped() const {
  std::uint64_t n = 0;
  for (const auto& c : counters_) n += c.dropped_late;
  return n;
}

void FrameQueue::push(const SensorFrame& f) {
  std::lock_guard lock(mu_);
  frames_.push_back(f);
}

std::vector<SensorFrame> FrameQueue::drain() {
  std::vector<SensorFrame> out;
  std::lock_guard lock(mu_);
  out.swap(frames_);
  return out;
}

namespace asio = boost::asio;
using asio::ip::tcp;
using asio::ip::udp;

struct NetworkSource::Impl {
  asio::io_context io;
  std::unique_ptr<udp::socket> udp_socket;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread worker;
  std::array<std::uint8_t, 2048> datagram{};
  udp::endpoint sender;
  FrameQueue* queue = nullptr;
  Counters* counters = nullptr;

  void receive();
  void accept();
};

namespace {

struct TcpReader : std::enable_shared_from_this<TcpReader> {
  tcp::socket socket;
  StreamDecoder decoder;
  std::array<std::uint8_t, 4096> buf{};
  FrameQueue& queue;
  NetworkSource::Counters& counters;

  TcpReader(tcp::socket s, FrameQueue& q, NetworkSource::Counters& c)
      : socket(std::move(s)), queue(q), counters(c) {}

  void start() {
    socket.async_read_some(
        asio::buffer(buf), [self = shared_from_this()](auto ec, std::size_t n) {
          if (ec) return;
          const auto before = self->decoder.counters().rejected;
          for (const auto& f : self->decoder.feed(std::span(self->buf.data(), n))) {
            self->queue.push(f);
            ++self->counters.frames;
          }
          self->counters.rejected += self->decoder.counters().rejected - before;
          self->start();
        });
  }
};

}  // namespace

void NetworkSource::Impl::receive() {
  udp_socket->async_receive_from(
      asio::buffer(datagram), sender, [this](auto ec, std::size_t n) {
        if (ec == asio::error::operation_aborted) return;
        if (!ec) {
          const auto r = decode_frame(std::span(datagram.data(), n));
          if (r.ok() && n == kWireFrameSize) {
            queue->push(r.frame);
            ++counters->frames;
          } else {
            ++counters->rejected;
          }
        }
        receive();
      });
}

void NetworkSource::Impl::accept() {
  acceptor->async_accept([this](auto ec, tcp::socket s) {
    if (ec == asio::error::operation_aborted) return;
    if (!ec) std::make_shared<TcpReader>(std::move(s), *queue, *counters)->start();
    accept();
  });
}

NetworkSource::NetworkSource(Transport transport, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  impl_->queue = &queue_;
  impl_->counters = &counters_;
  if (transport == Transport::udp) {
    impl_->udp_socket =
        std::make_unique<udp::socket>(impl_->io, udp::endpoint(udp::v4(), port));
    impl_->receive();
  } else {
    impl_->acceptor =
        std::make_unique<tcp::acceptor>(impl_->io, tcp::endpoint(tcp::v4(), port));
    impl_->accept();
  }
  impl_->worker = std::thread([this] { impl_->io.run(); });
}

NetworkSource::~NetworkSource() { stop(); }

std::uint16_t NetworkSource::port() const {
  if (impl_->udp_socket) return impl_->udp_socket->local_endpoint().port();
  return impl_->acceptor->local_endpoint().port();
}

void NetworkSource::stop() {
  if (!impl_ || !impl_->worker.joinable()) return;
  impl_->io.stop();
  impl_->worker.join();
}

void send_udp_frames(const std::vector<SensorFrame>& frames, const char* host,
                     std::uint16_t port) {
  asio::io_context io;
  udp::socket socket(io, udp::v4());
  const udp::endpoint target(asio::ip::make_address(host), port);
  for (const auto& f : frames) {
    const WireFrame bytes = encode_frame(f);
    socket.send_to(asio::buffer(bytes), target);
  }
}

}  // namespace motionbrush
