#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "motionbrush/instrument.hpp"

namespace motionbrush {

inline constexpr std::uint16_t kDefaultFeedPort = 7402;
inline constexpr std::size_t kDefaultBacklog = 120;

/// {"type":"frame","t_us":..,"scene":..,"brushes":[{"id","x","y","w","e","tex","still","stale"}]}
std::string frame_message(const CanvasFrameState& state);
/// One message per event, in emission order.
std::vector<std::string> event_messages(const CanvasFrameState& state);
std::string event_message(const CanvasEvent& event);

/// A feed subscriber's bounded outbox.
class Subscriber {
 public:
  explicit Subscriber(std::size_t capacity) : capacity_(capacity) {}

  /// Takes everything queued so far.
  std::vector<std::string> take();
  bool disconnected() const;
  std::size_t backlog() const;

  /// Called (from the publishing thread) whenever a message is queued.
  std::function<void()> on_message;
  /// Called once when the hub drops this subscriber.
  std::function<void()> on_disconnect;

 private:
  friend class FeedHub;
  bool offer(const std::string& msg);

  mutable std::mutex mu_;
  std::deque<std::string> queue_;
  std::size_t capacity_;
  bool disconnected_ = false;
};

/// Fans messages out to subscribers. publish() never blocks on a consumer:
/// a subscriber whose backlog is full is disconnected instead.
class FeedHub {
 public:
  explicit FeedHub(std::size_t backlog = kDefaultBacklog) : backlog_(backlog) {}

  std::shared_ptr<Subscriber> subscribe();
  void unsubscribe(const std::shared_ptr<Subscriber>& sub);
  void publish(const std::string& msg);

  std::size_t subscriber_count() const;
  std::uint64_t disconnected_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Subscriber>> subs_;
  std::size_t backlog_;
  std::uint64_t disconnected_ = 0;
};

/// Commands received from /control, applied by the tick loop between ticks.
class CommandQueue {
 public:
  using Reply = std::function<void(const std::string&)>;

  void submit(nlohmann::json msg, Reply reply);
  /// Applies every queued command in arrival order; each produces exactly one
  /// reply through its callback.
  std::size_t apply(const std::function<CommandReply(const nlohmann::json&)>& handler);

 private:
  std::mutex mu_;
  std::vector<std::pair<nlohmann::json, Reply>> pending_;
};

/// Parses a /control text message; malformed JSON becomes an error reply
/// without reaching the engine.
void submit_control_text(CommandQueue& queue, const std::string& text, CommandQueue::Reply reply);

/// WebSocket + HTTP front end on one port:
///   /feed          server push of frame and event messages
///   /control       commands in, ack/error replies out
///   /textures/<id> static texture assets under texture_root
class FeedServer {
 public:
  FeedServer(FeedHub& hub, CommandQueue& commands, std::string texture_root,
             std::uint16_t port);
  ~FeedServer();
  FeedServer(const FeedServer&) = delete;
  FeedServer& operator=(const FeedServer&) = delete;

  std::uint16_t port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Resolves /textures/<id> under root; empty when the id escapes the root
/// or is otherwise unacceptable.
std::string texture_path(const std::string& root, const std::string& id);

}  // namespace motionbrush
