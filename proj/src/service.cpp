#include "motionbrush/service.hpp"

#include <algorithm>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <thread>

namespace motionbrush {

using ojson = nlohmann::ordered_json;

std::string frame_message(const CanvasFrameState& state) {
  ojson j;
  j["type"] = "frame";
  j["t_us"] = state.t_us;
  j["scene"] = state.scene_id;
  ojson brushes = ojson::array();
  for (const auto& b : state.brushes) {
    ojson o;
    o["id"] = b.id;
    o["x"] = b.position.x;
    o["y"] = b.position.y;
    o["w"] = b.width;
    o["e"] = b.e;
    o["tex"] = b.texture;
    o["still"] = b.still;
    o["stale"] = b.stale;
    brushes.push_back(std::move(o));
  }
  j["brushes"] = std::move(brushes);
  return j.dump();
}

std::string event_message(const CanvasEvent& event) {
  ojson j;
  switch (event.kind) {
    case CanvasEvent::Kind::texture_cycle:
      j["type"] = "texture_cycle";
      j["id"] = event.brush_id;
      j["tex"] = event.value;
      break;
    case CanvasEvent::Kind::scene_change:
      j["type"] = "scene_change";
      j["scene"] = event.value;
      break;
    case CanvasEvent::Kind::key_moment:
      j["type"] = "key_moment";
      j["tex"] = event.value;
      break;
    case CanvasEvent::Kind::param:
      j["type"] = "param";
      j["name"] = event.value;
      j["value"] = event.number;
      break;
  }
  return j.dump();
}

std::vector<std::string> event_messages(const CanvasFrameState& state) {
  std::vector<std::string> out;
  out.reserve(state.events.size());
  for (const auto& e : state.events) out.push_back(event_message(e));
  return out;
}

std::vector<std::string> Subscriber::take() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out(std::make_move_iterator(queue_.begin()),
                               std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

bool Subscriber::disconnected() const {
  std::lock_guard lock(mu_);
  return disconnected_;
}

std::size_t Subscriber::backlog() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

bool Subscriber::offer(const std::string& msg) {
  {
    std::lock_guard lock(mu_);
    if (disconnected_) return false;
    if (queue_.size() >= capacity_) {
      disconnected_ = true;
      queue_.clear();
    } else {
      queue_.push_back(msg);
    }
  }
  if (disconnected()) {
    if (on_disconnect) on_disconnect();
    return false;
  }
  if (on_message) on_message();
  return true;
}

std::shared_ptr<Subscriber> FeedHub::subscribe() {
  auto sub = std::make_shared<Subscriber>(backlog_);
  std::lock_guard lock(mu_);
  subs_.push_back(sub);
  return sub;
}

void FeedHub::unsubscribe(const std::shared_ptr<Subscriber>& sub) {
  std::lock_guard lock(mu_);
  std::erase(subs_, sub);
}

void FeedHub::publish(const std::string& msg) {
  std::vector<std::shared_ptr<Subscriber>> subs;
  {
    std::lock_guard lock(mu_);
    subs = subs_;
  }
  std::vector<std::shared_ptr<Subscriber>> dropped;
  for (const auto& s : subs)
    if (!s->offer(msg)) dropped.push_back(s);
  if (dropped.empty()) return;
  std::lock_guard lock(mu_);
  for (const auto& s : dropped) {
    const auto before = subs_.size();
    std::erase(subs_, s);
    disconnected_ += before - subs_.size();
  }
}

std::size_t FeedHub::subscriber_count() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

std::uint64_t FeedHub::disconnected_count() const {
  std::lock_guard lock(mu_);
  return disconnected_;
}

void CommandQueue::submit(nlohmann::json msg, Reply reply) {
  std::lock_guard lock(mu_);
  pending_.emplace_back(std::move(msg), std::move(reply));
}

std::size_t CommandQueue::apply(
    const std::function<CommandReply(const nlohmann::json&)>& handler) {
  std::vector<std::pair<nlohmann::json, Reply>> batch;
  {
    std::lock_guard lock(mu_);
    batch.swap(pending_);
  }
  for (auto& [msg, reply] : batch) {
    const std::string text = handler(msg).dump();
    if (reply) reply(text);
  }
  return batch.size();
}

void submit_control_text(CommandQueue& queue, const std::string& text, CommandQueue::Reply reply) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    ojson err;
    err["type"] = "error";
    err["code"] = "bad_request";
    err["msg"] = "command is not valid JSON";
    if (reply) reply(err.dump());
    return;
  }
  queue.submit(std::move(msg), std::move(reply));
}

std::string texture_path(const std::string& root, const std::string& id) {
  if (root.empty() || id.empty()) return {};
  namespace fs = std::filesystem;
  const fs::path rel(id);
  if (rel.is_absolute()) return {};
  for (const auto& part : rel)
    if (part == "..") return {};
  return (fs::path(root) / rel).string();
}

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::string mime_type(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

// Serializes outgoing text messages on one websocket.
class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  explicit WsSession(tcp::socket&& socket) : ws_(std::move(socket)) {}
  virtual ~WsSession() = default;

  template <class Body, class Allocator>
  void accept(http::request<Body, http::basic_fields<Allocator>> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->on_open();
      self->read();
    });
  }

  void send(std::string msg) {
    outbox_.push_back(std::move(msg));
    if (outbox_.size() == 1) write_next();
  }

  void close() {
    if (closing_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::going_away,
                    [self = shared_from_this()](beast::error_code) {});
  }

 protected:
  virtual void on_open() {}
  virtual void on_text(const std::string&) {}
  virtual void on_closed() {}
  virtual void on_drained() {}

  asio::any_io_executor executor() { return ws_.get_executor(); }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->on_closed();
        return;
      }
      self->on_text(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->outbox_.clear();
                        return;
                      }
                      self->outbox_.pop_front();
                      if (!self->outbox_.empty())
                        self->write_next();
                      else
                        self->on_drained();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool closing_ = false;
};

class FeedSession final : public WsSession {
 public:
  FeedSession(tcp::socket&& socket, FeedHub& hub) : WsSession(std::move(socket)), hub_(hub) {}

 private:
  void on_open() override {
    sub_ = hub_.subscribe();
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto exec = executor();
    sub_->on_message = [weak, exec] {
      asio::post(exec, [weak] {
        if (auto s = weak.lock()) static_cast<FeedSession*>(s.get())->pump();
      });
    };
    sub_->on_disconnect = [weak, exec] {
      asio::post(exec, [weak] {
        if (auto s = weak.lock()) s->close();
      });
    };
  }

  void pump() {
    if (busy_ || !sub_) return;
    auto msgs = sub_->take();
    if (msgs.empty()) return;
    busy_ = true;
    for (auto& m : msgs) send(std::move(m));
  }

  void on_drained() override {
    busy_ = false;
    pump();
  }

  void on_closed() override {
    if (sub_) hub_.unsubscribe(sub_);
    sub_.reset();
  }

  FeedHub& hub_;
  std::shared_ptr<Subscriber> sub_;
  bool busy_ = false;
};

class ControlSession final : public WsSession {
 public:
  ControlSession(tcp::socket&& socket, CommandQueue& commands)
      : WsSession(std::move(socket)), commands_(commands) {}

 private:
  void on_text(const std::string& text) override {
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto exec = executor();
    submit_control_text(commands_, text, [weak, exec](const std::string& reply) {
      asio::post(exec, [weak, reply] {
        if (auto s = weak.lock()) s->send(reply);
      });
    });
  }

  CommandQueue& commands_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, FeedHub& hub, CommandQueue& commands,
              const std::string& texture_root)
      : stream_(std::move(socket)), hub_(hub), commands_(commands), texture_root_(texture_root) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->handle();
                     });
  }

 private:
  void handle() {
    const std::string target(req_.target());
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      if (target == "/feed") {
        std::make_shared<FeedSession>(stream_.release_socket(), hub_)->accept(std::move(req_));
        return;
      }
      if (target == "/control") {
        std::make_shared<ControlSession>(stream_.release_socket(), commands_)
            ->accept(std::move(req_));
        return;
      }
    }
    const std::string prefix = "/textures/";
    if (req_.method() == http::verb::get && target.rfind(prefix, 0) == 0) {
      const std::string path = texture_path(texture_root_, target.substr(prefix.size()));
      beast::error_code ec;
      http::file_body::value_type body;
      if (!path.empty()) body.open(path.c_str(), beast::file_mode::scan, ec);
      if (!path.empty() && !ec) {
        auto res = std::make_shared<http::response<http::file_body>>(
            std::piecewise_construct, std::make_tuple(std::move(body)),
            std::make_tuple(http::status::ok, req_.version()));
        res->set(http::field::content_type, mime_type(path));
        res->set(http::field::access_control_allow_origin, "*");
        res->prepare_payload();
        http::async_write(stream_, *res,
                          [self = shared_from_this(), res](beast::error_code, std::size_t) {
                            self->stream_.socket().shutdown(tcp::socket::shutdown_send);
                          });
        return;
      }
    }
    auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found,
                                                                    req_.version());
    res->set(http::field::content_type, "text/plain");
    res->body() = "not found\n";
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  FeedHub& hub_;
  CommandQueue& commands_;
  const std::string& texture_root_;
};

}  // namespace

struct FeedServer::Impl {
  FeedHub& hub;
  CommandQueue& commands;
  std::string texture_root;
  asio::io_context io{1};
  tcp::acceptor acceptor{io};
  std::thread worker;

  Impl(FeedHub& h, CommandQueue& c, std::string root) : hub(h), commands(c), texture_root(std::move(root)) {}

  void accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket s) {
      if (ec == asio::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpSession>(std::move(s), hub, commands, texture_root)->run();
      accept();
    });
  }
};

FeedServer::FeedServer(FeedHub& hub, CommandQueue& commands, std::string texture_root,
                       std::uint16_t port)
    : impl_(std::make_unique<Impl>(hub, commands, std::move(texture_root))) {
  const tcp::endpoint endpoint(asio::ip::make_address("0.0.0.0"), port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
  impl_->accept();
  impl_->worker = std::thread([this] { impl_->io.run(); });
}

FeedServer::~FeedServer() { stop(); }

std::uint16_t FeedServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void FeedServer::stop() {
  if (!impl_ || !impl_->worker.joinable()) return;
  impl_->io.stop();
  impl_->worker.join();
}

}  // namespace motionbrush
