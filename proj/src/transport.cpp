#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "race/protocol.hpp"

namespace race::protocol {

namespace {

using Clock = std::chrono::steady_clock;

// ---- in-process ----

struct Pipe {
  std::deque<Message> messages;
  std::deque<std::string> lines;
  bool closed = false;
};

struct SharedState {
  std::mutex mu;
  std::condition_variable cv;
  Pipe pipes[2];  // pipes[i] carries messages toward end i
};

class InProcessChannel : public MessageChannel {
 public:
  InProcessChannel(std::shared_ptr<SharedState> s, int self, bool codec)
      : s_(std::move(s)), self_(self), codec_(codec) {}
  ~InProcessChannel() override { close(); }

  void send(const Message& m) override {
    std::string line;
    if (codec_) line = encode_message(m);
    {
      std::lock_guard lock(s_->mu);
      Pipe& out = s_->pipes[1 - self_];
      if (out.closed || s_->pipes[self_].closed) throw TransportError("channel closed");
      if (codec_) {
        out.lines.push_back(std::move(line));
      } else {
        out.messages.push_back(m);
      }
    }
    s_->cv.notify_all();
  }

  std::optional<Message> receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(s_->mu);
    Pipe& in = s_->pipes[self_];
    const bool ready = s_->cv.wait_for(lock, timeout, [&] {
      return !in.messages.empty() || !in.lines.empty() || in.closed;
    });
    if (!ready) return std::nullopt;
    if (codec_ && !in.lines.empty()) {
      std::string line = std::move(in.lines.front());
      in.lines.pop_front();
      lock.unlock();
      return decode_message(line);
    }
    if (!in.messages.empty()) {
      Message m = std::move(in.messages.front());
      in.messages.pop_front();
      return m;
    }
    throw TransportError("peer closed the channel");
  }

  void close() override {
    {
      std::lock_guard lock(s_->mu);
      // the peer still drains what was already queued for it
      s_->pipes[1 - self_].closed = true;
      s_->pipes[self_].closed = true;
    }
    s_->cv.notify_all();
  }

 private:
  std::shared_ptr<SharedState> s_;
  int self_;
  bool codec_;
};

// ---- file descriptors ----

class FdChannel : public MessageChannel {
 public:
  FdChannel(int in_fd, int out_fd, bool owns) : in_(in_fd), out_(out_fd), owns_(owns) {}
  ~FdChannel() override { close(); }

  void send(const Message& m) override {
    std::string line = encode_message(m);
    line.push_back('\n');
    std::lock_guard lock(write_mu_);
    if (out_ < 0) throw TransportError("channel closed");
    std::size_t off = 0;
    while (off < line.size()) {
      ssize_t n = ::send(out_, line.data() + off, line.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == ENOTSOCK) n = ::write(out_, line.data() + off, line.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<Message> receive(std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        return decode_message(line);
      }
      if (in_ < 0) throw TransportError("channel closed");
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() < 0) return std::nullopt;
      pollfd p{in_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (r == 0) return std::nullopt;
      char chunk[65536];
      const ssize_t n = ::read(in_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw TransportError("peer closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() override {
    std::lock_guard lock(write_mu_);
    if (owns_) {
      if (in_ >= 0) ::close(in_);
      if (out_ >= 0 && out_ != in_) ::close(out_);
    }
    in_ = out_ = -1;
  }

 private:
  int in_;
  int out_;
  bool owns_;
  std::string buffer_;
  std::mutex write_mu_;
};

addrinfo* resolve(const std::string& host, int port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  return res;
}

void no_delay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>> make_channel_pair(
    bool through_codec) {
  auto s = std::make_shared<SharedState>();
  return {std::make_unique<InProcessChannel>(s, 0, through_codec),
          std::make_unique<InProcessChannel>(s, 1, through_codec)};
}

std::unique_ptr<MessageChannel> make_fd_channel(int in_fd, int out_fd, bool owns_fds) {
  return std::make_unique<FdChannel>(in_fd, out_fd, owns_fds);
}

Endpoint parse_endpoint(const std::string& text) {
  Endpoint e;
  if (text == "stdio") {
    e.kind = Endpoint::Kind::stdio;
    return e;
  }
  if (text.rfind("builtin:", 0) == 0) {
    e.kind = Endpoint::Kind::builtin;
    e.name = text.substr(8);
    if (e.name.empty()) throw std::invalid_argument("builtin endpoint needs an agent name");
    return e;
  }
  if (text.rfind("tcp://", 0) == 0) {
    const std::string rest = text.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("tcp endpoint needs host:port");
    e.kind = Endpoint::Kind::tcp;
    e.name = rest.substr(0, colon);
    try {
      e.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad port in '" + text + "'");
    }
    if (e.port <= 0 || e.port > 65535) throw std::invalid_argument("port out of range in '" + text + "'");
    return e;
  }
  throw std::invalid_argument("unrecognised endpoint '" + text + "'");
}

std::unique_ptr<MessageChannel> accept_tcp(const std::string& host, int port,
                                           std::chrono::milliseconds timeout) {
  addrinfo* res = resolve(host, port, true);
  int listener = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    listener = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (listener < 0) continue;
    int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener, a->ai_addr, a->ai_addrlen) == 0 && ::listen(listener, 1) == 0) break;
    ::close(listener);
    listener = -1;
  }
  ::freeaddrinfo(res);
  if (listener < 0) throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
  pollfd p{listener, POLLIN, 0};
  const int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (r <= 0) {
    ::close(listener);
    throw TransportError("no agent connected to " + host + ":" + std::to_string(port));
  }
  const int fd = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (fd < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
  no_delay(fd);
  return make_fd_channel(fd, fd, true);
}

std::unique_ptr<MessageChannel> connect_tcp(const std::string& host, int port,
                                            std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (true) {
    addrinfo* res = resolve(host, port, false);
    for (addrinfo* a = res; a; a = a->ai_next) {
      const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
        ::freeaddrinfo(res);
        no_delay(fd);
        return make_fd_channel(fd, fd, true);
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (Clock::now() >= deadline) {
      throw TransportError("cannot connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace race::protocol
