#include "depse/wire.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

namespace depse::wire {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void wait_ready(int fd, short events, int timeout_ms) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc > 0) return;
    if (rc == 0) throw TimeoutError("score server did not respond within " +
                                    std::to_string(timeout_ms) + " ms");
    if (errno != EINTR) throw ProtocolError(errno_text("poll"));
  }
}

template <typename T>
void append(std::vector<char>& buf, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T take(Connection& c) {
  T v;
  c.read_exact(&v, sizeof(T));
  return v;
}

void send_error(Connection& conn, ErrorCode code) {
  std::vector<char> buf;
  append<std::uint32_t>(buf, kTagError);
  append<std::uint32_t>(buf, static_cast<std::uint32_t>(code));
  try {
    conn.write_all(buf.data(), buf.size());
  } catch (const Error&) {
    // Peer already gone.
  }
}

[[noreturn]] void raise_remote(std::uint32_t code) {
  switch (static_cast<ErrorCode>(code)) {
    case ErrorCode::shape: throw ShapeError("score server rejected the shape");
    case ErrorCode::bad_magic: throw ProtocolError("score server: bad magic");
    case ErrorCode::bad_version: throw ProtocolError("score server: unsupported protocol version");
    case ErrorCode::bad_frame: throw ProtocolError("score server: malformed frame");
    case ErrorCode::internal: throw ProtocolError("score server: internal error");
  }
  throw ProtocolError("score server: unknown error code " + std::to_string(code));
}

void read_pairs(Connection& conn, Spectrogram& out) {
  std::vector<float> raw(2 * out.size());
  conn.read_exact(raw.data(), raw.size() * sizeof(float));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {raw[2 * k], raw[2 * k + 1]};
}

void append_pairs(std::vector<char>& buf, const Spectrogram& s) {
  for (const cplx& c : s) {
    append<float>(buf, static_cast<float>(c.real()));
    append<float>(buf, static_cast<float>(c.imag()));
  }
}

}  // namespace

Connection::Connection(int read_fd, int write_fd, int timeout_ms, bool owned, pid_t child)
    : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(timeout_ms), owned_(owned),
      child_(child) {
  int type = 0;
  socklen_t len = sizeof(type);
  socket_ = ::getsockopt(write_fd_, SOL_SOCKET, SO_TYPE, &type, &len) == 0;
}

Connection Connection::from_fds(int read_fd, int write_fd, int timeout_ms, bool owned) {
  return Connection(read_fd, write_fd, timeout_ms, owned, -1);
}

Connection Connection::spawn(const std::vector<std::string>& argv, int timeout_ms) {
  if (argv.empty()) throw ConfigError("score endpoint command is empty");
  // A dead child must surface as an error on write, not kill the process.
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw ProtocolError(errno_text("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ProtocolError(errno_text("pipe"));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError(errno_text("fork"));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return Connection(from_child[0], to_child[1], timeout_ms, true, pid);
}

Connection Connection::tcp(const std::string& host, std::uint16_t port, int timeout_ms) {
  ::signal(SIGPIPE, SIG_IGN);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  const int wfd = ::dup(fd);
  return Connection(fd, wfd, timeout_ms, true, -1);
}

Connection::Connection(Connection&& o) noexcept
    : read_fd_(o.read_fd_), write_fd_(o.write_fd_), timeout_ms_(o.timeout_ms_),
      owned_(o.owned_), socket_(o.socket_), child_(o.child_) {
  o.read_fd_ = o.write_fd_ = -1;
  o.child_ = -1;
  o.owned_ = false;
}

Connection& Connection::operator=(Connection&& o) noexcept {
  if (this != &o) {
    close_all();
    read_fd_ = o.read_fd_;
    write_fd_ = o.write_fd_;
    timeout_ms_ = o.timeout_ms_;
    owned_ = o.owned_;
    socket_ = o.socket_;
    child_ = o.child_;
    o.read_fd_ = o.write_fd_ = -1;
    o.child_ = -1;
    o.owned_ = false;
  }
  return *this;
}

Connection::~Connection() { close_all(); }

void Connection::close_all() noexcept {
  if (owned_) {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
  }
  read_fd_ = write_fd_ = -1;
  if (child_ > 0) {
    // The child sees EOF on stdin and should exit; give it a moment.
    for (int k = 0; k < 100; ++k) {
      if (::waitpid(child_, nullptr, WNOHANG) == child_) {
        child_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, nullptr, 0);
    child_ = -1;
  }
}

bool Connection::read_or_eof(void* out, std::size_t n) {
  auto* p = static_cast<char*>(out);
  std::size_t got = 0;
  while (got < n) {
    wait_ready(read_fd_, POLLIN, timeout_ms_);
    const ssize_t rc = ::read(read_fd_, p + got, n - got);
    if (rc > 0) {
      got += static_cast<std::size_t>(rc);
    } else if (rc == 0) {
      if (got == 0) return false;
      throw ProtocolError("score stream truncated (" + std::to_string(got) + " of " +
                          std::to_string(n) + " bytes)");
    } else if (errno != EINTR) {
      throw ProtocolError(errno_text("read"));
    }
  }
  return true;
}

void Connection::read_exact(void* out, std::size_t n) {
  if (!read_or_eof(out, n)) throw ProtocolError("score stream closed by peer");
}

void Connection::write_all(const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  std::size_t sent = 0;
  while (sent < n) {
    wait_ready(write_fd_, POLLOUT, timeout_ms_);
    const ssize_t rc = socket_ ? ::send(write_fd_, p + sent, n - sent, MSG_NOSIGNAL)
                               : ::write(write_fd_, p + sent, n - sent);
    if (rc >= 0) {
      sent += static_cast<std::size_t>(rc);
    } else if (errno != EINTR) {
      throw ProtocolError(errno_text("write"));
    }
  }
}

void client_handshake(Connection& conn, Shape shape) {
  std::vector<char> buf(kMagic, kMagic + 4);
  append<std::uint32_t>(buf, kVersion);
  append<std::uint32_t>(buf, static_cast<std::uint32_t>(shape.freqs));
  append<std::uint32_t>(buf, static_cast<std::uint32_t>(shape.frames));
  conn.write_all(buf.data(), buf.size());

  const auto head = take<std::uint32_t>(conn);
  if (head == kTagError) raise_remote(take<std::uint32_t>(conn));
  if (std::memcmp(&head, kMagic, 4) != 0) throw ProtocolError("handshake reply has bad magic");
  const auto version = take<std::uint32_t>(conn);
  const auto f = take<std::uint32_t>(conn);
  const auto l = take<std::uint32_t>(conn);
  if (version != kVersion)
    throw ProtocolError("score server speaks protocol version " + std::to_string(version));
  if (f != shape.freqs || l != shape.frames)
    throw ShapeError("score server confirmed shape " + std::to_string(f) + "x" +
                     std::to_string(l) + ", expected " + std::to_string(shape.freqs) + "x" +
                     std::to_string(shape.frames));
}

Spectrogram request_score(Connection& conn, const Spectrogram& state, double t) {
  std::vector<char> buf;
  buf.reserve(12 + 8 * state.size());
  append<std::uint32_t>(buf, kTagRequest);
  append<double>(buf, t);
  append_pairs(buf, state);
  conn.write_all(buf.data(), buf.size());

  const auto tag = take<std::uint32_t>(conn);
  if (tag == kTagError) raise_remote(take<std::uint32_t>(conn));
  if (tag != kTagReply) throw ProtocolError("unexpected frame tag " + std::to_string(tag));
  Spectrogram out(state.shape());
  read_pairs(conn, out);
  return out;
}

void serve(Connection& conn, const ModelFactory& factory) {
  char magic[4];
  if (!conn.read_or_eof(magic, 4)) return;
  if (std::memcmp(magic, kMagic, 4) != 0) return send_error(conn, ErrorCode::bad_magic);
  const auto version = take<std::uint32_t>(conn);
  const Shape shape{take<std::uint32_t>(conn), take<std::uint32_t>(conn)};
  if (version != kVersion) return send_error(conn, ErrorCode::bad_version);

  std::unique_ptr<ScoreModel> model;
  try {
    model = factory(shape);
  } catch (const ShapeError&) {
    return send_error(conn, ErrorCode::shape);
  } catch (const std::exception&) {
    return send_error(conn, ErrorCode::internal);
  }
  std::vector<char> hello(kMagic, kMagic + 4);
  append<std::uint32_t>(hello, kVersion);
  append<std::uint32_t>(hello, static_cast<std::uint32_t>(shape.freqs));
  append<std::uint32_t>(hello, static_cast<std::uint32_t>(shape.frames));
  conn.write_all(hello.data(), hello.size());

  Spectrogram state(shape);
  std::vector<char> reply;
  for (;;) {
    std::uint32_t tag;
    if (!conn.read_or_eof(&tag, sizeof(tag))) return;
    if (tag != kTagRequest) return send_error(conn, ErrorCode::bad_frame);
    const auto t = take<double>(conn);
    read_pairs(conn, state);
    Spectrogram out;
    try {
      out = model->score(state, t);
    } catch (const std::exception&) {
      return send_error(conn, ErrorCode::internal);
    }
    reply.clear();
    append<std::uint32_t>(reply, kTagReply);
    append_pairs(reply, out);
    conn.write_all(reply.data(), reply.size());
  }
}

ExternalScore::ExternalScore(Connection conn, Shape shape)
    : conn_(std::move(conn)), shape_(shape) {
  client_handshake(conn_, shape_);
}

Spectrogram ExternalScore::score(const Spectrogram& state, double t) const {
  require_same_shape(state.shape(), shape_, "external score");
  std::lock_guard lock(mutex_);
  return request_score(conn_, state, t);
}

}  // namespace depse::wire
