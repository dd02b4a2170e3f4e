#pragma once

#include <sys/types.h>

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "depse/score.hpp"

// Score wire protocol, version 1. Little-endian frames over a byte stream.
//   handshake (client -> server, echoed back on acceptance):
//     "DPSC" u32 version u32 F u32 L
//   request:  u32 1, f64 t, F*L x (f32 re, f32 im), row-major
//   reply:    u32 2, F*L x (f32 re, f32 im)
//   error:    u32 0xFFFF, u32 code
namespace depse::wire {

inline constexpr char kMagic[4] = {'D', 'P', 'S', 'C'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kTagRequest = 1;
inline constexpr std::uint32_t kTagReply = 2;
inline constexpr std::uint32_t kTagError = 0xFFFF;

enum class ErrorCode : std::uint32_t {
  bad_magic = 1,
  bad_version = 2,
  shape = 3,
  bad_frame = 4,
  internal = 5,
};

/// Owned byte stream (pipe pair, socket, or a spawned child's stdio) with a
/// per-operation timeout. timeout_ms < 0 waits forever.
class Connection {
 public:
  static Connection spawn(const std::vector<std::string>& argv, int timeout_ms);
  static Connection tcp(const std::string& host, std::uint16_t port, int timeout_ms);
  static Connection from_fds(int read_fd, int write_fd, int timeout_ms, bool owned = true);

  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  /// Reads exactly n bytes. Throws TimeoutError, or ProtocolError on EOF.
  void read_exact(void* out, std::size_t n);
  /// Like read_exact but returns false on a clean EOF before the first byte.
  bool read_or_eof(void* out, std::size_t n);
  void write_all(const void* data, std::size_t n);

 private:
  Connection(int read_fd, int write_fd, int timeout_ms, bool owned, pid_t child);
  void close_all() noexcept;

  int read_fd_ = -1;
  int write_fd_ = -1;
  int timeout_ms_ = -1;
  bool owned_ = false;
  bool socket_ = false;
  pid_t child_ = -1;
};

/// Client side of the handshake. Throws ShapeError when the server confirms a
/// different shape, ProtocolError for anything malformed.
void client_handshake(Connection& conn, Shape shape);

/// One request/reply round trip.
Spectrogram request_score(Connection& conn, const Spectrogram& state, double t);

using ModelFactory = std::function<std::unique_ptr<ScoreModel>(Shape)>;

/// Serves one connection until the peer closes it. Malformed input is answered
/// with an error frame and ends the session.
void serve(Connection& conn, const ModelFactory& factory);

/// Remote score model. Calls are serialized per handle; concurrent jobs should
/// each open their own handle.
class ExternalScore final : public ScoreModel {
 public:
  ExternalScore(Connection conn, Shape shape);
  Spectrogram score(const Spectrogram& state, double t) const override;
  Shape shape() const override { return shape_; }

 private:
  mutable Connection conn_;
  mutable std::mutex mutex_;
  Shape shape_;
};

}  // namespace depse::wire
