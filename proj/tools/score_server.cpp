// Reference score server for the wire protocol: serves over stdin/stdout, or
// over TCP with --listen. The fault modes exist for client-side negative tests.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstring>
#include <iostream>
#include <thread>

#include "depse/wire.hpp"

namespace {

using namespace depse;

struct Options {
  std::string model = "echo";
  double mean_re = 0.0;
  double mean_im = 0.0;
  double variance = 1.0;
  SdeParams sde;
  std::string fault = "none";
  int listen_port = -1;
};

// Misbehaving peers: answer the handshake with a different shape, stop halfway
// through a reply, or send an unknown frame tag.
void serve_fault(wire::Connection& conn, const std::string& fault) {
  char hello[16];
  if (!conn.read_or_eof(hello, sizeof(hello))) return;
  std::uint32_t f, l;
  std::memcpy(&f, hello + 8, 4);
  std::memcpy(&l, hello + 12, 4);
  if (fault == "wrong-shape") ++f;
  std::memcpy(hello + 8, &f, 4);
  conn.write_all(hello, sizeof(hello));
  if (fault == "wrong-shape") return;

  std::uint32_t tag;
  double t;
  std::vector<char> payload(8 * static_cast<std::size_t>(f) * l);
  if (!conn.read_or_eof(&tag, 4)) return;
  conn.read_exact(&t, 8);
  conn.read_exact(payload.data(), payload.size());
  if (fault == "bad-tag") {
    const std::uint32_t bogus = 7;
    conn.write_all(&bogus, 4);
  } else if (fault == "short-reply") {
    const std::uint32_t reply = wire::kTagReply;
    conn.write_all(&reply, 4);
    conn.write_all(payload.data(), payload.size() / 2);
    // Hold the connection open so the client has to time out.
    char sink;
    conn.read_or_eof(&sink, 1);
  } else if (fault == "shape-error") {
    const std::uint32_t frame[2] = {wire::kTagError, static_cast<std::uint32_t>(wire::ErrorCode::shape)};
    conn.write_all(frame, sizeof(frame));
  }
}

void session(wire::Connection conn, const Options& opt) {
  try {
    if (opt.fault != "none") return serve_fault(conn, opt.fault);
    const DiffusionSchedule schedule(opt.sde);
    wire::serve(conn, [&](Shape shape) -> std::unique_ptr<ScoreModel> {
      if (opt.model == "echo") return std::make_unique<EchoScore>(shape);
      GaussianPrior prior{Spectrogram(shape, cplx(opt.mean_re, opt.mean_im)),
                          RealField(shape, opt.variance)};
      return std::make_unique<GaussianScore>(std::move(prior), schedule);
    });
  } catch (const std::exception& e) {
    std::cerr << "score_server: " << e.what() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Score server (wire protocol v1)"};
  app.add_option("--model", opt.model)->check(CLI::IsMember({"echo", "gaussian"}));
  app.add_option("--mean-re", opt.mean_re);
  app.add_option("--mean-im", opt.mean_im);
  app.add_option("--variance", opt.variance);
  app.add_option("--gamma", opt.sde.gamma);
  app.add_option("--sigma-min", opt.sde.sigma_min);
  app.add_option("--sigma-max", opt.sde.sigma_max);
  app.add_option("--t-eps", opt.sde.t_eps);
  app.add_option("--t-max", opt.sde.t_max);
  app.add_option("--steps", opt.sde.steps);
  app.add_option("--fault", opt.fault)
      ->check(CLI::IsMember({"none", "wrong-shape", "short-reply", "bad-tag", "shape-error"}));
  app.add_option("--listen", opt.listen_port, "TCP port on 127.0.0.1 (0 picks one)");
  CLI11_PARSE(app, argc, argv);

  ::signal(SIGPIPE, SIG_IGN);
  try {
    opt.sde.validate();
  } catch (const std::exception& e) {
    std::cerr << "score_server: " << e.what() << '\n';
    return 2;
  }

  if (opt.listen_port < 0) {
    session(wire::Connection::from_fds(STDIN_FILENO, STDOUT_FILENO, -1, false), opt);
    return 0;
  }

  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(opt.listen_port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 16) != 0) {
    std::perror("score_server: bind/listen");
    return 1;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  // The bound port on stdout lets callers use --listen 0.
  std::cout << ntohs(addr.sin_port) << std::endl;
  for (;;) {
    const int c = ::accept4(fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (c < 0) continue;
    std::thread([c, opt] { session(wire::Connection::from_fds(c, ::dup(c), -1, true), opt); })
        .detach();
  }
}
