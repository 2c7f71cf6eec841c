#include "navstack/bridge.hpp"

#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace navstack {

namespace {

void ignore_sigpipe() {
  static const bool once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(std::string("bridge write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string read_line(int fd, std::string& pending, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = pending.find('\n');
    if (nl != std::string::npos) {
      std::string line = pending.substr(0, nl);
      pending.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw BridgeTimeout("bridge did not answer within timeout");
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw BridgeError(std::string("bridge poll failed: ") + std::strerror(errno));
    }
    if (r == 0) continue;
    char buf[4096];
    const ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw BridgeError(std::string("bridge read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw BridgeError("bridge closed the connection");
    pending.append(buf, static_cast<std::size_t>(n));
  }
}

nlohmann::json exchange(int out_fd, int in_fd, std::string& pending, const nlohmann::json& msg,
                        std::chrono::milliseconds timeout) {
  write_all(out_fd, msg.dump() + "\n");
  const std::string line = read_line(in_fd, pending, timeout);
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw BridgeError(std::string("bridge sent malformed JSON: ") + e.what());
  }
}

}  // namespace

ProcessTransport::ProcessTransport(const std::string& command) {
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) throw BridgeError("pipe() failed");
  pid_ = ::fork();
  if (pid_ < 0) throw BridgeError("fork() failed");
  if (pid_ == 0) {
    // Own process group, so shutdown reaches whatever the shell started.
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid_, pid_);  // either side may win the race
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessTransport::~ProcessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin lets well-behaved bridges exit; give them a moment.
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(5000);
    }
    ::kill(-pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }
}

nlohmann::json ProcessTransport::request(const nlohmann::json& message,
                                         std::chrono::milliseconds timeout) {
  return exchange(to_child_, from_child_, pending_, message, timeout);
}

TcpTransport::TcpTransport(const std::string& host, int port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0) {
    throw BridgeError("cannot resolve bridge host " + host);
  }
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw BridgeError("cannot connect to bridge at " + host + ":" + port_str);
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

nlohmann::json TcpTransport::request(const nlohmann::json& message,
                                     std::chrono::milliseconds timeout) {
  return exchange(fd_, fd_, pending_, message, timeout);
}

std::unique_ptr<JsonLineTransport> connect_bridge(const std::string& endpoint) {
  if (endpoint.rfind("exec:", 0) == 0) return std::make_unique<ProcessTransport>(endpoint.substr(5));
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw BridgeError("tcp endpoint needs host:port");
    return std::make_unique<TcpTransport>(rest.substr(0, colon), std::stoi(rest.substr(colon + 1)));
  }
  throw BridgeError("unknown bridge endpoint '" + endpoint + "' (use exec:<cmd> or tcp:<host>:<port>)");
}

}  // namespace navstack
