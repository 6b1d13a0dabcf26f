// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <thread>

#include <fmt/format.h>

#include "edgepipe/error.hpp"

namespace edgepipe::net {

std::string Endpoint::str() const { return fmt::format("{}:{}", host, port); }

Endpoint parse_endpoint(const std::string& text) {
  Endpoint e;
  std::string port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) e.host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const unsigned long p = std::stoul(port_text, &used);
    if (used != port_text.size() || p > 65535) throw std::out_of_range(port_text);
    e.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    fail(Errc::kInvalidArgument, fmt::format("bad address '{}', expected host:port", text));
  }
  return e;
}

namespace {

sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    fail(Errc::kTransport, fmt::format("cannot resolve '{}': {}", e.host, ::gai_strerror(rc)));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(e.port);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Listener::Listener(const Endpoint& at) {
  const sockaddr_in addr = resolve(at);
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail(Errc::kTransport, fmt::format("socket: {}", std::strerror(errno)));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 4) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    fail(Errc::kTransport, fmt::format("cannot listen on {}: {}", at.str(), std::strerror(err)));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Listener::~Listener() {
  close();
}

int Listener::accept() {
  for (;;) {
    const int fd = fd_;
    if (fd < 0) return -1;
    const int c = ::accept4(fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (c >= 0) {
      set_nodelay(c);
      return c;
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    if (fd_ < 0 || errno == EINVAL || errno == EBADF) return -1;
    fail(Errc::kTransport, fmt::format("accept: {}", std::strerror(errno)));
  }
}

void Listener::close() noexcept {
  const int fd = fd_;
  if (fd >= 0) {
    fd_ = -1;
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

int connect_to(const Endpoint& to, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(to);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) fail(Errc::kTransport, fmt::format("socket: {}", std::strerror(errno)));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      set_nodelay(fd);
      return fd;
    }
    const int err = errno;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(Errc::kTransport, fmt::format("cannot connect to {}: {}", to.str(), std::strerror(err)));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace edgepipe::net
