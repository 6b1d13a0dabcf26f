// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace edgepipe::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string str() const;
};

// "host:port"; a bare ":port" or "port" binds/connects on 127.0.0.1.
Endpoint parse_endpoint(const std::string& text);

class Listener {
 public:
  explicit Listener(const Endpoint& at);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  // Blocks for the next connection; returns a connected fd with TCP_NODELAY.
  // Returns -1 once close() has been called.
  int accept();
  void close() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Retries until the peer accepts or `timeout` expires; throws kTransport.
int connect_to(const Endpoint& to, std::chrono::milliseconds timeout);

}  // namespace edgepipe::net
