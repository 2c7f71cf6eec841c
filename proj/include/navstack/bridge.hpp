#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <json.hpp>

#include "navstack/common.hpp"

namespace navstack {

class BridgeTimeout : public BridgeError {
 public:
  using BridgeError::BridgeError;
};

/// Request/response channel carrying one JSON document per line.
class JsonLineTransport {
 public:
  virtual ~JsonLineTransport() = default;
  virtual nlohmann::json request(const nlohmann::json& message,
                                 std::chrono::milliseconds timeout) = 0;
};

/// Spawns `/bin/sh -c command` and talks over its stdin/stdout.
class ProcessTransport final : public JsonLineTransport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;
  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  nlohmann::json request(const nlohmann::json& message, std::chrono::milliseconds timeout) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

class TcpTransport final : public JsonLineTransport {
 public:
  TcpTransport(const std::string& host, int port);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  nlohmann::json request(const nlohmann::json& message, std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  std::string pending_;
};

/// Endpoint syntax: `exec:<shell command>` or `tcp:<host>:<port>`.
std::unique_ptr<JsonLineTransport> connect_bridge(const std::string& endpoint);

}  // namespace navstack
