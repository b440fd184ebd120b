#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "aerialnav/policy.hpp"

namespace aerialnav {

// Newline-delimited JSON frames.
//   request:  {"type":"decide","seq":N,"instruction":S,"pose":[x,y,z,yaw],"time":T,
//              "depth":{"width":W,"height":H,"data":<base64 u16 little-endian mm>}}
//   response: {"type":"decision","seq":N,"waypoint":[x,y,z],"yaw":R,"complete":B,"replan":B}
// "depth" is optional.

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Millimetres, rounded and clamped to [0, 65535].
std::vector<std::uint16_t> depth_to_millimeters(const DepthImage& depth);
DepthImage depth_from_millimeters(int width, int height, std::span<const std::uint16_t> mm, double timestamp);

/// Frames include the trailing newline.
std::string encode_request(const Observation& obs, bool include_depth);
std::string encode_decision(const NavDecision& decision);
/// Both throw ProtocolError on malformed or invalid frames.
Observation decode_request(std::string_view line);
NavDecision decode_decision(std::string_view line);

/// Blocking line-oriented TCP stream.
class LineSocket {
 public:
  LineSocket() = default;
  explicit LineSocket(int fd) : fd_(fd) {}
  LineSocket(LineSocket&& other) noexcept;
  LineSocket& operator=(LineSocket&& other) noexcept;
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;
  ~LineSocket();

  static LineSocket connect(const std::string& host, int port);

  bool is_open() const { return fd_ >= 0; }
  /// Throws ConnectionLost when the peer is gone.
  void send_line(std::string_view line);
  /// Next line without its newline; empty optional on timeout. Throws
  /// ConnectionLost on end of stream or socket error.
  std::optional<std::string> read_line(std::chrono::duration<double> timeout);
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// Policy behind the wire protocol. Timeouts yield NoDecision; a late reply to
/// a timed-out request is discarded, any other sequence mismatch is a
/// ProtocolError.
class RemotePolicy : public Policy {
 public:
  RemotePolicy(const std::string& host, int port, double timeout_s = 2.0, bool send_depth = false);
  std::optional<NavDecision> decide(const Observation& obs) override;
  std::string name() const override { return "remote"; }
  bool wants_depth() const override { return send_depth_; }

 private:
  LineSocket socket_;
  double timeout_s_;
  bool send_depth_;
  std::set<std::uint64_t> abandoned_;
};

/// Single-port TCP server answering decide requests with a handler; one
/// thread per connection.
class PolicyServer {
 public:
  using Handler = std::function<NavDecision(const Observation&)>;

  struct Options {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks an ephemeral port
    double response_delay_s = 0.0;
  };

  PolicyServer(Handler handler, Options options);
  ~PolicyServer();
  PolicyServer(const PolicyServer&) = delete;
  PolicyServer& operator=(const PolicyServer&) = delete;

  int port() const { return port_; }
  void start();
  /// Blocks until stop() is called from another thread.
  void serve();
  void stop();

 private:
  void accept_loop();
  void handle(int fd);

  Handler handler_;
  Options options_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
  std::mutex handler_mutex_;
};

}  // namespace aerialnav
