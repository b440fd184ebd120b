#include "aerialnav/wire.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "aerialnav/errors.hpp"

namespace aerialnav {

using nlohmann::json;

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

json parse_frame(std::string_view line) {
  try {
    auto j = json::parse(line);
    if (!j.is_object()) throw ProtocolError("frame is not an object");
    return j;
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
}

double finite_number(const json& j, const char* field) {
  if (!j.is_number()) throw ProtocolError(std::string("field '") + field + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ProtocolError(std::string("field '") + field + "' must be finite");
  return v;
}

const json& member(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + field + "'");
  return *it;
}

std::uint64_t sequence(const json& j) {
  const json& s = member(j, "seq");
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
    throw ProtocolError("field 'seq' must be a non-negative integer");
  return s.get<std::uint64_t>();
}

bool flag(const json& j, const char* field) {
  const json& b = member(j, field);
  if (!b.is_boolean()) throw ProtocolError(std::string("field '") + field + "' must be a boolean");
  return b.get<bool>();
}

std::string_view trim_newline(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  return line;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(n >> s) & 0x3F]);
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t n = bytes[i] << 16;
    if (rest == 2) n |= bytes[i + 1] << 8;
    out.push_back(kAlphabet[(n >> 18) & 0x3F]);
    out.push_back(kAlphabet[(n >> 12) & 0x3F]);
    out.push_back(rest == 2 ? kAlphabet[(n >> 6) & 0x3F] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t n = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v;
      if (c == '=' && last && k >= 2) {
        v = 0;
        ++pad;
      } else {
        if (pad > 0) throw ProtocolError("base64: data after padding");
        v = decode_char(c);
        if (v < 0) throw ProtocolError("base64: invalid character");
      }
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

std::vector<std::uint16_t> depth_to_millimeters(const DepthImage& depth) {
  std::vector<std::uint16_t> mm(depth.values.size());
  std::transform(depth.values.begin(), depth.values.end(), mm.begin(), [](double d) {
    return static_cast<std::uint16_t>(std::clamp(std::round(d * 1000.0), 0.0, 65535.0));
  });
  return mm;
}

DepthImage depth_from_millimeters(int width, int height, std::span<const std::uint16_t> mm, double timestamp) {
  if (width < 0 || height < 0 || mm.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw InvalidInput("depth_from_millimeters: size mismatch");
  DepthImage image;
  image.width = width;
  image.height = height;
  image.timestamp = timestamp;
  image.values.resize(mm.size());
  std::transform(mm.begin(), mm.end(), image.values.begin(), [](std::uint16_t v) { return v / 1000.0; });
  return image;
}

std::string encode_request(const Observation& obs, bool include_depth) {
  json j = {{"type", "decide"},
            {"seq", obs.seq},
            {"instruction", obs.instruction},
            {"pose", {obs.pose.position.x(), obs.pose.position.y(), obs.pose.position.z(), obs.pose.yaw}},
            {"time", obs.episode_time}};
  if (include_depth && obs.depth) {
    const auto mm = depth_to_millimeters(*obs.depth);
    std::vector<std::uint8_t> bytes(mm.size() * 2);
    for (std::size_t i = 0; i < mm.size(); ++i) {
      bytes[2 * i] = static_cast<std::uint8_t>(mm[i] & 0xFF);
      bytes[2 * i + 1] = static_cast<std::uint8_t>(mm[i] >> 8);
    }
    j["depth"] = {{"width", obs.depth->width}, {"height", obs.depth->height}, {"data", base64_encode(bytes)}};
  }
  return j.dump() + "\n";
}

Observation decode_request(std::string_view line) {
  const json j = parse_frame(trim_newline(line));
  if (member(j, "type") != "decide") throw ProtocolError("expected a decide frame");
  Observation obs;
  obs.seq = sequence(j);
  const json& instruction = member(j, "instruction");
  if (!instruction.is_string()) throw ProtocolError("field 'instruction' must be a string");
  obs.instruction = instruction.get<std::string>();
  const json& pose = member(j, "pose");
  if (!pose.is_array() || pose.size() != 4) throw ProtocolError("field 'pose' must hold 4 numbers");
  obs.pose.position = Vec3(finite_number(pose[0], "pose"), finite_number(pose[1], "pose"), finite_number(pose[2], "pose"));
  obs.pose.yaw = finite_number(pose[3], "pose");
  obs.episode_time = finite_number(member(j, "time"), "time");
  if (auto it = j.find("depth"); it != j.end() && !it->is_null()) {
    const json& d = *it;
    if (!d.is_object()) throw ProtocolError("field 'depth' must be an object");
    const json& w = member(d, "width");
    const json& h = member(d, "height");
    const json& data = member(d, "data");
    if (!w.is_number_integer() || !h.is_number_integer() || !data.is_string())
      throw ProtocolError("depth: width/height must be integers and data a string");
    const auto bytes = base64_decode(data.get<std::string>());
    const auto width = w.get<std::int64_t>();
    const auto height = h.get<std::int64_t>();
    if (width < 0 || height < 0 || bytes.size() != static_cast<std::size_t>(width * height * 2))
      throw ProtocolError("depth: payload size does not match dimensions");
    std::vector<std::uint16_t> mm(bytes.size() / 2);
    for (std::size_t i = 0; i < mm.size(); ++i)
      mm[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    obs.depth = depth_from_millimeters(static_cast<int>(width), static_cast<int>(height), mm, obs.episode_time);
  }
  return obs;
}

std::string encode_decision(const NavDecision& decision) {
  const json j = {{"type", "decision"},
                  {"seq", decision.seq},
                  {"waypoint", {decision.waypoint.x(), decision.waypoint.y(), decision.waypoint.z()}},
                  {"yaw", decision.yaw},
                  {"complete", decision.complete},
                  {"replan", decision.replan}};
  return j.dump() + "\n";
}

NavDecision decode_decision(std::string_view line) {
  const json j = parse_frame(trim_newline(line));
  if (member(j, "type") != "decision") throw ProtocolError("expected a decision frame");
  NavDecision d;
  d.seq = sequence(j);
  const json& w = member(j, "waypoint");
  if (!w.is_array() || w.size() != 3) throw ProtocolError("field 'waypoint' must hold 3 numbers");
  d.waypoint = Vec3(finite_number(w[0], "waypoint"), finite_number(w[1], "waypoint"), finite_number(w[2], "waypoint"));
  d.yaw = finite_number(member(j, "yaw"), "yaw");
  if (!(d.yaw >= -kPi && d.yaw < kPi)) throw ProtocolError("field 'yaw' must lie in [-pi, pi)");
  d.complete = flag(j, "complete");
  d.replan = flag(j, "replan");
  return d;
}

// ---------------------------------------------------------------------------
// LineSocket

LineSocket::LineSocket(LineSocket&& other) noexcept : fd_(other.fd_), buffer_(std::move(other.buffer_)) {
  other.fd_ = -1;
}

LineSocket& LineSocket::operator=(LineSocket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    buffer_ = std::move(other.buffer_);
    other.fd_ = -1;
  }
  return *this;
}

LineSocket::~LineSocket() { close(); }

void LineSocket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buffer_.clear();
}

LineSocket LineSocket::connect(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0)
    throw ConnectionLost("cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw ConnectionLost("cannot connect to " + host + ":" + service);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return LineSocket(fd);
}

void LineSocket::send_line(std::string_view line) {
  if (fd_ < 0) throw ConnectionLost("socket is closed");
  while (!line.empty()) {
    const ssize_t n = ::send(fd_, line.data(), line.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ConnectionLost(std::string("send failed: ") + std::strerror(errno));
    line.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::optional<std::string> LineSocket::read_line(std::chrono::duration<double> timeout) {
  if (fd_ < 0) throw ConnectionLost("socket is closed");
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::nanoseconds>(timeout);
  std::array<char, 4096> chunk{};
  for (;;) {
    if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1 << 30)));
    if (ready < 0 && errno == EINTR) continue;
    if (ready < 0) throw ConnectionLost(std::string("poll failed: ") + std::strerror(errno));
    if (ready == 0) continue;
    const ssize_t n = ::recv(fd_, chunk.data(), chunk.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ConnectionLost("connection closed by peer");
    buffer_.append(chunk.data(), static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------------------
// RemotePolicy

RemotePolicy::RemotePolicy(const std::string& host, int port, double timeout_s, bool send_depth)
    : socket_(LineSocket::connect(host, port)), timeout_s_(timeout_s), send_depth_(send_depth) {
  if (!(timeout_s > 0.0)) throw InvalidInput("RemotePolicy: timeout must be positive");
}

std::optional<NavDecision> RemotePolicy::decide(const Observation& obs) {
  socket_.send_line(encode_request(obs, send_depth_));
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s_);
  for (;;) {
    const auto left = std::chrono::duration<double>(deadline - std::chrono::steady_clock::now());
    const auto line = socket_.read_line(left);
    if (!line) {
      abandoned_.insert(obs.seq);
      return std::nullopt;
    }
    NavDecision d = decode_decision(*line);
    if (d.seq == obs.seq) return d;
    if (abandoned_.erase(d.seq) > 0) continue;
    throw ProtocolError("sequence mismatch: sent " + std::to_string(obs.seq) + ", received " + std::to_string(d.seq));
  }
}

// ---------------------------------------------------------------------------
// PolicyServer

PolicyServer::PolicyServer(Handler handler, Options options) : handler_(std::move(handler)), options_(std::move(options)) {}

PolicyServer::~PolicyServer() { stop(); }

void PolicyServer::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1)
    throw InvalidInput("PolicyServer: host must be an IPv4 address");
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 8) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("PolicyServer: cannot listen on " + options_.host + ":" + std::to_string(options_.port) + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void PolicyServer::serve() {
  start();
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

void PolicyServer::stop() {
  running_ = false;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void PolicyServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, fd] { handle(fd); });
  }
}

void PolicyServer::handle(int fd) {
  LineSocket socket(fd);
  try {
    while (running_) {
      const auto line = socket.read_line(std::chrono::milliseconds(50));
      if (!line) continue;
      NavDecision d;
      try {
        const Observation obs = decode_request(*line);
        {
          std::lock_guard lock(handler_mutex_);
          d = handler_(obs);
        }
        d.seq = obs.seq;
      } catch (const Error&) {
        continue;  // unparseable or unanswerable requests get no reply
      }
      if (options_.response_delay_s > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double>(options_.response_delay_s));
      socket.send_line(encode_decision(d));
    }
  } catch (const ConnectionLost&) {
  }
}

}  // namespace aerialnav
