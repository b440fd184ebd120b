#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "aerialnav/errors.hpp"
#include "aerialnav/wire.hpp"

using namespace aerialnav;

namespace {

std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

NavDecision echo_handler(const Observation& obs) {
  NavDecision d;
  d.waypoint = obs.pose.position + Vec3(1, 0, 0);
  d.yaw = obs.pose.yaw;
  d.complete = obs.instruction == "stop";
  return d;
}

}  // namespace

TEST(Base64, KnownVectors) {
  // RFC 4648 test vectors.
  const std::pair<const char*, const char*> cases[] = {{"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},
                                                       {"foo", "Zm9v"},  {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
                                                       {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, encoded] : cases) {
    EXPECT_EQ(base64_encode(bytes(plain)), encoded);
    EXPECT_EQ(base64_decode(encoded), bytes(plain));
  }
}

TEST(Base64, RandomRoundTripAndRejectsGarbage) {
  std::mt19937_64 rng(41);
  for (int n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> data(n);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(base64_decode(base64_encode(data)), data);
  }
  EXPECT_THROW(base64_decode("abc"), ProtocolError);
  EXPECT_THROW(base64_decode("ab!d"), ProtocolError);
  EXPECT_THROW(base64_decode("a=bc"), ProtocolError);
}

TEST(DepthMillimeters, RoundsAndSaturates) {
  DepthImage d;
  d.width = 4;
  d.height = 1;
  d.values = {0.0, 1.2344, 1.2346, 70.0};
  const auto mm = depth_to_millimeters(d);
  EXPECT_EQ(mm, (std::vector<std::uint16_t>{0, 1234, 1235, 65535}));
  const auto back = depth_from_millimeters(4, 1, mm, 2.0);
  EXPECT_DOUBLE_EQ(back.values[1], 1.234);
  EXPECT_DOUBLE_EQ(back.timestamp, 2.0);
  EXPECT_THROW(depth_from_millimeters(3, 1, mm, 0.0), InvalidInput);
}

TEST(WireFrames, RequestRoundTrip) {
  Observation obs;
  obs.pose = Pose4D(Vec3(1.25, -2.5, 1.5), 0.75);
  obs.instruction = "fly to the \"red\" door\n";
  obs.episode_time = 12.4;
  obs.seq = 99;
  DepthImage depth;
  depth.width = 3;
  depth.height = 2;
  depth.values = {0.0, 1.0, 2.5, 3.001, 4.0, 0.3};
  obs.depth = depth;
  const std::string line = encode_request(obs, true);
  ASSERT_EQ(line.back(), '\n');
  EXPECT_EQ(line.find('\n'), line.size() - 1);
  const Observation back = decode_request(line);
  EXPECT_EQ(back.seq, 99u);
  EXPECT_EQ(back.instruction, obs.instruction);
  EXPECT_EQ(back.pose.position, obs.pose.position);
  EXPECT_DOUBLE_EQ(back.pose.yaw, 0.75);
  ASSERT_TRUE(back.depth.has_value());
  EXPECT_EQ(depth_to_millimeters(*back.depth), depth_to_millimeters(depth));
  EXPECT_FALSE(decode_request(encode_request(obs, false)).depth.has_value());
}

TEST(WireFrames, DecisionRoundTripAndValidation) {
  NavDecision d;
  d.waypoint = Vec3(3, 4, 1.5);
  d.yaw = -1.0;
  d.complete = true;
  d.seq = 5;
  const NavDecision back = decode_decision(encode_decision(d));
  EXPECT_EQ(back.waypoint, d.waypoint);
  EXPECT_EQ(back.yaw, d.yaw);
  EXPECT_TRUE(back.complete);
  EXPECT_FALSE(back.replan);
  EXPECT_EQ(back.seq, 5u);

  EXPECT_THROW(decode_decision("not json"), ProtocolError);
  EXPECT_THROW(decode_decision(R"({"type":"decision","seq":1,"waypoint":[0,0],"yaw":0,"complete":false,"replan":false})"),
               ProtocolError);
  EXPECT_THROW(decode_decision(R"({"type":"decision","seq":1,"waypoint":[0,0,0],"yaw":4,"complete":false,"replan":false})"),
               ProtocolError);
  EXPECT_THROW(decode_decision(R"({"type":"decision","seq":-1,"waypoint":[0,0,0],"yaw":0,"complete":false,"replan":false})"),
               ProtocolError);
  EXPECT_THROW(decode_decision(R"({"type":"decision","seq":1,"waypoint":[0,0,0],"yaw":0,"replan":false})"),
               ProtocolError);
  EXPECT_THROW(decode_decision(R"({"type":"decide","seq":1})"), ProtocolError);
}

TEST(RemotePolicy, LoopbackDecisions) {
  PolicyServer server(echo_handler, {"127.0.0.1", 0, 0.0});
  server.start();
  ASSERT_GT(server.port(), 0);
  RemotePolicy policy("127.0.0.1", server.port(), 2.0, true);
  Observation obs;
  obs.pose = Pose4D(Vec3(1, 2, 3), 0.5);
  for (std::uint64_t seq = 1; seq <= 5; ++seq) {
    obs.seq = seq;
    const auto d = policy.decide(obs);
    ASSERT_TRUE(d.has_value());
    EXPECT_EQ(d->seq, seq);
    EXPECT_EQ(d->waypoint, Vec3(2, 2, 3));
  }
  obs.instruction = "stop";
  obs.seq = 6;
  EXPECT_TRUE(policy.decide(obs)->complete);
  server.stop();
}

TEST(RemotePolicy, TimeoutGivesNoDecisionAndLateReplyIsDiscarded) {
  PolicyServer server(
      [](const Observation& obs) {
        if (obs.instruction == "slow") std::this_thread::sleep_for(std::chrono::milliseconds(400));
        return echo_handler(obs);
      },
      {"127.0.0.1", 0, 0.0});
  server.start();
  RemotePolicy policy("127.0.0.1", server.port(), 0.3);
  Observation obs;
  obs.seq = 1;
  obs.instruction = "slow";
  EXPECT_FALSE(policy.decide(obs).has_value());
  // The reply to seq 1 arrives first while waiting for seq 2 and is skipped.
  obs.seq = 2;
  obs.instruction = "";
  const auto d = policy.decide(obs);
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->seq, 2u);
  server.stop();
}

TEST(RemotePolicy, ServerGoneIsConnectionLost) {
  int port = 0;
  {
    PolicyServer server(echo_handler, {"127.0.0.1", 0, 0.0});
    server.start();
    port = server.port();
    RemotePolicy policy("127.0.0.1", port, 1.0);
    server.stop();
    Observation obs;
    obs.seq = 1;
    EXPECT_THROW(
        {
          for (int i = 0; i < 3; ++i) policy.decide(obs);
        },
        ConnectionLost);
  }
  EXPECT_THROW(RemotePolicy("127.0.0.1", port, 1.0), ConnectionLost);
}
