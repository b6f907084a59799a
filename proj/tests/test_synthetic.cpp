#include <doctest.h>

#include <cmath>

#include "commentree/synthetic.hpp"
#include "support.hpp"

using namespace commentree;
using namespace commentree::test;

TEST_CASE("rule oracle follows the documented decision list") {
  const Codebook& cb = Codebook::defaults();
  const int red = cb.code(AgentClass::TrafficLight, AgentAction::Red);
  const int green = cb.code(AgentClass::TrafficLight, AgentAction::Green);
  const int stopped = cb.code(AgentClass::Vehicle, AgentAction::Stopped);
  const int moving = cb.code(AgentClass::Vehicle, AgentAction::Moving);

  CHECK(rule_oracle(fv(0, 0, 0, red, 1), cb) == EgoAction::Stop);
  CHECK(rule_oracle(fv(moving, 0, 0, red, 1), cb) == EgoAction::Stop);
  CHECK(rule_oracle(fv(stopped, 5, 5, 0, 1), cb) == EgoAction::Stop);
  CHECK(rule_oracle(fv(stopped, 5, 0, 0, 1), cb) == EgoAction::RightLaneChange);
  CHECK(rule_oracle(fv(stopped, 0, 5, 0, 1), cb) == EgoAction::LeftLaneChange);
  CHECK(rule_oracle(fv(stopped, 0, 0, 0, 0), cb) == EgoAction::Stop);  // plan is stop
  CHECK(rule_oracle(fv(0, 0, 0, 0, 2), cb) == EgoAction::RightLaneChange);
  CHECK(rule_oracle(fv(0, 0, 0, 0, 3), cb) == EgoAction::LeftLaneChange);
  CHECK(rule_oracle(fv(moving, 0, 0, green, 1), cb) == EgoAction::Move);
  CHECK(rule_oracle(fv(0, 0, 0, 0, 1), cb) == EgoAction::Move);
}

TEST_CASE("generator hits the requested class proportions") {
  SyntheticConfig config;  // defaults mirror the 800/900/483/572 split
  auto frames = generate_synthetic(config, 7);
  REQUIRE(frames.size() == 2755);

  std::array<std::int64_t, kNumEgoActions> counts{};
  for (const auto& frame : frames) {
    counts[static_cast<std::size_t>(static_cast<int>(frame.ego_action))] += 1;
  }
  CHECK(counts[0] == 800);
  CHECK(counts[1] == 900);
  CHECK(counts[2] == 483);
  CHECK(counts[3] == 572);

  const std::array<double, 4> expected = {800.0 / 2755, 900.0 / 2755, 483.0 / 2755, 572.0 / 2755};
  for (int k = 0; k < kNumEgoActions; ++k) {
    const double got = static_cast<double>(counts[static_cast<std::size_t>(k)]) / 2755.0;
    CHECK(std::abs(got - expected[static_cast<std::size_t>(k)]) <= 0.02);
  }
}

TEST_CASE("noiseless labels agree with the rule oracle exactly") {
  SyntheticConfig config;
  config.size = 500;
  auto frames = generate_synthetic(config, 3);
  const Codebook& cb = Codebook::defaults();
  for (const auto& frame : frames) {
    CHECK(frame.ego_action == rule_oracle(encode_frame(frame, cb), cb));
    CHECK_FALSE(frame.ground_truth_explanation.empty());
  }
}

TEST_CASE("label noise flips roughly the requested share of labels") {
  SyntheticConfig config;
  config.size = 2000;
  config.label_noise = 0.15;
  auto frames = generate_synthetic(config, 5);
  const Codebook& cb = Codebook::defaults();
  int flipped = 0;
  for (const auto& frame : frames) {
    if (frame.ego_action != rule_oracle(encode_frame(frame, cb), cb)) ++flipped;
  }
  const double rate = static_cast<double>(flipped) / 2000.0;
  CHECK(rate > 0.10);
  CHECK(rate < 0.20);
}

TEST_CASE("identical seeds reproduce the dataset, different seeds do not") {
  SyntheticConfig config;
  config.size = 200;
  auto a = generate_synthetic(config, 42);
  auto b = generate_synthetic(config, 42);
  auto c = generate_synthetic(config, 43);
  REQUIRE(a.size() == b.size());
  const Codebook& cb = Codebook::defaults();
  bool all_equal_c = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(encode_frame(a[i], cb) == encode_frame(b[i], cb));
    CHECK(a[i].ego_action == b[i].ego_action);
    CHECK(a[i].ground_truth_explanation == b[i].ground_truth_explanation);
    if (encode_frame(a[i], cb) != encode_frame(c[i], cb)) all_equal_c = false;
  }
  CHECK_FALSE(all_equal_c);
}

TEST_CASE("frame ids are unique and time is nondecreasing") {
  SyntheticConfig config;
  config.size = 50;
  auto frames = generate_synthetic(config, 1);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(frames[i].frame_id == static_cast<std::int64_t>(i));
    if (i > 0) CHECK(frames[i].time >= frames[i - 1].time);
  }
}

TEST_CASE("invalid generator configs are rejected") {
  SyntheticConfig zero;
  zero.size = 0;
  CHECK_THROWS_AS(generate_synthetic(zero, 1), InvalidConfigError);

  SyntheticConfig bad_prop;
  bad_prop.proportions = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(generate_synthetic(bad_prop, 1), InvalidConfigError);

  SyntheticConfig bad_noise;
  bad_noise.label_noise = 1.0;
  CHECK_THROWS_AS(generate_synthetic(bad_noise, 1), InvalidConfigError);
}
