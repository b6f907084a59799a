#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "commentree/scene.hpp"

namespace commentree {

/// Parameters for the synthetic scene generator. Class proportions are
/// converted to exact per-class counts (largest remainder), so empirical
/// proportions match the request to within 1/size.
struct SyntheticConfig {
  std::size_t size = 2755;
  // stop, move, rlc, llc
  std::array<double, kNumEgoActions> proportions = {800.0 / 2755.0, 900.0 / 2755.0, 483.0 / 2755.0,
                                                    572.0 / 2755.0};
  double label_noise = 0.0;  // probability of replacing a label with a different class
};

/// The deterministic labelling rule behind the generator (see
/// docs/synthetic_oracle.md). Operating on encoded features:
///   1. amber or red traffic light            -> Stop
///   2. blocked ego lane (crossing/braking/stopped agent):
///        plan Move and free outgoing lane    -> RightLaneChange
///        plan Move and free incoming lane    -> LeftLaneChange
///        otherwise                           -> Stop
///   3. plan RightLaneChange, free outgoing   -> RightLaneChange
///   4. plan LeftLaneChange, free incoming    -> LeftLaneChange
///   5. otherwise                             -> Move
EgoAction rule_oracle(const FeatureVector& features, const Codebook& codebook);

/// Generates `config.size` frames whose recorded actions follow the rule
/// oracle, with `config.label_noise` of them flipped to a different class.
/// Identical (config, seed) pairs yield identical datasets.
std::vector<FrameRecord> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace commentree
