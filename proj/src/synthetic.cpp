#include "commentree/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "commentree/rng.hpp"

namespace commentree {

EgoAction rule_oracle(const FeatureVector& v, const Codebook& codebook) {
  const int amber = codebook.code(AgentClass::TrafficLight, AgentAction::Amber);
  const int red = codebook.code(AgentClass::TrafficLight, AgentAction::Red);
  // Lane codes at or above the first Crossing code mean the lane is blocked.
  const int blocking_min = codebook.code(AgentClass::Cyclist, AgentAction::Crossing);

  const bool ego_blocked = v[kEgoLane] >= blocking_min;
  const bool outgo_free = v[kOutgoLane] == 0;
  const bool incom_free = v[kIncomLane] == 0;
  const auto plan = static_cast<EgoAction>(v[kEgoPlan]);

  if (v[kTl] == amber || v[kTl] == red) return EgoAction::Stop;
  if (ego_blocked) {
    if (plan == EgoAction::Move && outgo_free) return EgoAction::RightLaneChange;
    if (plan == EgoAction::Move && incom_free) return EgoAction::LeftLaneChange;
    return EgoAction::Stop;
  }
  if (plan == EgoAction::RightLaneChange && outgo_free) return EgoAction::RightLaneChange;
  if (plan == EgoAction::LeftLaneChange && incom_free) return EgoAction::LeftLaneChange;
  return EgoAction::Move;
}

namespace {

using C = AgentClass;
using A = AgentAction;

double agent_size(C cls, Rng& rng) {
  switch (cls) {
    case C::Vehicle: return rng.range(3.8, 5.2);
    case C::Bus: return rng.range(8.0, 12.0);
    case C::Motorbike: return rng.range(1.6, 2.4);
    case C::Cyclist: return rng.range(1.5, 1.9);
    case C::Pedestrian: return rng.range(0.4, 0.8);
    case C::TrafficLight: return rng.range(0.3, 0.5);
    case C::None: break;
  }
  return 0.0;
}

AgentObservation make_obs(C cls, A action, LanePosition lane, Rng& rng, double min_dist = 4.0,
                          double max_dist = 30.0) {
  AgentObservation obs;
  obs.agent_class = cls;
  obs.action = action;
  obs.position = lane;
  obs.size = agent_size(cls, rng);
  obs.distance = rng.range(min_dist, max_dist);
  return obs;
}

// A second, strictly less dominant agent of the same class behind the
// primary one (a queue), so per-lane dominant selection has work to do.
AgentObservation make_trailing(const AgentObservation& primary, Rng& rng) {
  AgentObservation obs = primary;
  obs.size = primary.size * rng.range(0.8, 0.98);
  obs.distance = primary.distance * rng.range(1.5, 2.5);
  return obs;
}

C pick_vehicle_like(Rng& rng) {
  double u = rng.unit();
  if (u < 0.70) return C::Vehicle;
  if (u < 0.88) return C::Bus;
  return C::Motorbike;
}

struct SceneSketch {
  std::vector<AgentObservation> observations;
  EgoAction plan = EgoAction::Move;
  std::string gt_text;
};

void maybe_add_queue(SceneSketch& s, Rng& rng) {
  if (!s.observations.empty() && rng.unit() < 0.25) {
    const auto& primary = s.observations.front();
    if (primary.agent_class == C::Vehicle || primary.agent_class == C::Bus) {
      s.observations.push_back(make_trailing(primary, rng));
    }
  }
}

SceneSketch sketch_stop(Rng& rng) {
  SceneSketch s;
  double u = rng.unit();
  if (u < 0.45) {
    // Held at a light.
    A light = rng.unit() < 0.8 ? A::Red : A::Amber;
    s.observations.push_back(make_obs(C::TrafficLight, light, LanePosition::EgoLane, rng, 8.0, 40.0));
    if (rng.unit() < 0.5) {
      s.observations.push_back(make_obs(C::Vehicle, A::Stopped, LanePosition::EgoLane, rng));
    }
    s.plan = rng.unit() < 0.6 ? EgoAction::Move : EgoAction::Stop;
    s.gt_text = light == A::Red ? "Traffic light is red on ego's lane, so ego stops"
                                : "Traffic light is amber on ego's lane, so ego stops";
  } else if (u < 0.70) {
    // Queued behind a stopped agent with no free lane to either side.
    C cls = pick_vehicle_like(rng);
    s.observations.push_back(make_obs(cls, A::Stopped, LanePosition::EgoLane, rng));
    s.observations.push_back(make_obs(C::Vehicle, rng.unit() < 0.5 ? A::Moving : A::Stopped,
                                      LanePosition::OutgoingLane, rng));
    s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::IncomingLane, rng));
    s.plan = EgoAction::Move;
    s.gt_text = cls == C::Bus ? "A bus stopped on ego's lane, so ego stops"
                              : "A vehicle stopped on ego's lane, so ego stops";
  } else if (u < 0.85) {
    // Someone crossing ahead.
    C cls = rng.unit() < 0.7 ? C::Pedestrian : C::Cyclist;
    s.observations.push_back(make_obs(cls, A::Crossing, LanePosition::EgoLane, rng, 3.0, 15.0));
    s.plan = EgoAction::Stop;
    s.gt_text = cls == C::Pedestrian ? "A pedestrian is crossing ego's lane, so ego stops"
                                     : "A cyclist is crossing ego's lane, so ego stops";
  } else {
    // Stopped traffic ahead and the plan is to stop as well.
    s.observations.push_back(make_obs(C::Vehicle, A::Stopped, LanePosition::EgoLane, rng));
    s.plan = EgoAction::Stop;
    s.gt_text = "A vehicle stopped on ego's lane, so ego stops";
  }
  maybe_add_queue(s, rng);
  return s;
}

SceneSketch sketch_move(Rng& rng) {
  SceneSketch s;
  s.plan = EgoAction::Move;
  double u = rng.unit();
  if (u < 0.20) {
    s.gt_text = "Road is free on ego's lane, so ego moves";
  } else if (u < 0.55) {
    C cls = pick_vehicle_like(rng);
    s.observations.push_back(make_obs(cls, A::Moving, LanePosition::EgoLane, rng));
    if (rng.unit() < 0.4) {
      s.observations.push_back(
          make_obs(C::TrafficLight, A::Green, LanePosition::EgoLane, rng, 8.0, 40.0));
    }
    s.gt_text = cls == C::Vehicle ? "Vehicle is moving on ego's lane, so ego moves"
                                  : "Traffic is flowing on ego's lane, so ego moves";
  } else if (u < 0.80) {
    s.observations.push_back(
        make_obs(C::TrafficLight, A::Green, LanePosition::EgoLane, rng, 8.0, 40.0));
    if (rng.unit() < 0.4) {
      s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::EgoLane, rng));
    }
    s.gt_text = "Traffic light is green on ego's lane, so ego moves";
  } else {
    s.observations.push_back(make_obs(C::Vehicle, A::Indicating, LanePosition::EgoLane, rng));
    s.gt_text = "A vehicle is indicating on ego's lane, so ego moves";
  }
  if (rng.unit() < 0.35) {
    s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::IncomingLane, rng));
  }
  if (rng.unit() < 0.25) {
    s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::OutgoingLane, rng));
  }
  maybe_add_queue(s, rng);
  return s;
}

SceneSketch sketch_rlc(Rng& rng) {
  SceneSketch s;
  double u = rng.unit();
  if (u < 0.60) {
    // Blocked ego lane, free outgoing lane, intent to keep moving.
    C cls = pick_vehicle_like(rng);
    s.observations.push_back(make_obs(cls, A::Stopped, LanePosition::EgoLane, rng));
    s.plan = EgoAction::Move;
    s.gt_text = "A vehicle stopped on ego's lane and outgoing lane is free, so ego moves to the right lane";
  } else if (u < 0.80) {
    s.observations.push_back(make_obs(C::Cyclist, A::Crossing, LanePosition::EgoLane, rng, 3.0, 15.0));
    s.plan = EgoAction::Move;
    s.gt_text = "A cyclist is crossing ego's lane and outgoing lane is free, so ego moves to the right lane";
  } else {
    // Planned lane change with the outgoing lane clear.
    if (rng.unit() < 0.5) {
      s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::EgoLane, rng));
    }
    s.plan = EgoAction::RightLaneChange;
    s.gt_text = "Ego's next goal is to move to the right lane, so ego moves to the right lane";
  }
  if (rng.unit() < 0.4) {
    s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::IncomingLane, rng));
  }
  maybe_add_queue(s, rng);
  return s;
}

SceneSketch sketch_llc(Rng& rng) {
  SceneSketch s;
  double u = rng.unit();
  if (u < 0.70) {
    // Blocked ego lane, occupied outgoing lane, free incoming lane.
    C cls = pick_vehicle_like(rng);
    s.observations.push_back(make_obs(cls, A::Stopped, LanePosition::EgoLane, rng));
    s.observations.push_back(make_obs(C::Vehicle, rng.unit() < 0.5 ? A::Stopped : A::Moving,
                                      LanePosition::OutgoingLane, rng));
    s.plan = EgoAction::Move;
    s.gt_text = "A vehicle stopped on ego's lane and incoming lane is free, so ego moves to the left lane";
  } else {
    if (rng.unit() < 0.5) {
      s.observations.push_back(make_obs(C::Vehicle, A::Moving, LanePosition::EgoLane, rng));
    }
    s.plan = EgoAction::LeftLaneChange;
    s.gt_text = "Ego's next goal is to move to the left lane, so ego moves to the left lane";
  }
  maybe_add_queue(s, rng);
  return s;
}

SceneSketch sketch_for(EgoAction target, Rng& rng) {
  switch (target) {
    case EgoAction::Stop: return sketch_stop(rng);
    case EgoAction::Move: return sketch_move(rng);
    case EgoAction::RightLaneChange: return sketch_rlc(rng);
    case EgoAction::LeftLaneChange: return sketch_llc(rng);
  }
  return sketch_move(rng);
}

std::array<std::size_t, kNumEgoActions> class_counts(const SyntheticConfig& config) {
  std::array<std::size_t, kNumEgoActions> counts{};
  std::array<double, kNumEgoActions> remainders{};
  std::size_t assigned = 0;
  for (int k = 0; k < kNumEgoActions; ++k) {
    double exact = config.proportions[static_cast<std::size_t>(k)] * static_cast<double>(config.size);
    counts[static_cast<std::size_t>(k)] = static_cast<std::size_t>(std::floor(exact));
    remainders[static_cast<std::size_t>(k)] = exact - std::floor(exact);
    assigned += counts[static_cast<std::size_t>(k)];
  }
  // Hand out the leftover frames by largest remainder, lowest class first.
  while (assigned < config.size) {
    int best = 0;
    for (int k = 1; k < kNumEgoActions; ++k) {
      if (remainders[static_cast<std::size_t>(k)] > remainders[static_cast<std::size_t>(best)]) best = k;
    }
    counts[static_cast<std::size_t>(best)] += 1;
    remainders[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

std::vector<FrameRecord> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.size < 1) throw InvalidConfigError("requested size must be at least 1");
  double total = 0.0;
  for (double p : config.proportions) {
    if (p < 0.0) throw InvalidConfigError("class proportions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidConfigError("class proportions must sum to 1, got " + std::to_string(total));
  }
  if (config.label_noise < 0.0 || config.label_noise >= 1.0) {
    throw InvalidConfigError("label noise must lie in [0, 1)");
  }

  const Codebook& codebook = Codebook::defaults();
  Rng rng(seed);

  auto counts = class_counts(config);
  std::vector<EgoAction> targets;
  targets.reserve(config.size);
  for (int k = 0; k < kNumEgoActions; ++k) {
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(k)]; ++i) {
      targets.push_back(static_cast<EgoAction>(k));
    }
  }
  for (std::size_t i = targets.size() - 1; i > 0; --i) {
    std::size_t j = rng.below(i + 1);
    std::swap(targets[i], targets[j]);
  }

  std::vector<FrameRecord> frames;
  frames.reserve(config.size);
  for (std::size_t i = 0; i < config.size; ++i) {
    SceneSketch sketch = sketch_for(targets[i], rng);

    FrameRecord frame;
    frame.frame_id = static_cast<std::int64_t>(i);
    frame.time = 0.1 * static_cast<double>(i);
    frame.observations = std::move(sketch.observations);
    frame.ego_plan = sketch.plan;
    frame.ground_truth_explanation = std::move(sketch.gt_text);

    EgoAction label = rule_oracle(encode_frame(frame, codebook), codebook);
    if (label != targets[i]) {
      throw std::logic_error("synthetic sketch for class " + std::string(to_string(targets[i])) +
                             " labelled as " + std::string(to_string(label)));
    }
    if (config.label_noise > 0.0 && rng.unit() < config.label_noise) {
      int shift = 1 + static_cast<int>(rng.below(kNumEgoActions - 1));
      label = static_cast<EgoAction>((static_cast<int>(label) + shift) % kNumEgoActions);
    }
    frame.ego_action = label;
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace commentree
