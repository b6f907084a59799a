#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "commentree/errors.hpp"

namespace commentree {

enum class AgentClass { None, Vehicle, Bus, Motorbike, Cyclist, Pedestrian, TrafficLight };

enum class AgentAction { None, Moving, Stopped, Braking, Indicating, Crossing, Red, Amber, Green };

enum class LanePosition { EgoLane, IncomingLane, OutgoingLane };

enum class EgoAction : int { Stop = 0, Move = 1, RightLaneChange = 2, LeftLaneChange = 3 };

inline constexpr int kNumEgoActions = 4;
inline constexpr int kNumFeatures = 5;

/// Index of each column of the encoded feature vector.
enum FeatureIndex : int {
  kEgoLane = 0,
  kIncomLane = 1,
  kOutgoLane = 2,
  kTl = 3,
  kEgoPlan = 4,
};

std::string_view to_string(AgentClass c);
std::string_view to_string(AgentAction a);
std::string_view to_string(LanePosition p);
std::string_view to_string(EgoAction a);  // "stop" / "move" / "rlc" / "llc"

AgentClass parse_agent_class(std::string_view s);
AgentAction parse_agent_action(std::string_view s);
EgoAction parse_ego_action(std::string_view s);

EgoAction ego_action_from_index(int index);

/// Whether an action is meaningful for a class (light states only for
/// traffic lights, Crossing only for pedestrians/cyclists, None only for None).
bool is_valid_pair(AgentClass c, AgentAction a);

const std::array<std::string, kNumFeatures>& feature_names();
const std::array<std::string, kNumEgoActions>& class_names();
std::optional<int> feature_index(std::string_view name);

/// One observed agent in the scene at some frame.
struct AgentObservation {
  AgentClass agent_class = AgentClass::None;
  AgentAction action = AgentAction::None;
  LanePosition position = LanePosition::EgoLane;
  double size = 0.0;      // length scale in meters, >= 0
  double distance = 1.0;  // distance to ego in meters, > 0

  bool valid() const;
};

/// One time-indexed scene record.
struct FrameRecord {
  std::int64_t frame_id = 0;
  double time = 0.0;  // seconds
  std::vector<AgentObservation> observations;
  EgoAction ego_plan = EgoAction::Move;
  EgoAction ego_action = EgoAction::Move;
  std::string ground_truth_explanation;  // empty when absent
};

/// Encoded model input, ordered [EgoLane, IncomLane, OutgoLane, TL, EgoPlan].
struct FeatureVector {
  std::array<int, kNumFeatures> codes{};

  int& operator[](int i) { return codes[static_cast<std::size_t>(i)]; }
  int operator[](int i) const { return codes[static_cast<std::size_t>(i)]; }
  bool operator==(const FeatureVector&) const = default;
  auto operator<=>(const FeatureVector&) const = default;
};

/// Bijective map from (class, action) pairs to integer codes. Code 0 is
/// reserved for the empty slot (None, None). Codes are ordinal: for road
/// agents they rise with action severity (Moving < Indicating < Crossing <
/// Braking < Stopped), for traffic lights Green < Amber < Red.
class Codebook {
 public:
  /// The built-in codebook, version "1".
  static const Codebook& defaults();

  int code(AgentClass c, AgentAction a) const;  // throws UnknownPairError
  std::optional<int> try_code(AgentClass c, AgentAction a) const;
  std::pair<AgentClass, AgentAction> decode(int code) const;  // throws UnknownPairError
  bool contains(int code) const;

  int max_code() const;
  const std::string& version() const { return version_; }

  /// Codes a lane feature can take: 0 plus every non-traffic-light code.
  std::vector<int> lane_codes() const;
  /// Codes the TL feature can take: 0 plus every traffic-light code.
  std::vector<int> tl_codes() const;

  void save(const std::string& path) const;
  static Codebook load(const std::string& path);

  static Codebook from_entries(std::string version,
                               const std::vector<std::pair<std::pair<AgentClass, AgentAction>, int>>& entries);

 private:
  std::string version_;
  std::map<std::pair<AgentClass, AgentAction>, int> to_code_;
  std::map<int, std::pair<AgentClass, AgentAction>> to_pair_;
};

/// Per-feature value domains implied by a codebook (lane codes for the three
/// lane features, TL codes for TL, the four action codes for EgoPlan).
std::array<std::vector<int>, kNumFeatures> feature_domains(const Codebook& codebook);

/// The observation in `lane` with the highest dominance score size/distance.
/// Ties go to the smaller distance, then to the earlier list position.
std::optional<AgentObservation> select_dominant_agent(std::span<const AgentObservation> observations,
                                                      LanePosition lane);

/// Encodes a frame: per-lane code of the dominant road agent (0 when the lane
/// is empty), code of the dominant traffic light regardless of lane, and the
/// ego plan code. Throws UnknownPairError when the codebook lacks a pair.
FeatureVector encode_frame(const FrameRecord& frame, const Codebook& codebook);

struct DatasetRow {
  FeatureVector features;
  EgoAction label = EgoAction::Stop;
  std::string gt_text;  // ground-truth explanation, empty when absent
};

using Dataset = std::vector<DatasetRow>;

/// Parses a "Class:Action:size:distance" tuple (the CSV cell format).
AgentObservation parse_observation(std::string_view cell, LanePosition lane);

std::vector<FrameRecord> load_frames_csv(const std::string& path);
void write_frames_csv(const std::string& path, std::span<const FrameRecord> frames);

/// Loads a frame CSV and encodes every row. Row order is preserved.
Dataset load_dataset(const std::string& path, const Codebook& codebook);

/// Deterministic shuffle split. |test| = round(test_fraction * N).
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed);

/// Rewrites each frame's plan as the recorded action `lookahead` frames ahead.
/// Frames near the end keep their own action as the plan.
void derive_ego_plans(std::vector<FrameRecord>& frames, int lookahead);

}  // namespace commentree
