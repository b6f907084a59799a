#include "commentree/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "commentree/rng.hpp"

namespace commentree {

namespace {

struct EnumName {
  int value;
  std::string_view name;
};

constexpr EnumName kClassNames[] = {
    {static_cast<int>(AgentClass::None), "None"},
    {static_cast<int>(AgentClass::Vehicle), "Vehicle"},
    {static_cast<int>(AgentClass::Bus), "Bus"},
    {static_cast<int>(AgentClass::Motorbike), "Motorbike"},
    {static_cast<int>(AgentClass::Cyclist), "Cyclist"},
    {static_cast<int>(AgentClass::Pedestrian), "Pedestrian"},
    {static_cast<int>(AgentClass::TrafficLight), "TrafficLight"},
};

constexpr EnumName kActionNames[] = {
    {static_cast<int>(AgentAction::None), "None"},
    {static_cast<int>(AgentAction::Moving), "Moving"},
    {static_cast<int>(AgentAction::Stopped), "Stopped"},
    {static_cast<int>(AgentAction::Braking), "Braking"},
    {static_cast<int>(AgentAction::Indicating), "Indicating"},
    {static_cast<int>(AgentAction::Crossing), "Crossing"},
    {static_cast<int>(AgentAction::Red), "Red"},
    {static_cast<int>(AgentAction::Amber), "Amber"},
    {static_cast<int>(AgentAction::Green), "Green"},
};

constexpr EnumName kEgoActionNames[] = {
    {static_cast<int>(EgoAction::Stop), "stop"},
    {static_cast<int>(EgoAction::Move), "move"},
    {static_cast<int>(EgoAction::RightLaneChange), "rlc"},
    {static_cast<int>(EgoAction::LeftLaneChange), "llc"},
};

template <std::size_t N>
std::string_view name_of(const EnumName (&table)[N], int value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  return "?";
}

template <std::size_t N>
std::optional<int> value_of(const EnumName (&table)[N], std::string_view name) {
  for (const auto& entry : table) {
    if (entry.name == name) return entry.value;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(AgentClass c) { return name_of(kClassNames, static_cast<int>(c)); }
std::string_view to_string(AgentAction a) { return name_of(kActionNames, static_cast<int>(a)); }

std::string_view to_string(LanePosition p) {
  switch (p) {
    case LanePosition::EgoLane: return "EgoLane";
    case LanePosition::IncomingLane: return "IncomingLane";
    case LanePosition::OutgoingLane: return "OutgoingLane";
  }
  return "?";
}

std::string_view to_string(EgoAction a) { return name_of(kEgoActionNames, static_cast<int>(a)); }

AgentClass parse_agent_class(std::string_view s) {
  auto v = value_of(kClassNames, s);
  if (!v) throw Error("unknown agent class '" + std::string(s) + "'");
  return static_cast<AgentClass>(*v);
}

AgentAction parse_agent_action(std::string_view s) {
  auto v = value_of(kActionNames, s);
  if (!v) throw Error("unknown agent action '" + std::string(s) + "'");
  return static_cast<AgentAction>(*v);
}

EgoAction parse_ego_action(std::string_view s) {
  auto v = value_of(kEgoActionNames, s);
  if (!v) throw Error("unknown ego action '" + std::string(s) + "' (expected stop/move/rlc/llc)");
  return static_cast<EgoAction>(*v);
}

EgoAction ego_action_from_index(int index) {
  if (index < 0 || index >= kNumEgoActions) {
    throw Error("ego action index out of range: " + std::to_string(index));
  }
  return static_cast<EgoAction>(index);
}

bool is_valid_pair(AgentClass c, AgentAction a) {
  switch (c) {
    case AgentClass::None:
      return a == AgentAction::None;
    case AgentClass::Vehicle:
    case AgentClass::Bus:
    case AgentClass::Motorbike:
      return a == AgentAction::Moving || a == AgentAction::Indicating ||
             a == AgentAction::Braking || a == AgentAction::Stopped;
    case AgentClass::Cyclist:
    case AgentClass::Pedestrian:
      return a == AgentAction::Moving || a == AgentAction::Crossing || a == AgentAction::Stopped;
    case AgentClass::TrafficLight:
      return a == AgentAction::Red || a == AgentAction::Amber || a == AgentAction::Green;
  }
  return false;
}

const std::array<std::string, kNumFeatures>& feature_names() {
  static const std::array<std::string, kNumFeatures> names = {"EgoLane", "IncomLane", "OutgoLane",
                                                              "TL", "EgoPlan"};
  return names;
}

const std::array<std::string, kNumEgoActions>& class_names() {
  static const std::array<std::string, kNumEgoActions> names = {"stop", "move", "rlc", "llc"};
  return names;
}

std::optional<int> feature_index(std::string_view name) {
  const auto& names = feature_names();
  for (int i = 0; i < kNumFeatures; ++i) {
    if (names[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

bool AgentObservation::valid() const {
  return size >= 0.0 && distance > 0.0 && is_valid_pair(agent_class, action);
}

// ---------------------------------------------------------------------------
// Codebook

Codebook Codebook::from_entries(
    std::string version,
    const std::vector<std::pair<std::pair<AgentClass, AgentAction>, int>>& entries) {
  Codebook cb;
  cb.version_ = std::move(version);
  for (const auto& [pair, code] : entries) {
    if (code < 0) throw FormatError("codebook codes must be nonnegative");
    if (!is_valid_pair(pair.first, pair.second)) {
      throw FormatError("codebook entry " + std::string(to_string(pair.first)) + ":" +
                        std::string(to_string(pair.second)) + " is not a valid pair");
    }
    if (!cb.to_code_.emplace(pair, code).second) {
      throw FormatError("duplicate codebook pair " + std::string(to_string(pair.first)) + ":" +
                        std::string(to_string(pair.second)));
    }
    if (!cb.to_pair_.emplace(code, pair).second) {
      throw FormatError("duplicate codebook code " + std::to_string(code));
    }
  }
  auto none = cb.to_pair_.find(0);
  if (none == cb.to_pair_.end() || none->second.first != AgentClass::None) {
    throw FormatError("codebook must reserve code 0 for None:None");
  }
  return cb;
}

const Codebook& Codebook::defaults() {
  static const Codebook cb = [] {
    using C = AgentClass;
    using A = AgentAction;
    std::vector<std::pair<std::pair<C, A>, int>> entries = {
        {{C::None, A::None}, 0},
        {{C::Vehicle, A::Moving}, 1},
        {{C::Bus, A::Moving}, 2},
        {{C::Motorbike, A::Moving}, 3},
        {{C::Cyclist, A::Moving}, 4},
        {{C::Pedestrian, A::Moving}, 5},
        {{C::Vehicle, A::Indicating}, 6},
        {{C::Bus, A::Indicating}, 7},
        {{C::Motorbike, A::Indicating}, 8},
        {{C::Cyclist, A::Crossing}, 9},
        {{C::Pedestrian, A::Crossing}, 10},
        {{C::Vehicle, A::Braking}, 11},
        {{C::Bus, A::Braking}, 12},
        {{C::Motorbike, A::Braking}, 13},
        {{C::Vehicle, A::Stopped}, 14},
        {{C::Bus, A::Stopped}, 15},
        {{C::Motorbike, A::Stopped}, 16},
        {{C::Cyclist, A::Stopped}, 17},
        {{C::Pedestrian, A::Stopped}, 18},
        {{C::TrafficLight, A::Green}, 19},
        {{C::TrafficLight, A::Amber}, 20},
        {{C::TrafficLight, A::Red}, 21},
    };
    return from_entries("1", entries);
  }();
  return cb;
}

int Codebook::code(AgentClass c, AgentAction a) const {
  auto it = to_code_.find({c, a});
  if (it == to_code_.end()) {
    throw UnknownPairError("pair " + std::string(to_string(c)) + ":" + std::string(to_string(a)) +
                           " is not in codebook version " + version_);
  }
  return it->second;
}

std::optional<int> Codebook::try_code(AgentClass c, AgentAction a) const {
  auto it = to_code_.find({c, a});
  if (it == to_code_.end()) return std::nullopt;
  return it->second;
}

std::pair<AgentClass, AgentAction> Codebook::decode(int code) const {
  auto it = to_pair_.find(code);
  if (it == to_pair_.end()) {
    throw UnknownPairError("code " + std::to_string(code) + " is not in codebook version " +
                           version_);
  }
  return it->second;
}

bool Codebook::contains(int code) const { return to_pair_.count(code) != 0; }

int Codebook::max_code() const { return to_pair_.empty() ? 0 : to_pair_.rbegin()->first; }

std::vector<int> Codebook::lane_codes() const {
  std::vector<int> codes;
  for (const auto& [code, pair] : to_pair_) {
    if (pair.first != AgentClass::TrafficLight) codes.push_back(code);
  }
  return codes;
}

std::vector<int> Codebook::tl_codes() const {
  std::vector<int> codes = {0};
  for (const auto& [code, pair] : to_pair_) {
    if (pair.first == AgentClass::TrafficLight) codes.push_back(code);
  }
  return codes;
}

void Codebook::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# commentree codebook\n";
  out << "version " << version_ << "\n";
  for (const auto& [code, pair] : to_pair_) {
    out << to_string(pair.first) << ":" << to_string(pair.second) << "=" << code << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

Codebook Codebook::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string version;
  std::vector<std::pair<std::pair<AgentClass, AgentAction>, int>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("version ", 0) == 0) {
      version = line.substr(8);
      continue;
    }
    auto eq = line.find('=');
    auto colon = line.find(':');
    if (eq == std::string::npos || colon == std::string::npos || colon > eq) {
      throw ParseError(line_no, "expected Class:Action=code");
    }
    try {
      AgentClass c = parse_agent_class(line.substr(0, colon));
      AgentAction a = parse_agent_action(line.substr(colon + 1, eq - colon - 1));
      int code = std::stoi(line.substr(eq + 1));
      entries.push_back({{c, a}, code});
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (version.empty()) throw FormatError("codebook file " + path + " has no version line");
  return from_entries(version, entries);
}

std::array<std::vector<int>, kNumFeatures> feature_domains(const Codebook& codebook) {
  std::array<std::vector<int>, kNumFeatures> domains;
  domains[kEgoLane] = codebook.lane_codes();
  domains[kIncomLane] = codebook.lane_codes();
  domains[kOutgoLane] = codebook.lane_codes();
  domains[kTl] = codebook.tl_codes();
  domains[kEgoPlan] = {0, 1, 2, 3};
  return domains;
}

// ---------------------------------------------------------------------------
// Encoding

std::optional<AgentObservation> select_dominant_agent(std::span<const AgentObservation> observations,
                                                      LanePosition lane) {
  const AgentObservation* best = nullptr;
  double best_score = 0.0;
  for (const auto& obs : observations) {
    if (obs.position != lane) continue;
    double score = obs.size / obs.distance;
    if (best == nullptr || score > best_score ||
        (score == best_score && obs.distance < best->distance)) {
      best = &obs;
      best_score = score;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

namespace {

// Lane features consider road agents only; the TL feature considers traffic
// lights from any lane.
std::optional<AgentObservation> dominant_road_agent(std::span<const AgentObservation> observations,
                                                    LanePosition lane) {
  std::vector<AgentObservation> road;
  for (const auto& obs : observations) {
    if (obs.agent_class != AgentClass::TrafficLight) road.push_back(obs);
  }
  return select_dominant_agent(road, lane);
}

std::optional<AgentObservation> dominant_traffic_light(
    std::span<const AgentObservation> observations) {
  const AgentObservation* best = nullptr;
  double best_score = 0.0;
  for (const auto& obs : observations) {
    if (obs.agent_class != AgentClass::TrafficLight) continue;
    double score = obs.size / obs.distance;
    if (best == nullptr || score > best_score ||
        (score == best_score && obs.distance < best->distance)) {
      best = &obs;
      best_score = score;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

}  // namespace

FeatureVector encode_frame(const FrameRecord& frame, const Codebook& codebook) {
  FeatureVector v;
  const LanePosition lanes[3] = {LanePosition::EgoLane, LanePosition::IncomingLane,
                                 LanePosition::OutgoingLane};
  for (int i = 0; i < 3; ++i) {
    auto dominant = dominant_road_agent(frame.observations, lanes[i]);
    v[i] = dominant ? codebook.code(dominant->agent_class, dominant->action) : 0;
  }
  auto tl = dominant_traffic_light(frame.observations);
  v[kTl] = tl ? codebook.code(tl->agent_class, tl->action) : 0;
  v[kEgoPlan] = static_cast<int>(frame.ego_plan);
  return v;
}

// ---------------------------------------------------------------------------
// CSV files

namespace {

constexpr std::string_view kCsvHeader =
    "frame_id,time,ego_lane,incom_lane,outgo_lane,tl,ego_plan,ego_action,gt_explanation";

std::string format_double(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

std::string format_cell(const std::optional<AgentObservation>& obs) {
  if (!obs) return "";
  std::ostringstream out;
  out << to_string(obs->agent_class) << ":" << to_string(obs->action) << ":"
      << format_double(obs->size) << ":" << format_double(obs->distance);
  return out.str();
}

std::string quote_text(const std::string& text) {
  if (text.empty()) return "";
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

AgentObservation parse_cell(std::string_view cell, LanePosition lane, std::size_t line_no) {
  try {
    return parse_observation(cell, lane);
  } catch (const std::exception& e) {
    throw ParseError(line_no, e.what());
  }
}

std::string unquote_text(std::string_view raw, std::size_t line_no) {
  if (raw.empty()) return "";
  if (raw.front() != '"') return std::string(raw);
  if (raw.size() < 2 || raw.back() != '"') throw ParseError(line_no, "unterminated quoted text");
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    if (raw[i] == '"') {
      if (i + 2 >= raw.size() || raw[i + 1] != '"') {
        throw ParseError(line_no, "stray quote in text field");
      }
      ++i;
    }
    out += raw[i];
  }
  return out;
}

}  // namespace

AgentObservation parse_observation(std::string_view cell, LanePosition lane) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = cell.find(':', start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(cell.substr(start));
      break;
    }
    parts.emplace_back(cell.substr(start, pos - start));
    start = pos + 1;
  }
  if (parts.size() != 4) {
    throw Error("cell '" + std::string(cell) + "' is not Class:Action:size:distance");
  }
  AgentObservation obs;
  try {
    obs.agent_class = parse_agent_class(parts[0]);
    obs.action = parse_agent_action(parts[1]);
    obs.size = std::stod(parts[2]);
    obs.distance = std::stod(parts[3]);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error("bad size or distance in '" + std::string(cell) + "'");
  }
  obs.position = lane;
  if (!obs.valid()) {
    throw Error("invalid observation '" + std::string(cell) + "'");
  }
  return obs;
}

void write_frames_csv(const std::string& path, std::span<const FrameRecord> frames) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << kCsvHeader << "\n";
  for (const auto& frame : frames) {
    // The file schema keeps one observation per lane: the dominant one.
    auto ego = dominant_road_agent(frame.observations, LanePosition::EgoLane);
    auto incom = dominant_road_agent(frame.observations, LanePosition::IncomingLane);
    auto outgo = dominant_road_agent(frame.observations, LanePosition::OutgoingLane);
    auto tl = dominant_traffic_light(frame.observations);
    char time_buf[32];
    std::snprintf(time_buf, sizeof(time_buf), "%.3f", frame.time);
    out << frame.frame_id << "," << time_buf << "," << format_cell(ego) << "," << format_cell(incom)
        << "," << format_cell(outgo) << "," << format_cell(tl) << "," << to_string(frame.ego_plan)
        << "," << to_string(frame.ego_action) << "," << quote_text(frame.ground_truth_explanation)
        << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<FrameRecord> load_frames_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError(path + " is empty (missing header)");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) {
    throw FormatError(path + ": unexpected header '" + line + "'");
  }

  std::vector<FrameRecord> frames;
  std::set<std::int64_t> seen_ids;
  double last_time = -1.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    // First eight fields never contain commas; the trailing field is the
    // (optionally quoted) free text.
    std::array<std::string, 8> fields;
    std::size_t start = 0;
    for (int i = 0; i < 8; ++i) {
      auto pos = line.find(',', start);
      if (pos == std::string::npos) throw ParseError(line_no, "expected 9 columns");
      fields[static_cast<std::size_t>(i)] = line.substr(start, pos - start);
      start = pos + 1;
    }
    std::string text_field = line.substr(start);

    FrameRecord frame;
    try {
      frame.frame_id = std::stoll(fields[0]);
      frame.time = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad frame_id or time");
    }
    if (frame.frame_id < 0) throw ParseError(line_no, "frame_id must be nonnegative");
    if (frame.time < 0) throw ParseError(line_no, "time must be nonnegative");
    if (!seen_ids.insert(frame.frame_id).second) {
      throw ParseError(line_no, "duplicate frame_id " + std::to_string(frame.frame_id));
    }
    if (frame.time < last_time) throw ParseError(line_no, "time must be nondecreasing");
    last_time = frame.time;

    const LanePosition lanes[3] = {LanePosition::EgoLane, LanePosition::IncomingLane,
                                   LanePosition::OutgoingLane};
    for (int i = 0; i < 3; ++i) {
      const std::string& cell = fields[static_cast<std::size_t>(2 + i)];
      if (!cell.empty()) frame.observations.push_back(parse_cell(cell, lanes[i], line_no));
    }
    if (!fields[5].empty()) {
      auto tl = parse_cell(fields[5], LanePosition::EgoLane, line_no);
      if (tl.agent_class != AgentClass::TrafficLight) {
        throw ParseError(line_no, "tl column must hold a TrafficLight observation");
      }
      frame.observations.push_back(tl);
    }
    try {
      frame.ego_plan = parse_ego_action(fields[6]);
      frame.ego_action = parse_ego_action(fields[7]);
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
    frame.ground_truth_explanation = unquote_text(text_field, line_no);
    frames.push_back(std::move(frame));
  }
  return frames;
}

Dataset load_dataset(const std::string& path, const Codebook& codebook) {
  auto frames = load_frames_csv(path);
  Dataset dataset;
  dataset.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    try {
      dataset.push_back(
          {encode_frame(frames[i], codebook), frames[i].ego_action, frames[i].ground_truth_explanation});
    } catch (const UnknownPairError& e) {
      throw UnknownPairError(i + 2, e.what());  // +2: header line plus 1-based rows
    }
  }
  return dataset;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidFractionError("test fraction must lie in (0, 1), got " +
                               std::to_string(test_fraction));
  }
  if (dataset.empty()) throw EmptyDatasetError("cannot split an empty dataset");

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));

  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  Dataset train, test;
  train.reserve(train_idx.size());
  test.reserve(test_idx.size());
  for (auto i : train_idx) train.push_back(dataset[i]);
  for (auto i : test_idx) test.push_back(dataset[i]);
  return {std::move(train), std::move(test)};
}

void derive_ego_plans(std::vector<FrameRecord>& frames, int lookahead) {
  if (lookahead < 0) throw InvalidConfigError("lookahead must be nonnegative");
  const std::size_t n = frames.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ahead = i + static_cast<std::size_t>(lookahead);
    frames[i].ego_plan = frames[ahead < n ? ahead : n - 1].ego_action;
  }
}

}  // namespace commentree
