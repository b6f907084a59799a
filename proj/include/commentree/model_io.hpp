#pragma once

#include <string>
#include <vector>

#include "commentree/scene.hpp"
#include "commentree/tree.hpp"

namespace commentree {

/// A trained forest plus the background sample used for attribution, which is
/// what a model file stores (format documented in docs/file_formats.md).
struct TrainedModel {
  RandomForest forest;
  std::vector<FeatureVector> background;
};

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace commentree
