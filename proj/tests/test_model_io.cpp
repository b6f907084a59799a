#include <doctest.h>

#include <fstream>

#include "commentree/model_io.hpp"
#include "commentree/synthetic.hpp"
#include "support.hpp"

using namespace commentree;
using namespace commentree::test;

namespace {

TrainedModel trained_model() {
  SyntheticConfig config;
  config.size = 400;
  auto frames = generate_synthetic(config, 11);
  const Codebook& cb = Codebook::defaults();
  Dataset dataset;
  for (const auto& frame : frames) {
    dataset.push_back({encode_frame(frame, cb), frame.ego_action, ""});
  }
  ForestParams params;
  params.n_trees = 12;
  params.seed = 11;
  RandomForest forest = fit_forest(dataset, params);
  std::vector<FeatureVector> background;
  for (std::size_t i = 0; i < 32; ++i) background.push_back(dataset[i].features);
  return {std::move(forest), std::move(background)};
}

}  // namespace

TEST_CASE("a saved model loads back with identical predictions") {
  TrainedModel model = trained_model();
  auto path = temp_file("model.json");
  save_model(model, path.string());
  TrainedModel loaded = load_model(path.string());

  CHECK(loaded.forest.n_trees() == model.forest.n_trees());
  CHECK(loaded.background == model.background);
  Rng rng(19);
  for (int round = 0; round < 1000; ++round) {
    FeatureVector v = random_input(rng);
    CHECK(loaded.forest.predict(v) == model.forest.predict(v));
    auto a = loaded.forest.predict_proba(v);
    auto b = model.forest.predict_proba(v);
    for (int k = 0; k < kNumEgoActions; ++k) {
      CHECK(a[static_cast<std::size_t>(k)] == b[static_cast<std::size_t>(k)]);
    }
  }
  // Serialisation is stable, so the round trip is byte-identical.
  CHECK(model_to_json(loaded) == model_to_json(model));
}

TEST_CASE("corrupted model files raise FormatError") {
  auto path = temp_file("corrupt.json");
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_model(path.string()), FormatError);

  {
    std::ofstream out(path);
    out << "{\"format\":\"commentree-model\",\"version\":1}";
  }
  CHECK_THROWS_AS(load_model(path.string()), FormatError);

  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), IoError);
}

TEST_CASE("a version mismatch names both versions") {
  TrainedModel model = trained_model();
  std::string text = model_to_json(model);
  auto pos = text.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 12, "\"version\": 2");
  try {
    model_from_json(text);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("version 2") != std::string::npos);
    CHECK(what.find("version 1") != std::string::npos);
  }
}

TEST_CASE("structural violations are rejected on load") {
  // A leaf pointing at children.
  std::string text = R"({
    "format": "commentree-model",
    "version": 1,
    "kind": "classification",
    "feature_names": ["EgoLane","IncomLane","OutgoLane","TL","EgoPlan"],
    "class_names": ["stop","move","rlc","llc"],
    "meta": {"seed":0,"n_trees":1,"max_depth":0,"min_samples_leaf":1,"features_per_split":0,"bootstrap":false},
    "trees": [{"root":0,"nodes":[
      {"id":0,"feature":"TL","threshold":1.0,"left":1,"right":2,"counts":[1,1,0,0]},
      {"id":1,"counts":[1,0,0,0]},
      {"id":2,"counts":[0,2,0,0]}
    ]}],
    "background": []
  })";
  CHECK_THROWS_AS(model_from_json(text), FormatError);  // counts do not sum
}
