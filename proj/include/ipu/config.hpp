#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipu/losses.hpp"
#include "ipu/mlp.hpp"
#include "ipu/optimizer.hpp"
#include "ipu/sampling.hpp"

namespace ipu {

enum class Recipe { kTwoPixelOod, kTwoPixelMiod, kPatchGray, kPatchColor, kDecoder };

const char* recipe_name(Recipe r);
Recipe recipe_from_name(const std::string& name);

struct LrPoint {
  int epoch = 0;
  double lr = 0.0;
};

struct OptimizerSettings {
  OptimizerConfig base;
  std::vector<LrPoint> schedule;  // sorted by epoch; each entry applies from that epoch on

  double lr_at(int epoch) const;
};

enum class LossKind { kOod, kMiod, kRepel, kSquaredError };

struct LossSettings {
  LossKind kind = LossKind::kOod;
  OodConfig ood;
  RepelConfig repel;
};

enum class DataSource { kSyntheticPairs, kCorpusPairs, kPatches };

struct GaussianSpec {
  double mean[2] = {0.5, 0.5};
  double cov[2][2] = {{0.09, 0.081}, {0.081, 0.09}};
};

struct DataSettings {
  DataSource source = DataSource::kSyntheticPairs;
  std::string corpus;  // newline-delimited list of image paths
  std::uint64_t pair_count = 0;
  std::uint64_t batch_size = 0;
  std::uint64_t heldout_count = 0;
  GaussianSpec gaussian;
  int patch_size = 4;
  int channels = 1;
  SamplerConfig sampler;
};

struct RecipeConfig {
  Recipe recipe = Recipe::kTwoPixelOod;
  std::uint64_t seed = 1;
  int epochs = 1;
  double scale_factor = 1.0;
  ModelSpec model;
  int model_count = 1;
  LossSettings loss;
  OptimizerSettings optimizer;
  DataSettings data;
  std::vector<std::string> encoder_weights;  // decoder recipe only

  void validate() const;
};

ModelSpec parse_model_spec(const nlohmann::json& j);
nlohmann::json model_spec_json(const ModelSpec& spec);

RecipeConfig parse_recipe_config(const nlohmann::json& j);
nlohmann::json recipe_config_json(const RecipeConfig& cfg);

// Reads the file, applies key=value overrides on dotted paths, then parses.
RecipeConfig load_recipe_config(const std::string& path, const std::vector<std::string>& overrides);

nlohmann::json load_json(const std::string& path);
void apply_override(nlohmann::json& root, const std::string& assignment);

// Rounds x*scale to the nearest integer, never below 1.
std::uint64_t scaled_count(std::uint64_t x, double scale);

}  // namespace ipu
