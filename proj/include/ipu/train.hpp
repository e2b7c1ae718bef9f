#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ipu/config.hpp"
#include "ipu/mlp.hpp"
#include "ipu/sampling.hpp"

namespace ipu {

struct TrainReport {
  std::vector<double> epoch_loss;  // mean step loss per epoch
  std::vector<double> epoch_lr;    // learning rate in effect per epoch
  double wall_seconds = 0.0;
  std::string weights_hash;  // hex FNV-1a over all models' serialized bytes
  nlohmann::json config_echo;
};

/// Distinct binary codes paired with the mean of all patches that produced
/// them; the decoder's training table.
struct CodeTable {
  MatrixF inputs;   // rows of 0/1 code bits
  MatrixF targets;  // mean patch per code
  std::vector<std::uint64_t> counts;
};

struct TrainResult {
  std::vector<Mlp<float>> models;
  TrainReport report;
  CodeTable table;  // decoder recipe only
};

/// Newline-delimited image paths; relative entries resolve against the
/// manifest's directory.
std::vector<Image> load_corpus(const std::string& manifest_path);

/// One batch of two-pixel training data; synthetic Gaussian pairs are clamped
/// to [0,1]. The (stream, salt) pair keeps epochs and held-out sets disjoint.
MatrixF make_pair_batch(const DataSettings& data, const std::vector<Image>* corpus,
                        std::size_t count, std::uint64_t seed, Stream stream, std::uint64_t salt);

/// Held-out evaluation data matching a config's source. Counts are not scaled
/// by scale_factor.
MatrixF heldout_pairs(const RecipeConfig& cfg, const std::vector<Image>* corpus);
MatrixF heldout_patches(const RecipeConfig& cfg, const std::vector<Image>& corpus);

/// Encodes patches with the (joint) encoder output rounded at 0.5 and averages
/// patches per distinct code, in first-seen order.
CodeTable build_code_table(const std::vector<Mlp<float>>& encoders, const MatrixF& patches);

std::uint64_t combined_weights_hash(const std::vector<Mlp<float>>& models);

/// Runs the configured recipe start to finish. The corpus pointer may be null
/// for synthetic sources; the overload without it loads cfg.data.corpus when
/// one is required.
TrainResult train(const RecipeConfig& cfg, const std::vector<Image>* corpus);
TrainResult train(const RecipeConfig& cfg);

}  // namespace ipu
