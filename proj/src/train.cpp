#include "ipu/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ipu/analysis.hpp"
#include "ipu/codes.hpp"
#include "ipu/losses.hpp"
#include "ipu/optimizer.hpp"

namespace ipu {

std::vector<Image> load_corpus(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open corpus manifest: " + manifest_path);
  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  std::vector<Image> images;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::filesystem::path p(line);
    if (p.is_relative()) p = base / p;
    images.push_back(load_image(p.string()));
  }
  if (images.empty()) throw ValidationError("corpus manifest lists no images: " + manifest_path);
  return images;
}

MatrixF make_pair_batch(const DataSettings& data, const std::vector<Image>* corpus,
                        std::size_t count, std::uint64_t seed, Stream stream, std::uint64_t salt) {
  Rng rng = make_rng(seed, stream, salt);
  if (data.source == DataSource::kSyntheticPairs) {
    const GaussianSpec& g = data.gaussian;
    MatrixD raw = synth_gaussian_2d(count, {g.mean[0], g.mean[1]},
                                    {g.cov[0][0], g.cov[0][1], g.cov[1][0], g.cov[1][1]}, rng);
    return raw.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
  }
  require(corpus != nullptr && !corpus->empty(), "pair sampling needs a corpus");
  return sample_pixel_pairs(*corpus, count, rng);
}

MatrixF heldout_pairs(const RecipeConfig& cfg, const std::vector<Image>* corpus) {
  require(cfg.data.heldout_count > 0, "heldout_count is zero");
  return make_pair_batch(cfg.data, corpus, cfg.data.heldout_count, cfg.seed, Stream::kHeldout, 0);
}

MatrixF heldout_patches(const RecipeConfig& cfg, const std::vector<Image>& corpus) {
  require(cfg.data.heldout_count > 0, "heldout_count is zero");
  Rng rng = make_rng(cfg.seed, Stream::kHeldout);
  return sample_patch_pool(corpus, cfg.data.heldout_count, cfg.data.patch_size, cfg.data.channels, rng)
      .values;
}

std::uint64_t combined_weights_hash(const std::vector<Mlp<float>>& models) {
  std::ostringstream buf(std::ios::binary);
  for (const Mlp<float>& m : models) serialize_weights(m, buf);
  std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

namespace {

struct Session {
  std::vector<Mlp<float>> models;
  std::vector<AdamOptimizer<float>> optims;

  Session(const RecipeConfig& cfg) {
    for (int d = 0; d < cfg.model_count; ++d)
      models.push_back(Mlp<float>::init(cfg.model, cfg.seed, static_cast<std::uint64_t>(d)));
    for (auto& m : models) optims.emplace_back(m, cfg.optimizer.base);
  }

  void set_lr(double lr) {
    for (auto& o : optims) o.set_lr(lr);
  }
};

double pair_epoch(const RecipeConfig& cfg, Session& ses, const MatrixF& pool) {
  auto batch = static_cast<Eigen::Index>(cfg.data.batch_size);
  auto steps = pool.rows() / batch;
  double loss_sum = 0.0;
  typename Mlp<float>::Cache cache;
  std::vector<typename Mlp<float>::Cache> caches(ses.models.size());
  for (Eigen::Index s = 0; s < steps; ++s) {
    MatrixF x = pool.middleRows(s * batch, batch);
    if (cfg.loss.kind == LossKind::kOod) {
      const MatrixF& y = ses.models[0].forward_cached(x, cache);
      LossResult<float> r = e_ood(y, cfg.loss.ood);
      ses.optims[0].step(ses.models[0], ses.models[0].backward(cache, r.grad));
      loss_sum += r.loss;
    } else {
      std::vector<MatrixF> ys(ses.models.size());
      for (std::size_t d = 0; d < ses.models.size(); ++d)
        ys[d] = ses.models[d].forward_cached(x, caches[d]);
      MultiLossResult<float> r = e_miod(ys, cfg.loss.ood);
      for (std::size_t d = 0; d < ses.models.size(); ++d)
        ses.optims[d].step(ses.models[d], ses.models[d].backward(caches[d], r.grads[d]));
      loss_sum += r.loss;
    }
  }
  return loss_sum / static_cast<double>(steps);
}

TrainResult train_two_pixel(const RecipeConfig& cfg, const std::vector<Image>* corpus) {
  std::uint64_t pairs = scaled_count(cfg.data.pair_count, cfg.scale_factor);
  require(cfg.data.batch_size >= 2, "two-pixel recipes need batch_size >= 2");
  if (cfg.epochs > 0)
    require(pairs >= cfg.data.batch_size, "pair_count smaller than batch_size");

  TrainResult out;
  Session ses(cfg);
  for (int e = 0; e < cfg.epochs; ++e) {
    double lr = cfg.optimizer.lr_at(e);
    ses.set_lr(lr);
    MatrixF pool = make_pair_batch(cfg.data, corpus, pairs, cfg.seed, Stream::kData,
                                   static_cast<std::uint64_t>(e));
    out.report.epoch_loss.push_back(pair_epoch(cfg, ses, pool));
    out.report.epoch_lr.push_back(lr);
  }
  out.models = std::move(ses.models);
  return out;
}

TrainResult train_patches(const RecipeConfig& cfg, const std::vector<Image>* corpus) {
  require(corpus != nullptr && !corpus->empty(), "patch recipes need a corpus");
  SamplerConfig sc = cfg.data.sampler;
  sc.batch_images = scaled_count(sc.batch_images, cfg.scale_factor);
  sc.patches_per_image = scaled_count(sc.patches_per_image, cfg.scale_factor);
  PatchSampler sampler(corpus, sc, cfg.data.patch_size, cfg.data.channels);
  std::size_t steps = sampler.steps_per_epoch();
  require(steps >= 1, "sampler yields no full mini-batches");

  TrainResult out;
  Session ses(cfg);
  typename Mlp<float>::Cache cache;
  std::vector<typename Mlp<float>::Cache> caches(ses.models.size());
  const bool joint = ses.models.size() > 1;  // color: 96 one-node models share the loss
  for (int e = 0; e < cfg.epochs; ++e) {
    double lr = cfg.optimizer.lr_at(e);
    ses.set_lr(lr);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      PatchBatch mb = sampler.next();
      if (!joint) {
        const MatrixF& y = ses.models[0].forward_cached(mb.values, cache);
        LossResult<float> r = repel(y, cfg.loss.repel);
        ses.optims[0].step(ses.models[0], ses.models[0].backward(cache, r.grad));
        loss_sum += r.loss;
      } else {
        MatrixF y(mb.values.rows(), static_cast<Eigen::Index>(ses.models.size()));
        for (std::size_t d = 0; d < ses.models.size(); ++d)
          y.col(static_cast<Eigen::Index>(d)) =
              ses.models[d].forward_cached(mb.values, caches[d]).col(0);
        LossResult<float> r = repel(y, cfg.loss.repel);
        for (std::size_t d = 0; d < ses.models.size(); ++d) {
          MatrixF g = r.grad.col(static_cast<Eigen::Index>(d));
          ses.optims[d].step(ses.models[d], ses.models[d].backward(caches[d], g));
        }
        loss_sum += r.loss;
      }
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(steps));
    out.report.epoch_lr.push_back(lr);
  }
  out.models = std::move(ses.models);
  return out;
}

}  // namespace

CodeTable build_code_table(const std::vector<Mlp<float>>& encoders, const MatrixF& patches) {
  require(patches.rows() >= 1, "code table needs at least one patch");
  std::size_t bits = 0;
  for (const auto& m : encoders) bits += m.output_dim();
  require(bits >= 1 && bits <= 128, "code table supports 1..128 bits");

  std::unordered_map<Code, std::size_t, CodeHash> index;
  std::vector<Code> order;
  std::vector<std::uint64_t> counts;
  std::vector<VectorD> sum_rows;

  const Eigen::Index chunk = 8192;
  for (Eigen::Index start = 0; start < patches.rows(); start += chunk) {
    Eigen::Index n = std::min(chunk, patches.rows() - start);
    MatrixF y = forward_joint(encoders, patches.middleRows(start, n));
    for (Eigen::Index s = 0; s < n; ++s) {
      Code c = round_to_code(y.data() + s * y.cols(), static_cast<int>(bits));
      auto [it, fresh] = index.try_emplace(c, order.size());
      if (fresh) {
        order.push_back(c);
        sum_rows.emplace_back(VectorD::Zero(patches.cols()));
        counts.push_back(0);
      }
      sum_rows[it->second] += patches.row(start + s).cast<double>().transpose();
      counts[it->second] += 1;
    }
  }

  CodeTable table;
  table.inputs.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(bits));
  table.targets.resize(static_cast<Eigen::Index>(order.size()), patches.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t b = 0; b < bits; ++b)
      table.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
          order[i].get(b) ? 1.0f : 0.0f;
    table.targets.row(static_cast<Eigen::Index>(i)) =
        (sum_rows[i] / static_cast<double>(counts[i])).cast<float>().transpose();
  }
  table.counts = std::move(counts);
  return table;
}

namespace {

TrainResult train_decoder(const RecipeConfig& cfg, const std::vector<Image>* corpus) {
  require(corpus != nullptr && !corpus->empty(), "decoder training needs a corpus");
  std::vector<Mlp<float>> encoders;
  for (const std::string& path : cfg.encoder_weights) encoders.push_back(load_weights(path));
  std::size_t bits = 0;
  for (const auto& m : encoders) bits += m.output_dim();
  require(cfg.model.input_dim() == bits, "decoder input width must equal total encoder bits");

  std::uint64_t patch_count = scaled_count(cfg.data.pair_count, cfg.scale_factor);
  Rng rng = make_rng(cfg.seed, Stream::kData);
  PatchBatch pool = sample_patch_pool(*corpus, patch_count, cfg.data.patch_size, cfg.data.channels, rng);
  for (const auto& m : encoders)
    require(m.input_dim() == static_cast<std::size_t>(pool.values.cols()),
            "encoder input does not match the patch size");

  TrainResult out;
  out.table = build_code_table(encoders, pool.values);
  require(out.table.inputs.rows() >= 1, "empty code table");

  std::uint64_t batch = cfg.data.batch_size == 0 ? 128 : cfg.data.batch_size;
  Session ses(cfg);
  typename Mlp<float>::Cache cache;
  const Eigen::Index rows = out.table.inputs.rows();
  std::vector<std::uint32_t> perm(static_cast<std::size_t>(rows));
  for (int e = 0; e < cfg.epochs; ++e) {
    double lr = cfg.optimizer.lr_at(e);
    ses.set_lr(lr);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<std::uint32_t>(i);
    Rng shuffle_rng = make_rng(cfg.seed, Stream::kShuffle, static_cast<std::uint64_t>(e));
    shuffle_rng.shuffle(perm);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (Eigen::Index start = 0; start < rows; start += static_cast<Eigen::Index>(batch)) {
      Eigen::Index n = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch), rows - start);
      MatrixF xb(n, out.table.inputs.cols());
      MatrixF tb(n, out.table.targets.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        xb.row(i) = out.table.inputs.row(perm[static_cast<std::size_t>(start + i)]);
        tb.row(i) = out.table.targets.row(perm[static_cast<std::size_t>(start + i)]);
      }
      const MatrixF& y = ses.models[0].forward_cached(xb, cache);
      LossResult<float> r = mse_loss(y, tb);
      ses.optims[0].step(ses.models[0], ses.models[0].backward(cache, r.grad));
      loss_sum += r.loss;
      steps += 1;
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(steps));
    out.report.epoch_lr.push_back(lr);
  }
  out.models = std::move(ses.models);
  return out;
}

}  // namespace

TrainResult train(const RecipeConfig& cfg, const std::vector<Image>* corpus) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  switch (cfg.recipe) {
    case Recipe::kTwoPixelOod:
    case Recipe::kTwoPixelMiod: out = train_two_pixel(cfg, corpus); break;
    case Recipe::kPatchGray:
    case Recipe::kPatchColor: out = train_patches(cfg, corpus); break;
    case Recipe::kDecoder: out = train_decoder(cfg, corpus); break;
  }
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report.weights_hash = hex64(combined_weights_hash(out.models));
  out.report.config_echo = recipe_config_json(cfg);
  return out;
}

TrainResult train(const RecipeConfig& cfg) {
  if (cfg.data.source == DataSource::kSyntheticPairs) return train(cfg, nullptr);
  std::vector<Image> corpus = load_corpus(cfg.data.corpus);
  return train(cfg, &corpus);
}

}  // namespace ipu
