#include "ipu/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace ipu {

using nlohmann::json;

const char* recipe_name(Recipe r) {
  switch (r) {
    case Recipe::kTwoPixelOod: return "two_pixel_ood";
    case Recipe::kTwoPixelMiod: return "two_pixel_miod";
    case Recipe::kPatchGray: return "patch_gray";
    case Recipe::kPatchColor: return "patch_color";
    case Recipe::kDecoder: return "decoder";
  }
  throw ValidationError("unreachable recipe");
}

Recipe recipe_from_name(const std::string& name) {
  for (Recipe r : {Recipe::kTwoPixelOod, Recipe::kTwoPixelMiod, Recipe::kPatchGray,
                   Recipe::kPatchColor, Recipe::kDecoder})
    if (name == recipe_name(r)) return r;
  throw ValidationError("unknown recipe: " + name);
}

double OptimizerSettings::lr_at(int epoch) const {
  double lr = base.lr;
  for (const LrPoint& p : schedule)
    if (p.epoch <= epoch) lr = p.lr;
  return lr;
}

namespace {

void check_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(ctx + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ValidationError(ctx + ": unknown key \"" + item.key() + "\"");
  }
}

double get_number(const json& j, const std::string& ctx) {
  if (!j.is_number()) throw ValidationError(ctx + ": expected a number");
  return j.get<double>();
}

double get_opt(const json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  return get_number(j.at(key), key);
}

std::int64_t get_int(const json& j, const std::string& ctx) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw ValidationError(ctx + ": expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t get_count(const json& j, const std::string& ctx) {
  std::int64_t v = get_int(j, ctx);
  if (v < 0) throw ValidationError(ctx + ": must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::string get_string(const json& j, const std::string& ctx) {
  if (!j.is_string()) throw ValidationError(ctx + ": expected a string");
  return j.get<std::string>();
}

}  // namespace

ModelSpec parse_model_spec(const json& j) {
  check_keys(j, "model", {"layers"});
  if (!j.contains("layers") || !j.at("layers").is_array())
    throw ValidationError("model: missing \"layers\" array");
  ModelSpec spec;
  for (const json& lj : j.at("layers")) {
    check_keys(lj, "model layer", {"in", "out", "act"});
    LayerSpec l;
    l.in = static_cast<std::size_t>(get_count(lj.at("in"), "layer in"));
    l.out = static_cast<std::size_t>(get_count(lj.at("out"), "layer out"));
    l.act = activation_from_name(get_string(lj.at("act"), "layer act"));
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

json model_spec_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& l : spec.layers)
    layers.push_back({{"in", l.in}, {"out", l.out}, {"act", activation_name(l.act)}});
  return json{{"layers", layers}};
}

namespace {

LossSettings parse_loss(const json& j) {
  if (!j.is_object()) throw ValidationError("loss: expected a JSON object");
  if (!j.contains("loss")) throw ValidationError("loss: missing \"loss\" kind");
  LossSettings s;
  std::string kind = get_string(j.at("loss"), "loss kind");
  if (kind == "ood" || kind == "miod") {
    check_keys(j, "loss", {"loss", "k"});
    s.kind = kind == "ood" ? LossKind::kOod : LossKind::kMiod;
    s.ood.k = get_opt(j, "k", s.ood.k);
    if (s.ood.k < 0) throw ValidationError("loss: k must be non-negative");
  } else if (kind == "repel") {
    check_keys(j, "loss", {"loss", "mode", "alpha", "epsilon"});
    s.kind = LossKind::kRepel;
    std::string mode = j.contains("mode") ? get_string(j.at("mode"), "loss mode") : "sample_wise";
    if (mode == "sample_wise")
      s.repel.mode = RepelMode::kSampleWise;
    else if (mode == "node_wise")
      s.repel.mode = RepelMode::kNodeWise;
    else
      throw ValidationError("loss: mode must be sample_wise or node_wise");
    s.repel.alpha = get_opt(j, "alpha", s.repel.mode == RepelMode::kNodeWise ? 0.0625 : 0.05);
    s.repel.epsilon = get_opt(j, "epsilon", s.repel.epsilon);
    if (s.repel.epsilon < 0) throw ValidationError("loss: epsilon must be non-negative");
  } else if (kind == "squared_error") {
    check_keys(j, "loss", {"loss"});
    s.kind = LossKind::kSquaredError;
  } else {
    throw ValidationError("loss: unknown kind \"" + kind + "\"");
  }
  return s;
}

json loss_json(const LossSettings& s) {
  switch (s.kind) {
    case LossKind::kOod: return {{"loss", "ood"}, {"k", s.ood.k}};
    case LossKind::kMiod: return {{"loss", "miod"}, {"k", s.ood.k}};
    case LossKind::kRepel:
      return {{"loss", "repel"},
              {"mode", s.repel.mode == RepelMode::kNodeWise ? "node_wise" : "sample_wise"},
              {"alpha", s.repel.alpha},
              {"epsilon", s.repel.epsilon}};
    case LossKind::kSquaredError: return {{"loss", "squared_error"}};
  }
  throw ValidationError("unreachable loss kind");
}

OptimizerSettings parse_optimizer(const json& j) {
  check_keys(j, "optimizer",
             {"kind", "lr", "beta1", "beta2", "eps", "weight_decay", "lr_schedule"});
  OptimizerSettings s;
  std::string kind = j.contains("kind") ? get_string(j.at("kind"), "optimizer kind") : "adam";
  if (kind == "adam")
    s.base.kind = OptimizerConfig::Kind::kAdam;
  else if (kind == "adamw")
    s.base.kind = OptimizerConfig::Kind::kAdamW;
  else
    throw ValidationError("optimizer: kind must be adam or adamw");
  s.base.lr = get_opt(j, "lr", 1e-3);
  s.base.beta1 = get_opt(j, "beta1", 0.9);
  s.base.beta2 = get_opt(j, "beta2", 0.999);
  s.base.eps = get_opt(j, "eps", 1e-8);
  s.base.weight_decay = get_opt(j, "weight_decay", s.base.kind == OptimizerConfig::Kind::kAdamW ? 0.01 : 0.0);
  if (s.base.lr <= 0) throw ValidationError("optimizer: lr must be positive");
  if (s.base.beta1 < 0 || s.base.beta1 >= 1 || s.base.beta2 < 0 || s.base.beta2 >= 1)
    throw ValidationError("optimizer: betas must lie in [0, 1)");
  if (j.contains("lr_schedule")) {
    if (!j.at("lr_schedule").is_array()) throw ValidationError("optimizer: lr_schedule must be an array");
    for (const json& pj : j.at("lr_schedule")) {
      check_keys(pj, "lr_schedule entry", {"epoch", "lr"});
      LrPoint p;
      p.epoch = static_cast<int>(get_int(pj.at("epoch"), "lr_schedule epoch"));
      p.lr = get_number(pj.at("lr"), "lr_schedule lr");
      if (p.epoch < 0 || p.lr <= 0) throw ValidationError("optimizer: bad lr_schedule entry");
      s.schedule.push_back(p);
    }
    std::sort(s.schedule.begin(), s.schedule.end(),
              [](const LrPoint& a, const LrPoint& b) { return a.epoch < b.epoch; });
  }
  return s;
}

json optimizer_json(const OptimizerSettings& s) {
  json out{{"kind", s.base.kind == OptimizerConfig::Kind::kAdamW ? "adamw" : "adam"},
           {"lr", s.base.lr},
           {"beta1", s.base.beta1},
           {"beta2", s.base.beta2},
           {"eps", s.base.eps},
           {"weight_decay", s.base.weight_decay}};
  if (!s.schedule.empty()) {
    json sched = json::array();
    for (const LrPoint& p : s.schedule) sched.push_back({{"epoch", p.epoch}, {"lr", p.lr}});
    out["lr_schedule"] = sched;
  }
  return out;
}

SamplerConfig parse_sampler(const json& j, std::uint64_t seed) {
  check_keys(j, "sampler",
             {"batch_images", "patches_per_image", "minibatch_size", "flip_probability",
              "sequential_minibatches", "batches_per_epoch"});
  SamplerConfig s;
  s.seed = seed;
  if (j.contains("batch_images")) s.batch_images = get_count(j.at("batch_images"), "batch_images");
  if (j.contains("patches_per_image"))
    s.patches_per_image = get_count(j.at("patches_per_image"), "patches_per_image");
  if (j.contains("minibatch_size")) s.minibatch_size = get_count(j.at("minibatch_size"), "minibatch_size");
  s.flip_probability = get_opt(j, "flip_probability", s.flip_probability);
  if (j.contains("sequential_minibatches")) {
    if (!j.at("sequential_minibatches").is_boolean())
      throw ValidationError("sampler: sequential_minibatches must be a boolean");
    s.sequential_minibatches = j.at("sequential_minibatches").get<bool>();
  }
  if (j.contains("batches_per_epoch"))
    s.batches_per_epoch = get_count(j.at("batches_per_epoch"), "batches_per_epoch");
  if (s.flip_probability < 0 || s.flip_probability > 1)
    throw ValidationError("sampler: flip_probability must lie in [0, 1]");
  return s;
}

json sampler_json(const SamplerConfig& s) {
  return {{"batch_images", s.batch_images},
          {"patches_per_image", s.patches_per_image},
          {"minibatch_size", s.minibatch_size},
          {"flip_probability", s.flip_probability},
          {"sequential_minibatches", s.sequential_minibatches},
          {"batches_per_epoch", s.batches_per_epoch}};
}

GaussianSpec parse_gaussian(const json& j) {
  check_keys(j, "gaussian", {"mean", "cov"});
  GaussianSpec g;
  if (j.contains("mean")) {
    const json& m = j.at("mean");
    if (!m.is_array() || m.size() != 2) throw ValidationError("gaussian: mean must have 2 entries");
    g.mean[0] = get_number(m[0], "gaussian mean");
    g.mean[1] = get_number(m[1], "gaussian mean");
  }
  if (j.contains("cov")) {
    const json& c = j.at("cov");
    if (!c.is_array() || c.size() != 2 || !c[0].is_array() || c[0].size() != 2 ||
        !c[1].is_array() || c[1].size() != 2)
      throw ValidationError("gaussian: cov must be a 2x2 matrix");
    for (int r = 0; r < 2; ++r)
      for (int cc = 0; cc < 2; ++cc) g.cov[r][cc] = get_number(c[r][cc], "gaussian cov");
  }
  return g;
}

json gaussian_json(const GaussianSpec& g) {
  return {{"mean", {g.mean[0], g.mean[1]}},
          {"cov", {{g.cov[0][0], g.cov[0][1]}, {g.cov[1][0], g.cov[1][1]}}}};
}

DataSettings parse_data(const json& j, std::uint64_t seed) {
  check_keys(j, "data",
             {"source", "corpus", "pair_count", "batch_size", "heldout_count", "gaussian",
              "patch_size", "channels", "sampler"});
  DataSettings d;
  if (!j.contains("source")) throw ValidationError("data: missing \"source\"");
  std::string src = get_string(j.at("source"), "data source");
  if (src == "synthetic_pairs")
    d.source = DataSource::kSyntheticPairs;
  else if (src == "corpus_pairs")
    d.source = DataSource::kCorpusPairs;
  else if (src == "patches")
    d.source = DataSource::kPatches;
  else
    throw ValidationError("data: unknown source \"" + src + "\"");

  auto reject = [&](const char* key, const char* why) {
    if (j.contains(key)) throw ValidationError(std::string("data: \"") + key + "\" " + why);
  };
  if (d.source == DataSource::kSyntheticPairs) reject("corpus", "does not apply to synthetic_pairs");
  if (d.source != DataSource::kSyntheticPairs) reject("gaussian", "applies only to synthetic_pairs");
  if (d.source != DataSource::kPatches) {
    reject("sampler", "applies only to the patches source");
    reject("patch_size", "applies only to the patches source");
    reject("channels", "applies only to the patches source");
  }

  if (j.contains("corpus")) d.corpus = get_string(j.at("corpus"), "data corpus");
  if (j.contains("pair_count")) d.pair_count = get_count(j.at("pair_count"), "pair_count");
  if (j.contains("batch_size")) d.batch_size = get_count(j.at("batch_size"), "batch_size");
  if (j.contains("heldout_count")) d.heldout_count = get_count(j.at("heldout_count"), "heldout_count");
  if (j.contains("gaussian")) d.gaussian = parse_gaussian(j.at("gaussian"));
  if (j.contains("patch_size")) d.patch_size = static_cast<int>(get_count(j.at("patch_size"), "patch_size"));
  if (j.contains("channels")) d.channels = static_cast<int>(get_count(j.at("channels"), "channels"));
  if (j.contains("sampler")) d.sampler = parse_sampler(j.at("sampler"), seed);
  d.sampler.seed = seed;
  if (d.patch_size < 1) throw ValidationError("data: patch_size must be positive");
  if (d.channels != 1 && d.channels != 3) throw ValidationError("data: channels must be 1 or 3");
  if (d.source != DataSource::kSyntheticPairs && d.corpus.empty())
    throw ValidationError("data: corpus required for this source");
  return d;
}

json data_json(const DataSettings& d) {
  json out;
  switch (d.source) {
    case DataSource::kSyntheticPairs:
      out = {{"source", "synthetic_pairs"},
             {"pair_count", d.pair_count},
             {"batch_size", d.batch_size},
             {"heldout_count", d.heldout_count},
             {"gaussian", gaussian_json(d.gaussian)}};
      break;
    case DataSource::kCorpusPairs:
      out = {{"source", "corpus_pairs"},
             {"corpus", d.corpus},
             {"pair_count", d.pair_count},
             {"batch_size", d.batch_size},
             {"heldout_count", d.heldout_count}};
      break;
    case DataSource::kPatches:
      out = {{"source", "patches"},
             {"corpus", d.corpus},
             {"patch_size", d.patch_size},
             {"channels", d.channels},
             {"heldout_count", d.heldout_count},
             {"sampler", sampler_json(d.sampler)}};
      if (d.pair_count > 0) out["pair_count"] = d.pair_count;
      if (d.batch_size > 0) out["batch_size"] = d.batch_size;
      break;
  }
  return out;
}

void require_layers(const ModelSpec& m, std::initializer_list<std::size_t> sizes, Activation head,
                    const char* what) {
  // sizes = {in, hidden..., out}
  bool ok = m.layers.size() + 1 == sizes.size();
  if (ok) {
    auto it = sizes.begin();
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      ok = ok && m.layers[l].in == *it;
      ++it;
      ok = ok && m.layers[l].out == *it;
    }
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) ok = ok && m.layers[l].act == Activation::kRelu;
    ok = ok && m.layers.back().act == head;
  }
  if (!ok) throw ValidationError(std::string("model does not match the ") + what + " recipe shape");
}

}  // namespace

void RecipeConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(scale_factor > 0.0) || scale_factor > 1.0)
    throw ValidationError("scale_factor must lie in (0, 1]");
  if (model_count < 1) throw ValidationError("model_count must be positive");
  model.validate();
  std::size_t p2 = static_cast<std::size_t>(data.patch_size) * data.patch_size;
  switch (recipe) {
    case Recipe::kTwoPixelOod:
      if (model_count != 1) throw ValidationError("two_pixel_ood uses a single model");
      if (loss.kind != LossKind::kOod) throw ValidationError("two_pixel_ood requires the ood loss");
      require_layers(model, {2, 200, 100, model.output_dim()}, Activation::kSoftmax, "two_pixel_ood");
      if (data.source == DataSource::kPatches)
        throw ValidationError("two_pixel_ood trains on pixel pairs, not patches");
      break;
    case Recipe::kTwoPixelMiod:
      if (model_count < 2) throw ValidationError("two_pixel_miod needs at least two output dimensions");
      if (loss.kind != LossKind::kMiod) throw ValidationError("two_pixel_miod requires the miod loss");
      require_layers(model, {2, 200, 100, model.output_dim()}, Activation::kSoftmax, "two_pixel_miod");
      if (data.source == DataSource::kPatches)
        throw ValidationError("two_pixel_miod trains on pixel pairs, not patches");
      break;
    case Recipe::kPatchGray:
      if (model_count != 1) throw ValidationError("patch_gray uses a single model");
      if (loss.kind != LossKind::kRepel) throw ValidationError("patch_gray requires the repel loss");
      if (data.channels != 1) throw ValidationError("patch_gray expects channels = 1");
      require_layers(model, {p2, 100, 64}, Activation::kSigmoid, "patch_gray");
      if (data.source != DataSource::kPatches) throw ValidationError("patch_gray trains on patches");
      break;
    case Recipe::kPatchColor:
      if (model_count != 96) throw ValidationError("patch_color uses 96 single-output models");
      if (loss.kind != LossKind::kRepel || loss.repel.mode != RepelMode::kNodeWise)
        throw ValidationError("patch_color requires the node_wise repel loss");
      if (data.channels != 3) throw ValidationError("patch_color expects channels = 3");
      require_layers(model, {3 * p2, 48, 1}, Activation::kSigmoid, "patch_color");
      if (data.source != DataSource::kPatches) throw ValidationError("patch_color trains on patches");
      break;
    case Recipe::kDecoder:
      if (model_count != 1) throw ValidationError("decoder uses a single model");
      if (loss.kind != LossKind::kSquaredError)
        throw ValidationError("decoder requires the squared_error loss");
      if (encoder_weights.empty()) throw ValidationError("decoder requires encoder_weights");
      if (data.source != DataSource::kPatches) throw ValidationError("decoder trains on patches");
      if (model.output_dim() != p2 * static_cast<std::size_t>(data.channels))
        throw ValidationError("decoder output must match the patch size");
      if (model.layers.back().act == Activation::kSoftmax || model.layers.back().act == Activation::kRelu)
        throw ValidationError("decoder head must be sigmoid or linear");
      break;
  }
}

RecipeConfig parse_recipe_config(const json& j) {
  check_keys(j, "config",
             {"recipe", "seed", "epochs", "scale_factor", "model", "model_count", "loss",
              "optimizer", "data", "encoder_weights"});
  RecipeConfig cfg;
  if (!j.contains("recipe")) throw ValidationError("config: missing \"recipe\"");
  cfg.recipe = recipe_from_name(get_string(j.at("recipe"), "recipe"));
  if (j.contains("seed")) cfg.seed = get_count(j.at("seed"), "seed");
  if (j.contains("epochs")) cfg.epochs = static_cast<int>(get_int(j.at("epochs"), "epochs"));
  cfg.scale_factor = get_opt(j, "scale_factor", 1.0);
  if (!j.contains("model")) throw ValidationError("config: missing \"model\"");
  cfg.model = parse_model_spec(j.at("model"));
  if (j.contains("model_count"))
    cfg.model_count = static_cast<int>(get_count(j.at("model_count"), "model_count"));
  if (!j.contains("loss")) throw ValidationError("config: missing \"loss\"");
  cfg.loss = parse_loss(j.at("loss"));
  cfg.optimizer = j.contains("optimizer") ? parse_optimizer(j.at("optimizer")) : OptimizerSettings{};
  if (!j.contains("data")) throw ValidationError("config: missing \"data\"");
  cfg.data = parse_data(j.at("data"), cfg.seed);
  if (j.contains("encoder_weights")) {
    const json& ew = j.at("encoder_weights");
    if (!ew.is_array()) throw ValidationError("encoder_weights must be an array of paths");
    for (const json& p : ew) cfg.encoder_weights.push_back(get_string(p, "encoder_weights entry"));
  }
  cfg.validate();
  return cfg;
}

json recipe_config_json(const RecipeConfig& cfg) {
  json out{{"recipe", recipe_name(cfg.recipe)},
           {"seed", cfg.seed},
           {"epochs", cfg.epochs},
           {"scale_factor", cfg.scale_factor},
           {"model", model_spec_json(cfg.model)},
           {"model_count", cfg.model_count},
           {"loss", loss_json(cfg.loss)},
           {"optimizer", optimizer_json(cfg.optimizer)},
           {"data", data_json(cfg.data)}};
  if (!cfg.encoder_weights.empty()) out["encoder_weights"] = cfg.encoder_weights;
  return out;
}

json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config parse error in " + path + ": " + e.what());
  }
}

void apply_override(json& root, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override must look like path.to.key=value: " + assignment);
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // bare words become strings
  }
  json* cur = &root;
  std::size_t pos = 0;
  for (;;) {
    auto dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ValidationError("override has an empty path segment: " + assignment);
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    if (!cur->contains(key) || !(*cur)[key].is_object()) (*cur)[key] = json::object();
    cur = &(*cur)[key];
    pos = dot + 1;
  }
}

RecipeConfig load_recipe_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = load_json(path);
  for (const std::string& o : overrides) apply_override(j, o);
  return parse_recipe_config(j);
}

std::uint64_t scaled_count(std::uint64_t x, double scale) {
  double v = static_cast<double>(x) * scale;
  auto r = static_cast<std::uint64_t>(std::llround(v));
  return r < 1 ? 1 : r;
}

}  // namespace ipu
