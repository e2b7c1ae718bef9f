#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipu/analysis.hpp"
#include "ipu/codes.hpp"
#include "ipu/common.hpp"
#include "ipu/config.hpp"
#include "ipu/csv.hpp"
#include "ipu/discrete.hpp"
#include "ipu/gradcheck.hpp"
#include "ipu/image.hpp"
#include "ipu/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string out_dir = ".";
  int threads = 0;  // 0 = IPU_THREADS env, then hardware
};

fs::path prepare_out(const GlobalOpts& g) {
  fs::path out(g.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ipu::IoError("cannot create output directory: " + out.string());
  return out;
}

std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_run_json(const fs::path& out, const std::string& subcommand, json args) {
  json run{{"subcommand", subcommand}, {"timestamp", timestamp_utc()}, {"args", std::move(args)}};
  std::ofstream f(out / "run.json", std::ios::binary);
  if (!f) throw ipu::IoError("cannot write run.json");
  f << run.dump(2) << '\n';
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ipu::IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::vector<ipu::Mlp<float>> load_models(const std::vector<std::string>& paths) {
  ipu::require(!paths.empty(), "at least one --weights file is required");
  std::vector<ipu::Mlp<float>> models;
  for (const std::string& p : paths) models.push_back(ipu::load_weights(p));
  return models;
}

ipu::Image map_to_image(const ipu::MatrixF& map) {
  ipu::Image img = ipu::make_image(static_cast<int>(map.cols()), static_cast<int>(map.rows()), 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float v = map(y, x);
      long r = std::lround(255.0 * static_cast<double>(v));
      img.at(x, y) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
    }
  return img;
}

std::vector<double> read_distribution_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ipu::IoError("cannot open distribution: " + path);
  std::vector<double> p;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("index", 0) == 0) continue;  // optional header
    }
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ipu::ValidationError("distribution line is not index,value: " + line);
    p.push_back(std::stod(line.substr(comma + 1)));
  }
  if (p.empty()) throw ipu::ValidationError("distribution file is empty: " + path);
  return p;
}

// oracle: closed-form toy analysis, or an optimal-partition search over a
// distribution supplied as CSV.
struct OracleOpts {
  GlobalOpts g;
  std::uint64_t toy_m = 100000;
  std::size_t curve_points = 200;
  std::string dist_path;
  std::size_t states = 2;
  std::string objective = "min_hq";
};

void run_oracle(const OracleOpts& o) {
  fs::path out = prepare_out(o.g);
  if (!o.dist_path.empty()) {
    std::vector<double> p = read_distribution_csv(o.dist_path);
    ipu::PartitionObjective obj = o.objective == "max_hq" ? ipu::PartitionObjective::kMaxHQ
                                                         : ipu::PartitionObjective::kMinHq;
    if (o.objective != "max_hq" && o.objective != "min_hq")
      throw ipu::ValidationError("--objective must be max_hq or min_hq");
    ipu::Partition part = ipu::best_contiguous_partition(p, o.states, obj);
    std::vector<double> q = ipu::push_forward(p, part);
    json result{{"boundaries", part.boundaries()},
                {"group_sizes", part.group_sizes()},
                {"output_entropy", ipu::entropy(q)},
                {"hq_grouped", ipu::hq_grouped(q, part)},
                {"kl", ipu::kl_p_q(p, part)}};
    write_json_file(out / "partition.json", result);
    write_run_json(out, "oracle",
                   json{{"dist", o.dist_path}, {"states", o.states}, {"objective", o.objective}});
    std::cout << "objective=" << o.objective << " boundaries=" << json(part.boundaries()).dump()
              << " H_Q=" << ipu::num_cell(ipu::entropy(q))
              << " H_q=" << ipu::num_cell(ipu::hq_grouped(q, part)) << '\n';
    return;
  }
  ipu::ToyExampleResult toy = ipu::toy_example(o.toy_m, o.curve_points);
  std::vector<double> rs, hq;
  for (auto& [r, v] : toy.hq_curve) {
    rs.push_back(r);
    hq.push_back(v);
  }
  ipu::write_curve_csv((out / "toy_curve.csv").string(), "r,hq_minus_logM", rs, hq);
  double ratio = static_cast<double>(toy.a_modeling) / static_cast<double>(o.toy_m);
  json result{{"M", o.toy_m},
              {"a_transmission", toy.a_transmission},
              {"a_modeling", toy.a_modeling},
              {"a_modeling_over_M", ratio}};
  write_json_file(out / "toy.json", result);
  write_run_json(out, "oracle", json{{"toy_M", o.toy_m}, {"curve_points", o.curve_points}});
  std::cout << "a_transmission=" << toy.a_transmission << " a_modeling=" << toy.a_modeling
            << " a_modeling_over_M=" << ipu::num_cell(ratio) << '\n';
}

struct TrainOpts {
  GlobalOpts g;
  std::string config;
  std::vector<std::string> sets;
};

void run_train(const TrainOpts& o) {
  fs::path out = prepare_out(o.g);
  ipu::RecipeConfig cfg = ipu::load_recipe_config(o.config, o.sets);
  ipu::TrainResult result = ipu::train(cfg);

  std::vector<std::string> weight_paths;
  if (result.models.size() == 1) {
    std::string p = (out / "weights.ipuw").string();
    ipu::save_weights(result.models[0], p);
    weight_paths.push_back(p);
  } else {
    for (std::size_t d = 0; d < result.models.size(); ++d) {
      char name[32];
      std::snprintf(name, sizeof(name), "weights_%03zu.ipuw", d);
      std::string p = (out / name).string();
      ipu::save_weights(result.models[d], p);
      weight_paths.push_back(p);
    }
  }

  std::vector<double> epochs(result.report.epoch_loss.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) epochs[i] = static_cast<double>(i);
  ipu::write_curve_csv((out / "epoch_loss.csv").string(), "epoch,loss", epochs,
                       result.report.epoch_loss);

  json report{{"epoch_loss", result.report.epoch_loss},
              {"epoch_lr", result.report.epoch_lr},
              {"wall_seconds", result.report.wall_seconds},
              {"weights_hash", result.report.weights_hash},
              {"weights", weight_paths},
              {"config", result.report.config_echo}};
  write_json_file(out / "report.json", report);
  write_run_json(out, "train", json{{"config", o.config}, {"set", o.sets}});
  std::cout << "weights_hash=" << result.report.weights_hash;
  if (!result.report.epoch_loss.empty())
    std::cout << " final_loss=" << ipu::num_cell(result.report.epoch_loss.back());
  std::cout << '\n';
}

struct StatsOpts {
  GlobalOpts g;
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> weights;
};

void run_stats(const StatsOpts& o) {
  fs::path out = prepare_out(o.g);
  ipu::RecipeConfig cfg = ipu::load_recipe_config(o.config, o.sets);
  std::vector<ipu::Mlp<float>> models = load_models(o.weights);
  json stats;

  if (cfg.data.source == ipu::DataSource::kPatches) {
    std::vector<ipu::Image> corpus = ipu::load_corpus(cfg.data.corpus);
    ipu::MatrixF x = ipu::heldout_patches(cfg, corpus);
    ipu::MatrixF y = ipu::forward_joint(models, x);
    ipu::OutputStats st = ipu::output_stats(y);
    ipu::write_histogram_csv((out / "histogram.csv").string(), st.histogram);
    ipu::write_node_prob_csv((out / "activation.csv").string(), st.activation_prob);
    std::vector<double> counts(st.active_count_histogram.begin(), st.active_count_histogram.end());
    ipu::write_indexed_csv((out / "active_count.csv").string(), counts);
    ipu::BinaryCodeSet codes = ipu::build_code_set(y);
    double pmin = *std::min_element(st.activation_prob.begin(), st.activation_prob.end());
    double pmax = *std::max_element(st.activation_prob.begin(), st.activation_prob.end());
    stats = json{{"samples", y.rows()},
                 {"near_binary_fraction", st.near_binary_fraction},
                 {"mean_active", st.mean_active},
                 {"activation_min", pmin},
                 {"activation_max", pmax},
                 {"activation_ratio", pmin > 0 ? pmax / pmin : 0.0},
                 {"distinct_codes", codes.distinct()}};
    std::cout << "near_binary=" << ipu::num_cell(st.near_binary_fraction)
              << " mean_active=" << ipu::num_cell(st.mean_active)
              << " distinct_codes=" << codes.distinct() << '\n';
  } else {
    std::vector<ipu::Image> corpus;
    if (cfg.data.source == ipu::DataSource::kCorpusPairs) corpus = ipu::load_corpus(cfg.data.corpus);
    ipu::MatrixF x = ipu::heldout_pairs(cfg, corpus.empty() ? nullptr : &corpus);
    json dims = json::array();
    for (std::size_t d = 0; d < models.size(); ++d) {
      ipu::MatrixF y = models[d].forward(x);
      std::vector<double> prob(static_cast<std::size_t>(y.cols()), 0.0);
      for (Eigen::Index s = 0; s < y.rows(); ++s) {
        int best = 0;
        for (Eigen::Index j = 1; j < y.cols(); ++j)
          if (y(s, j) > y(s, best)) best = static_cast<int>(j);
        prob[static_cast<std::size_t>(best)] += 1.0;
      }
      for (double& v : prob) v /= static_cast<double>(y.rows());
      char name[32];
      std::snprintf(name, sizeof(name), "states_%zu.csv", d);
      ipu::write_indexed_csv((out / name).string(), prob);
      dims.push_back(json{{"entropy", ipu::entropy(prob)},
                          {"min_prob", *std::min_element(prob.begin(), prob.end())},
                          {"max_prob", *std::max_element(prob.begin(), prob.end())}});
    }
    stats = json{{"samples", x.rows()}, {"dims", dims}};
    if (models.size() >= 2) {
      ipu::JointIndependence ji =
          ipu::joint_independence(models[0].forward(x), models[1].forward(x));
      stats["tv_distance"] = ji.tv_distance;
      stats["marginal_dev"] = ji.marginal_dev;
    }
    std::cout << "entropy_dim0=" << ipu::num_cell(dims[0]["entropy"].get<double>()) << '\n';
  }
  write_json_file(out / "stats.json", stats);
  write_run_json(out, "stats",
                 json{{"config", o.config}, {"set", o.sets}, {"weights", o.weights}});
}

struct GridOpts {
  GlobalOpts g;
  std::vector<std::string> weights;
  int resolution = 256;
};

void run_grid(const GridOpts& o) {
  fs::path out = prepare_out(o.g);
  std::vector<ipu::Mlp<float>> models = load_models(o.weights);
  ipu::LabelGrid grid = ipu::label_grid(models, o.resolution);
  ipu::write_grid_csv((out / "grid.csv").string(), grid);
  write_run_json(out, "grid", json{{"weights", o.weights}, {"resolution", o.resolution}});
  std::cout << "dims=" << grid.dims;
  for (int d = 0; d < grid.dims; ++d) std::cout << " labels_" << d << "=" << distinct_labels(grid, d);
  std::cout << '\n';
}

struct EncodeOpts {
  GlobalOpts g;
  std::vector<std::string> weights;
  std::string corpus;
  std::uint64_t count = 10000;
  std::uint64_t seed = 1;
  int patch = 4;
  int channels = 1;
};

void run_encode(const EncodeOpts& o) {
  fs::path out = prepare_out(o.g);
  std::vector<ipu::Mlp<float>> models = load_models(o.weights);
  std::vector<ipu::Image> corpus = ipu::load_corpus(o.corpus);
  ipu::Rng rng = ipu::make_rng(o.seed, ipu::Stream::kCorpus);
  ipu::PatchBatch pool = ipu::sample_patch_pool(corpus, o.count, o.patch, o.channels, rng);
  ipu::MatrixF y = ipu::forward_joint(models, pool.values);
  ipu::BinaryCodeSet set = ipu::build_code_set(y);
  set.save((out / "codes.ipuc").string());
  write_json_file(out / "codes.json",
                  json{{"bits", set.bits()}, {"total", set.total()}, {"distinct", set.distinct()}});
  write_run_json(out, "encode",
                 json{{"weights", o.weights},
                      {"corpus", o.corpus},
                      {"count", o.count},
                      {"seed", o.seed},
                      {"patch", o.patch},
                      {"channels", o.channels}});
  std::cout << "total=" << set.total() << " distinct=" << set.distinct() << '\n';
}

struct SearchOpts {
  GlobalOpts g;
  std::string codes;
  std::uint64_t query_index = 0;
  std::size_t k = 1;
};

void run_search(const SearchOpts& o) {
  fs::path out = prepare_out(o.g);
  ipu::BinaryCodeSet set = ipu::BinaryCodeSet::load(o.codes);
  ipu::require(o.query_index < set.distinct(), "--query-index out of range");
  ipu::Code query = set.codes()[o.query_index];
  std::vector<ipu::KnnHit> hits = ipu::knn_hamming(set, query, o.k);
  json list = json::array();
  for (const ipu::KnnHit& h : hits) list.push_back({{"index", h.index}, {"distance", h.distance}});
  write_json_file(out / "knn.json", list);
  write_run_json(out, "search",
                 json{{"codes", o.codes}, {"query_index", o.query_index}, {"k", o.k}});
  for (const ipu::KnnHit& h : hits)
    std::cout << "index=" << h.index << " distance=" << h.distance << '\n';
}

struct FeatmapOpts {
  GlobalOpts g;
  std::vector<std::string> weights;
  std::string image;
  int patch = 4;
  int channels = 1;
  int node = -1;  // all
};

void run_featmap(const FeatmapOpts& o) {
  fs::path out = prepare_out(o.g);
  std::vector<ipu::Mlp<float>> models = load_models(o.weights);
  ipu::Image img = ipu::load_image(o.image);
  int threads = ipu::resolve_threads(o.g.threads);
  ipu::FeatureMapSet maps = ipu::feature_maps(models, img, o.patch, o.channels, threads);
  ipu::require(o.node < static_cast<int>(maps.maps.size()), "--node out of range");
  std::size_t lo = o.node < 0 ? 0 : static_cast<std::size_t>(o.node);
  std::size_t hi = o.node < 0 ? maps.maps.size() : static_cast<std::size_t>(o.node) + 1;
  for (std::size_t n = lo; n < hi; ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "featmap_%03zu.pgm", n);
    ipu::save_image(map_to_image(maps.maps[n]), (out / name).string());
  }
  write_run_json(out, "featmap",
                 json{{"weights", o.weights},
                      {"image", o.image},
                      {"patch", o.patch},
                      {"channels", o.channels},
                      {"node", o.node},
                      {"threads", threads}});
  std::cout << "maps=" << (hi - lo) << " size=" << maps.out_w << "x" << maps.out_h << '\n';
}

struct ProbeOpts {
  GlobalOpts g;
  std::vector<std::string> weights;
  std::string kind = "gray_ramp";
  int width = 512;
  int height = 16;
  int patch = 4;
  int channels = 1;
};

void run_probe(const ProbeOpts& o) {
  fs::path out = prepare_out(o.g);
  std::vector<ipu::Mlp<float>> models = load_models(o.weights);
  ipu::Image probe = ipu::gen_probe(ipu::probe_kind_from_name(o.kind), o.width, o.height);
  ipu::save_image(probe, (out / "probe.ppm").string());
  ipu::ProbeResponse resp = ipu::probe_response(models, probe, o.patch, o.channels);
  ipu::write_probe_csv((out / "probe.csv").string(), resp);
  write_json_file(out / "probe.json", json{{"columns", resp.columns},
                                           {"activated_fraction", resp.activated_fraction},
                                           {"single_segment_fraction", resp.single_segment_fraction},
                                           {"multi_segment_fraction", resp.multi_segment_fraction}});
  write_run_json(out, "probe",
                 json{{"weights", o.weights},
                      {"kind", o.kind},
                      {"width", o.width},
                      {"height", o.height},
                      {"patch", o.patch},
                      {"channels", o.channels}});
  std::cout << "activated=" << ipu::num_cell(resp.activated_fraction)
            << " single_segment=" << ipu::num_cell(resp.single_segment_fraction)
            << " multi_segment=" << ipu::num_cell(resp.multi_segment_fraction) << '\n';
}

struct OccupancyOpts {
  GlobalOpts g;
  std::string codes;
  std::size_t anchors = 16;
  std::uint64_t seed = 1;
};

void run_occupancy(const OccupancyOpts& o) {
  fs::path out = prepare_out(o.g);
  ipu::BinaryCodeSet set = ipu::BinaryCodeSet::load(o.codes);
  std::vector<ipu::OccupancyCurve> curves = ipu::occupancy_stats(set, o.anchors, o.seed);
  ipu::write_occupancy_csv((out / "occupancy.csv").string(), curves);
  write_run_json(out, "occupancy",
                 json{{"codes", o.codes}, {"anchors", o.anchors}, {"seed", o.seed}});
  std::cout << "anchors=" << curves.size() << " bits=" << set.bits() << '\n';
}

struct DecodeOpts {
  GlobalOpts g;
  std::vector<std::string> encoders;
  std::string decoder;
  std::string image;
  int patch = 4;
  int channels = 1;
};

void run_decode(const DecodeOpts& o) {
  fs::path out = prepare_out(o.g);
  std::vector<ipu::Mlp<float>> encoders = load_models(o.encoders);
  ipu::Mlp<float> decoder = ipu::load_weights(o.decoder);
  ipu::Image img = ipu::load_image(o.image);
  ipu::Image local = (o.channels == 1 && img.channels == 3) ? ipu::to_gray(img) : img;
  ipu::Image decoded = ipu::decode_image(encoders, decoder, local, o.patch, o.channels);
  std::string name = o.channels == 1 ? "decoded.pgm" : "decoded.ppm";
  ipu::save_image(decoded, (out / name).string());

  // Reconstruction error in [0,1] units, against a predict-the-mean-tile baseline.
  double se = 0.0;
  std::size_t n = decoded.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    double d = (static_cast<double>(decoded.data[i]) - static_cast<double>(local.data[i])) / 255.0;
    se += d * d;
  }
  double mse = se / static_cast<double>(n);
  int px = o.patch, tiles_x = local.width / px, tiles_y = local.height / px;
  std::vector<double> mean_tile(static_cast<std::size_t>(px) * px * o.channels, 0.0);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx)
      for (int y = 0; y < px; ++y)
        for (int x = 0; x < px; ++x)
          for (int c = 0; c < o.channels; ++c)
            mean_tile[(static_cast<std::size_t>(y) * px + x) * o.channels + c] +=
                local.at(tx * px + x, ty * px + y, c) / 255.0;
  for (double& v : mean_tile) v /= static_cast<double>(tiles_x) * tiles_y;
  double base_se = 0.0;
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx)
      for (int y = 0; y < px; ++y)
        for (int x = 0; x < px; ++x)
          for (int c = 0; c < o.channels; ++c) {
            double d = local.at(tx * px + x, ty * px + y, c) / 255.0 -
                       mean_tile[(static_cast<std::size_t>(y) * px + x) * o.channels + c];
            base_se += d * d;
          }
  double base_mse = base_se / static_cast<double>(n);
  write_json_file(out / "decode.json", json{{"mse", mse}, {"mean_tile_mse", base_mse}});
  write_run_json(out, "decode",
                 json{{"encoders", o.encoders},
                      {"decoder", o.decoder},
                      {"image", o.image},
                      {"patch", o.patch},
                      {"channels", o.channels}});
  std::cout << "mse=" << ipu::num_cell(mse) << " mean_tile_mse=" << ipu::num_cell(base_mse) << '\n';
}

struct GradcheckOpts {
  GlobalOpts g;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  double tolerance = 1e-3;
};

void run_gradcheck(const GradcheckOpts& o) {
  fs::path out = prepare_out(o.g);
  ipu::LossGradCheck r = ipu::check_loss_gradients(o.trials, o.seed);
  write_json_file(out / "gradcheck.json", json{{"ood", r.ood},
                                               {"miod", r.miod},
                                               {"sample_wise", r.sample_wise},
                                               {"node_wise", r.node_wise},
                                               {"tolerance", o.tolerance}});
  write_run_json(out, "gradcheck", json{{"trials", o.trials}, {"seed", o.seed}});
  std::cout << "ood=" << ipu::num_cell(r.ood) << " miod=" << ipu::num_cell(r.miod)
            << " sample_wise=" << ipu::num_cell(r.sample_wise)
            << " node_wise=" << ipu::num_cell(r.node_wise) << '\n';
  if (r.worst() >= o.tolerance)
    throw ipu::NumericError("gradient check exceeded tolerance: worst relative error " +
                            ipu::num_cell(r.worst()));
}

void add_global(CLI::App* cmd, GlobalOpts& g) {
  cmd->add_option("--out", g.out_dir, "Output directory (created if missing)");
  cmd->add_option("--threads", g.threads, "Worker thread cap; IPU_THREADS env is the fallback");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete even-coding models: training, analysis, and oracles"};
  app.require_subcommand(1);

  OracleOpts oracle;
  auto* c_oracle = app.add_subcommand("oracle", "Closed-form toy analysis and partition search");
  add_global(c_oracle, oracle.g);
  c_oracle->add_option("--toy-M", oracle.toy_m, "Input state count for the linear-decay toy model");
  c_oracle->add_option("--curve-points", oracle.curve_points, "Samples of the H_q curve");
  c_oracle->add_option("--dist", oracle.dist_path, "index,value CSV; switches to partition search");
  c_oracle->add_option("--states", oracle.states, "Group count for partition search");
  c_oracle->add_option("--objective", oracle.objective, "max_hq or min_hq");

  TrainOpts train;
  auto* c_train = app.add_subcommand("train", "Run a training recipe from a JSON config");
  add_global(c_train, train.g);
  c_train->add_option("--config", train.config, "Recipe config path")->required();
  c_train->add_option("--set", train.sets, "Override: dotted.path=json_value");

  StatsOpts stats;
  auto* c_stats = app.add_subcommand("stats", "Held-out output statistics for trained models");
  add_global(c_stats, stats.g);
  c_stats->add_option("--config", stats.config, "Recipe config path")->required();
  c_stats->add_option("--set", stats.sets, "Override: dotted.path=json_value");
  c_stats->add_option("--weights", stats.weights, "Weights file(s)")->required();

  GridOpts grid;
  auto* c_grid = app.add_subcommand("grid", "Argmax-state labels over the unit square");
  add_global(c_grid, grid.g);
  c_grid->add_option("--weights", grid.weights, "Weights file(s)")->required();
  c_grid->add_option("--resolution", grid.resolution, "Grid resolution per axis");

  EncodeOpts encode;
  auto* c_encode = app.add_subcommand("encode", "Sample patches and persist their binary codes");
  add_global(c_encode, encode.g);
  c_encode->add_option("--weights", encode.weights, "Weights file(s)")->required();
  c_encode->add_option("--corpus", encode.corpus, "Corpus manifest")->required();
  c_encode->add_option("--count", encode.count, "Number of patches");
  c_encode->add_option("--seed", encode.seed, "Sampling seed");
  c_encode->add_option("--patch", encode.patch, "Patch side length");
  c_encode->add_option("--channels", encode.channels, "1 or 3");

  SearchOpts search;
  auto* c_search = app.add_subcommand("search", "Hamming k-nearest-neighbor query");
  add_global(c_search, search.g);
  c_search->add_option("--codes", search.codes, "Code set file")->required();
  c_search->add_option("--query-index", search.query_index, "Query entry index");
  c_search->add_option("--k", search.k, "Neighbor count");

  FeatmapOpts featmap;
  auto* c_featmap = app.add_subcommand("featmap", "Stride-1 feature maps as PGM images");
  add_global(c_featmap, featmap.g);
  c_featmap->add_option("--weights", featmap.weights, "Weights file(s)")->required();
  c_featmap->add_option("--image", featmap.image, "PGM/PPM input image")->required();
  c_featmap->add_option("--patch", featmap.patch, "Patch side length");
  c_featmap->add_option("--channels", featmap.channels, "1 or 3");
  c_featmap->add_option("--node", featmap.node, "Node index, or all when omitted");

  ProbeOpts probe;
  auto* c_probe = app.add_subcommand("probe", "Node responses to a luminance or hue probe");
  add_global(c_probe, probe.g);
  c_probe->add_option("--weights", probe.weights, "Weights file(s)")->required();
  c_probe->add_option("--kind", probe.kind, "gray_ramp or hue_spectrum");
  c_probe->add_option("--width", probe.width, "Probe width");
  c_probe->add_option("--height", probe.height, "Probe height");
  c_probe->add_option("--patch", probe.patch, "Patch side length");
  c_probe->add_option("--channels", probe.channels, "1 or 3");

  OccupancyOpts occupancy;
  auto* c_occ = app.add_subcommand("occupancy", "Hamming-ball occupancy curves around anchors");
  add_global(c_occ, occupancy.g);
  c_occ->add_option("--codes", occupancy.codes, "Code set file")->required();
  c_occ->add_option("--anchors", occupancy.anchors, "Anchor count");
  c_occ->add_option("--seed", occupancy.seed, "Anchor-pick seed");

  DecodeOpts decode;
  auto* c_decode = app.add_subcommand("decode", "Reconstruct an image from its binary codes");
  add_global(c_decode, decode.g);
  c_decode->add_option("--encoder", decode.encoders, "Encoder weights file(s)")->required();
  c_decode->add_option("--decoder", decode.decoder, "Decoder weights file")->required();
  c_decode->add_option("--image", decode.image, "Image with dimensions divisible by the patch");
  c_decode->get_option("--image")->required();
  c_decode->add_option("--patch", decode.patch, "Patch side length");
  c_decode->add_option("--channels", decode.channels, "1 or 3");

  GradcheckOpts gradcheck;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of all loss gradients");
  add_global(c_gc, gradcheck.g);
  c_gc->add_option("--trials", gradcheck.trials, "Random batches per loss");
  c_gc->add_option("--seed", gradcheck.seed, "Batch seed");
  c_gc->add_option("--tolerance", gradcheck.tolerance, "Worst allowed relative error");

  try {
    app.parse(argc, argv);
    if (*c_oracle) run_oracle(oracle);
    if (*c_train) run_train(train);
    if (*c_stats) run_stats(stats);
    if (*c_grid) run_grid(grid);
    if (*c_encode) run_encode(encode);
    if (*c_search) run_search(search);
    if (*c_featmap) run_featmap(featmap);
    if (*c_probe) run_probe(probe);
    if (*c_occ) run_occupancy(occupancy);
    if (*c_decode) run_decode(decode);
    if (*c_gc) run_gradcheck(gradcheck);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ipu::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const ipu::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const ipu::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
