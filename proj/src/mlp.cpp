#include "ipu/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ipu {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSoftmax: return "softmax";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kLinear: return "linear";
  }
  throw ValidationError("unknown activation code");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "softmax") return Activation::kSoftmax;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "linear") return Activation::kLinear;
  throw ValidationError("unknown activation: " + name);
}

void ModelSpec::validate() const {
  require(!layers.empty(), "model needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].in >= 1 && layers[l].out >= 1, "layer dims must be positive");
    if (l + 1 < layers.size()) {
      require(layers[l].out == layers[l + 1].in, "layer dimensions must chain");
      require(layers[l].act != Activation::kSoftmax, "softmax allowed only on the last layer");
    }
  }
}

template <typename T>
Mlp<T>::Mlp(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  layers_.reserve(spec_.layers.size());
  for (const LayerSpec& ls : spec_.layers) {
    Layer<T> layer;
    layer.w = RowMatrix<T>::Zero(static_cast<Eigen::Index>(ls.out), static_cast<Eigen::Index>(ls.in));
    layer.b = ColVector<T>::Zero(static_cast<Eigen::Index>(ls.out));
    layer.act = ls.act;
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Mlp<T> Mlp<T>::init(const ModelSpec& spec, std::uint64_t seed, std::uint64_t salt) {
  Mlp<T> model(spec);
  Rng rng(seed, static_cast<std::uint64_t>(Stream::kWeights) + ((salt + 1) << 16));
  for (Layer<T>& layer : model.layers_) {
    double fan_in = static_cast<double>(layer.w.cols());
    double fan_out = static_cast<double>(layer.w.rows());
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
        layer.w(r, c) = static_cast<T>(rng.uniform(-limit, limit));
  }
  return model;
}

template <typename T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Layer<T>& layer : layers_)
    n += static_cast<std::size_t>(layer.w.size()) + static_cast<std::size_t>(layer.b.size());
  return n;
}

namespace {

template <typename T>
void apply_activation(Activation act, RowMatrix<T>& z) {
  switch (act) {
    case Activation::kLinear:
      return;
    case Activation::kRelu:
      z = z.cwiseMax(T(0));
      return;
    case Activation::kSigmoid:
      z = z.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
      return;
    case Activation::kSoftmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        T mx = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - mx).exp().matrix();
        z.row(r) /= z.row(r).sum();
      }
      return;
  }
}

}  // namespace

template <typename T>
RowMatrix<T> Mlp<T>::forward(const RowMatrix<T>& x) const {
  require(static_cast<std::size_t>(x.cols()) == input_dim(), "forward: input width mismatch");
  RowMatrix<T> a = x;
  for (const Layer<T>& layer : layers_) {
    RowMatrix<T> z = a * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    apply_activation(layer.act, z);
    a = std::move(z);
  }
  return a;
}

template <typename T>
const RowMatrix<T>& Mlp<T>::forward_cached(const RowMatrix<T>& x, Cache& cache) const {
  require(static_cast<std::size_t>(x.cols()) == input_dim(), "forward: input width mismatch");
  cache.acts.clear();
  cache.acts.reserve(layers_.size() + 1);
  cache.acts.push_back(x);
  for (const Layer<T>& layer : layers_) {
    RowMatrix<T> z = cache.acts.back() * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    apply_activation(layer.act, z);
    cache.acts.push_back(std::move(z));
  }
  return cache.acts.back();
}

template <typename T>
Gradients<T> Mlp<T>::backward(const Cache& cache, const RowMatrix<T>& out_grad) const {
  require(cache.acts.size() == layers_.size() + 1, "backward: missing forward cache");
  require(out_grad.rows() == cache.acts.back().rows() && out_grad.cols() == cache.acts.back().cols(),
          "backward: output gradient shape mismatch");
  Gradients<T> g;
  g.dw.resize(layers_.size());
  g.db.resize(layers_.size());
  RowMatrix<T> da = out_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer<T>& layer = layers_[l];
    const RowMatrix<T>& a = cache.acts[l + 1];
    RowMatrix<T> dz;
    switch (layer.act) {
      case Activation::kLinear:
        dz = std::move(da);
        break;
      case Activation::kRelu:
        dz = ((a.array() > T(0)).template cast<T>() * da.array()).matrix();
        break;
      case Activation::kSigmoid:
        dz = (da.array() * a.array() * (T(1) - a.array())).matrix();
        break;
      case Activation::kSoftmax: {
        ColVector<T> dot = (da.array() * a.array()).rowwise().sum().matrix();
        dz = (a.array() * (da.array().colwise() - dot.array())).matrix();
        break;
      }
    }
    g.dw[l] = dz.transpose() * cache.acts[l];
    g.db[l] = dz.colwise().sum().transpose();
    if (l > 0) da = dz * layer.w;
  }
  return g;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("weights file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32_array(std::ostream& os, const float* data, std::size_t n) {
  static_assert(sizeof(float) == 4);
  // Little-endian hosts only; x86-64 and aarch64 both qualify.
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

void get_f32_array(std::istream& is, float* data, std::size_t n) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4)))
    throw IoError("weights file truncated");
}

constexpr std::uint32_t kWeightsMagic = 0x57555049;  // "IPUW"

}  // namespace

void serialize_weights(const Mlp<float>& model, std::ostream& os) {
  put_u32(os, kWeightsMagic);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(model.layer_count()));
  for (const Layer<float>& layer : model.layers()) {
    put_u32(os, static_cast<std::uint32_t>(layer.w.cols()));
    put_u32(os, static_cast<std::uint32_t>(layer.w.rows()));
    unsigned char act = static_cast<unsigned char>(layer.act);
    os.write(reinterpret_cast<const char*>(&act), 1);
    put_f32_array(os, layer.w.data(), static_cast<std::size_t>(layer.w.size()));
    put_f32_array(os, layer.b.data(), static_cast<std::size_t>(layer.b.size()));
  }
  if (!os) throw IoError("failed writing weights");
}

Mlp<float> deserialize_weights(std::istream& is) {
  if (get_u32(is) != kWeightsMagic) throw IoError("not a weights file (bad magic)");
  std::uint32_t version = get_u32(is);
  if (version != 1) throw IoError("unsupported weights version");
  std::uint32_t layer_count = get_u32(is);
  if (layer_count == 0 || layer_count > 1024) throw IoError("implausible layer count");
  ModelSpec spec;
  struct Raw {
    std::vector<float> w, b;
  };
  std::vector<Raw> raws;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    std::uint32_t in = get_u32(is);
    std::uint32_t out = get_u32(is);
    unsigned char act = 0;
    if (!is.read(reinterpret_cast<char*>(&act), 1)) throw IoError("weights file truncated");
    if (act > 3) throw IoError("unknown activation code in weights file");
    if (in == 0 || out == 0 || static_cast<std::uint64_t>(in) * out > (1u << 28))
      throw IoError("implausible layer dimensions");
    spec.layers.push_back({in, out, static_cast<Activation>(act)});
    Raw raw;
    raw.w.resize(static_cast<std::size_t>(in) * out);
    raw.b.resize(out);
    get_f32_array(is, raw.w.data(), raw.w.size());
    get_f32_array(is, raw.b.data(), raw.b.size());
    raws.push_back(std::move(raw));
  }
  Mlp<float> model(spec);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    std::memcpy(model.layers()[l].w.data(), raws[l].w.data(), raws[l].w.size() * 4);
    std::memcpy(model.layers()[l].b.data(), raws[l].b.data(), raws[l].b.size() * 4);
  }
  return model;
}

void save_weights(const Mlp<float>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  serialize_weights(model, os);
}

Mlp<float> load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return deserialize_weights(is);
}

std::uint64_t weights_hash(const Mlp<float>& model) {
  std::ostringstream buf(std::ios::binary);
  serialize_weights(model, buf);
  std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

template class Mlp<float>;
template class Mlp<double>;

}  // namespace ipu
