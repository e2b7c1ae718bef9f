#pragma once

#include "ipu/common.hpp"
#include "ipu/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ipu {

enum class Activation : std::uint8_t {
  kRelu = 0,
  kSoftmax = 1,
  kSigmoid = 2,
  kLinear = 3,
};

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::kLinear;
};

struct ModelSpec {
  std::vector<LayerSpec> layers;

  /// Checks dimension chaining and that softmax appears only on the last layer.
  void validate() const;
  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
};

template <typename T>
struct Layer {
  RowMatrix<T> w;  // out x in
  ColVector<T> b;  // out
  Activation act = Activation::kLinear;
};

template <typename T>
struct Gradients {
  std::vector<RowMatrix<T>> dw;
  std::vector<ColVector<T>> db;
};

/// Dense feedforward network. Batches are row-per-sample matrices; layer l maps
/// S x in to S x out via act(x W^T + b).
template <typename T>
class Mlp {
 public:
  /// All-zero parameters.
  explicit Mlp(const ModelSpec& spec);

  /// Xavier-uniform weights, zero biases. The draw order is fixed (layer,
  /// row, column), so one seed gives one bit-exact model. `salt`
  /// distinguishes sibling models trained side by side.
  static Mlp init(const ModelSpec& spec, std::uint64_t seed, std::uint64_t salt = 0);

  const ModelSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.input_dim(); }
  std::size_t output_dim() const { return spec_.output_dim(); }
  std::size_t layer_count() const { return layers_.size(); }
  std::vector<Layer<T>>& layers() { return layers_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  RowMatrix<T> forward(const RowMatrix<T>& x) const;

  /// Forward keeping every layer's post-activation; acts[0] is the input and
  /// acts[L] the output.
  struct Cache {
    std::vector<RowMatrix<T>> acts;
  };
  const RowMatrix<T>& forward_cached(const RowMatrix<T>& x, Cache& cache) const;

  /// Reverse-mode gradients for d(loss)/d(output) = out_grad. ReLU gets
  /// subgradient 0 at 0.
  Gradients<T> backward(const Cache& cache, const RowMatrix<T>& out_grad) const;

  template <typename U>
  Mlp<U> cast() const {
    Mlp<U> out(spec_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].w = layers_[l].w.template cast<U>();
      out.layers()[l].b = layers_[l].b.template cast<U>();
    }
    return out;
  }

 private:
  ModelSpec spec_;
  std::vector<Layer<T>> layers_;
};

/// Binary weights format: magic "IPUW", u32 LE version=1, u32 LE layer count,
/// then per layer u32 LE in, u32 LE out, u8 activation code, f32 LE weights
/// row-major [out][in], f32 LE biases. Stored precision is always f32.
void save_weights(const Mlp<float>& model, const std::string& path);
Mlp<float> load_weights(const std::string& path);
void serialize_weights(const Mlp<float>& model, std::ostream& os);
Mlp<float> deserialize_weights(std::istream& is);

/// FNV-1a over the serialized weight bytes.
std::uint64_t weights_hash(const Mlp<float>& model);

extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace ipu
