#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gcrl/error.hpp"

namespace gcrl {

enum class Activation { relu, identity };

enum class Architecture { simple3x256, residual4blocks };

inline const char* to_string(Architecture arch) {
  return arch == Architecture::simple3x256 ? "simple3x256" : "residual4blocks";
}

inline Architecture parse_architecture(const std::string& name) {
  if (name == "simple3x256") return Architecture::simple3x256;
  if (name == "residual4blocks") return Architecture::residual4blocks;
  throw ContractViolation("unknown architecture '" + name + "'");
}

struct NetworkShape {
  Architecture arch = Architecture::simple3x256;
  std::size_t input_width = 0;
  std::size_t output_width = 0;
  std::size_t hidden_width = 256;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// A run of `depth` dense layers of equal `width`. When `residual` is set the
/// stage input is added to the output of its last layer, which requires the
/// stage input width to equal `width`.
struct StageSpec {
  std::size_t width = 0;
  std::size_t depth = 1;
  bool residual = false;
  Activation activation = Activation::relu;
};

inline std::vector<StageSpec> stages_for(const NetworkShape& shape) {
  const std::size_t h = shape.hidden_width;
  std::vector<StageSpec> stages;
  switch (shape.arch) {
    case Architecture::simple3x256:
      for (int i = 0; i < 3; ++i) stages.push_back({h, 1, false, Activation::relu});
      break;
    case Architecture::residual4blocks:
      // input projection to the residual width, then four 4-layer blocks
      stages.push_back({h, 1, false, Activation::relu});
      for (int i = 0; i < 4; ++i) stages.push_back({h, 4, true, Activation::relu});
      break;
  }
  stages.push_back({shape.output_width, 1, false, Activation::identity});
  return stages;
}

// Eigen picks its vector kernels from the buffer address, so an unaligned
// heap block can change float rounding from one run to the next.
template <class T>
using ParamVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense feed-forward network over a single flat parameter vector.
///
/// Parameters are laid out layer by layer as W (out x in, column-major)
/// followed by b (out). Batches are row-major [B x width]; internally
/// activations are column-major [width x B] so every layer is one GEMM.
template <class T>
class BasicQNetwork {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Batch = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::relu;
    std::size_t offset = 0;  // start of W; b follows at offset + in*out
  };

  struct Stage {
    std::size_t first = 0;
    std::size_t count = 0;
    bool residual = false;
  };

  BasicQNetwork() = default;

  explicit BasicQNetwork(const NetworkShape& shape, std::uint64_t init_seed = 0)
      : BasicQNetwork(shape.input_width, stages_for(shape), init_seed) {
    shape_ = shape;
  }

  BasicQNetwork(std::size_t input_width, const std::vector<StageSpec>& stages, std::uint64_t init_seed = 0)
      : input_width_(input_width) {
    require(input_width > 0, "network input width must be positive");
    require(!stages.empty(), "network needs at least one stage");
    std::size_t width = input_width;
    std::size_t offset = 0;
    for (const StageSpec& spec : stages) {
      require(spec.width > 0 && spec.depth > 0, "stage width and depth must be positive");
      require(!spec.residual || spec.width == width, "residual stage must preserve width");
      stages_.push_back({layers_.size(), spec.depth, spec.residual});
      for (std::size_t d = 0; d < spec.depth; ++d) {
        layers_.push_back({width, spec.width, spec.activation, offset});
        offset += width * spec.width + spec.width;
        width = spec.width;
      }
    }
    output_width_ = width;
    params_.assign(offset, T(0));
    initialize(init_seed);
  }

  /// Kaiming-uniform in fan-in mode with the a = sqrt(5) gain (bound
  /// 1/sqrt(fan_in), the usual Linear default); biases start at zero.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const Layer& layer : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      T* w = params_.data() + layer.offset;
      for (std::size_t i = 0; i < layer.in * layer.out; ++i) w[i] = static_cast<T>(dist(rng));
      std::fill_n(w + layer.in * layer.out, layer.out, T(0));
    }
    cache_valid_ = false;
  }

  std::size_t input_width() const noexcept { return input_width_; }
  std::size_t output_width() const noexcept { return output_width_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const std::optional<NetworkShape>& shape() const noexcept { return shape_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const std::vector<Stage>& stages() const noexcept { return stages_; }

  std::span<T> parameters() noexcept {
    cache_valid_ = false;
    return params_;
  }
  std::span<const T> parameters() const noexcept { return params_; }

  Eigen::Map<Matrix> weights(std::size_t layer) {
    const Layer& l = layers_.at(layer);
    return {params_.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
  }
  Eigen::Map<const Matrix> weights(std::size_t layer) const {
    const Layer& l = layers_.at(layer);
    return {params_.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
  }
  Eigen::Map<Vector> bias(std::size_t layer) {
    const Layer& l = layers_.at(layer);
    return {params_.data() + l.offset + l.in * l.out, static_cast<Eigen::Index>(l.out)};
  }
  Eigen::Map<const Vector> bias(std::size_t layer) const {
    const Layer& l = layers_.at(layer);
    return {params_.data() + l.offset + l.in * l.out, static_cast<Eigen::Index>(l.out)};
  }

  /// Forward pass that keeps the activations needed by backward().
  Batch forward(const Batch& batch) {
    check_input(batch);
    inputs_.resize(layers_.size());
    outputs_.resize(layers_.size());
    Matrix a = run(batch.transpose(), &inputs_, &outputs_);
    cached_batch_ = static_cast<std::size_t>(batch.rows());
    cache_valid_ = true;
    return a.transpose();
  }

  /// Forward pass without caching; safe on a const network.
  Batch predict(const Batch& batch) const {
    check_input(batch);
    Matrix a = run(batch.transpose(), nullptr, nullptr);
    return a.transpose();
  }

  std::vector<T> predict_one(std::span<const float> input) const {
    require(input.size() == input_width_, "predict_one: input width mismatch");
    Matrix a(static_cast<Eigen::Index>(input_width_), 1);
    for (std::size_t i = 0; i < input.size(); ++i) a(static_cast<Eigen::Index>(i), 0) = static_cast<T>(input[i]);
    Matrix out = run(a, nullptr, nullptr);
    return std::vector<T>(out.data(), out.data() + out.size());
  }

  /// dLoss/dParameters for the batch given to the last forward(), where
  /// `loss_grad` is dLoss/dOutput [B x output_width].
  ParamVector<T> backward(const Batch& loss_grad) const {
    require(cache_valid_, "backward called without a cached forward pass");
    require(static_cast<std::size_t>(loss_grad.rows()) == cached_batch_ &&
                static_cast<std::size_t>(loss_grad.cols()) == output_width_,
            "backward: loss gradient shape does not match cached forward pass");
    ParamVector<T> grad(params_.size(), T(0));
    Matrix g = loss_grad.transpose();
    for (std::size_t s = stages_.size(); s-- > 0;) {
      const Stage& stage = stages_[s];
      Matrix skip;
      if (stage.residual) skip = g;
      for (std::size_t k = stage.first + stage.count; k-- > stage.first;) {
        const Layer& layer = layers_[k];
        if (layer.activation == Activation::relu)
          g = g.cwiseProduct((outputs_[k].array() > T(0)).template cast<T>().matrix());
        Eigen::Map<Matrix> dw(grad.data() + layer.offset, static_cast<Eigen::Index>(layer.out),
                              static_cast<Eigen::Index>(layer.in));
        Eigen::Map<Vector> db(grad.data() + layer.offset + layer.in * layer.out,
                              static_cast<Eigen::Index>(layer.out));
        dw.noalias() = g * inputs_[k].transpose();
        db = g.rowwise().sum();
        if (k > 0) {
          Matrix next = weights(k).transpose() * g;
          g.swap(next);
        }
      }
      if (stage.residual) g += skip;
    }
    return grad;
  }

  void copy_parameters_from(const BasicQNetwork& other) {
    require(other.params_.size() == params_.size(), "copy_parameters_from: parameter count mismatch");
    params_ = other.params_;
    cache_valid_ = false;
  }

  /// Writes the checkpoint: one descriptor line, then the parameters as
  /// little-endian float32.
  void save(const std::filesystem::path& path) const {
    require(shape_.has_value(), "only fixed-architecture networks can be checkpointed");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    out << "gcrl-qnetwork arch=" << to_string(shape_->arch) << " input_width=" << shape_->input_width
        << " output_width=" << shape_->output_width << " hidden_width=" << shape_->hidden_width
        << " params=" << params_.size() << '\n';
    for (T p : params_) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(p));
      const unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                      static_cast<unsigned char>(bits >> 16),
                                      static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(bytes), 4);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
  }

  static BasicQNetwork load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream fields(header);
    std::string magic;
    fields >> magic;
    if (magic != "gcrl-qnetwork") throw std::runtime_error("not a gcrl checkpoint: " + path.string());
    NetworkShape shape;
    std::size_t count = 0;
    std::string token;
    while (fields >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "arch") shape.arch = parse_architecture(value);
      else if (key == "input_width") shape.input_width = std::stoul(value);
      else if (key == "output_width") shape.output_width = std::stoul(value);
      else if (key == "hidden_width") shape.hidden_width = std::stoul(value);
      else if (key == "params") count = std::stoul(value);
    }
    BasicQNetwork net(shape);
    if (count != net.parameter_count())
      throw std::runtime_error("checkpoint parameter count does not match its architecture: " + path.string());
    for (T& p : net.params_) {
      unsigned char bytes[4];
      in.read(reinterpret_cast<char*>(bytes), 4);
      const std::uint32_t bits = std::uint32_t(bytes[0]) | std::uint32_t(bytes[1]) << 8 |
                                 std::uint32_t(bytes[2]) << 16 | std::uint32_t(bytes[3]) << 24;
      p = static_cast<T>(std::bit_cast<float>(bits));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
    return net;
  }

 private:
  void check_input(const Batch& batch) const {
    require(static_cast<std::size_t>(batch.cols()) == input_width_, "forward: batch width != input width");
    require(batch.rows() > 0, "forward: empty batch");
  }

  template <class Input>
  Matrix run(const Input& x, std::vector<Matrix>* inputs, std::vector<Matrix>* outputs) const {
    Matrix a = x;
    for (const Stage& stage : stages_) {
      Matrix stage_in;
      if (stage.residual) stage_in = a;
      for (std::size_t k = stage.first; k < stage.first + stage.count; ++k) {
        const Layer& layer = layers_[k];
        Matrix z(static_cast<Eigen::Index>(layer.out), a.cols());
        z.noalias() = weights(k) * a;
        z.colwise() += bias(k);
        if (layer.activation == Activation::relu) z = z.cwiseMax(T(0));
        if (inputs) (*inputs)[k] = std::move(a);
        if (outputs) (*outputs)[k] = z;
        a = std::move(z);
      }
      if (stage.residual) a += stage_in;
    }
    return a;
  }

  std::size_t input_width_ = 0;
  std::size_t output_width_ = 0;
  std::optional<NetworkShape> shape_;
  std::vector<Layer> layers_;
  std::vector<Stage> stages_;
  ParamVector<T> params_;

  std::vector<Matrix> inputs_;
  std::vector<Matrix> outputs_;
  std::size_t cached_batch_ = 0;
  bool cache_valid_ = false;
};

using QNetwork = BasicQNetwork<float>;

}  // namespace gcrl
