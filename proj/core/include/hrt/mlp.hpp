#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hrt {

// Per-layer nonlinearity. softmax_group3 normalizes each consecutive group of
// 3 outputs to a probability triple (the 3-way direction head).
enum class Activation : std::uint8_t {
  identity = 0,
  relu = 1,
  tanh = 2,
  softmax_group3 = 3,
};

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Dense feed-forward net over a flat parameter vector. Layout per layer:
// weights row-major [out][in], then biases [out]. Weights start Glorot
// uniform, biases zero, both drawn deterministically from the seed.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations, std::uint64_t seed);

  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  bool same_architecture(const Mlp& other) const {
    return layer_sizes_ == other.layer_sizes_ && activations_ == other.activations_;
  }

  // Post-activation values per layer, kept for backprop. activ[0] is the
  // input copy, activ.back() the network output.
  struct Tape {
    std::vector<std::vector<double>> activ;
  };

  std::vector<double> forward(std::span<const double> x) const;
  // Hot-path variant: reuses the tape's buffers, returns a view of the output.
  std::span<const double> forward(std::span<const double> x, Tape& tape) const;

  // Accumulates d(grad_out . output)/d(params) into param_grad (same length
  // as params) and, when input_grad is non-null, d/d(input) into it
  // (overwritten, length = input_size).
  void backward(const Tape& tape, std::span<const double> grad_out, std::span<double> param_grad,
                std::vector<double>* input_grad = nullptr) const;

 private:
  std::vector<int> layer_sizes_;
  std::vector<Activation> activations_;
  std::vector<double> params_;
  std::uint64_t seed_ = 0;
};

// target <- tau * source + (1 - tau) * target, element-wise.
void soft_update(Mlp& target, const Mlp& source, double tau);

// Binary layout (all little-endian): magic "MLPB", u32 version, u32 n_sizes,
// u32 sizes[], u8 activation tags[], u64 seed, f64 params[]. A JSON sidecar
// with the same metadata is written next to it as <path>.json.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace hrt
