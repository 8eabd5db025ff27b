#include "hrt/mlp.hpp"

#include <cmath>
#include <filesystem>

#include "json.hpp"

#include "hrt/binio.hpp"
#include "hrt/error.hpp"
#include "hrt/rng.hpp"

namespace hrt {

namespace {

constexpr std::uint32_t kMlpMagic = 0x42504c4d;  // "MLPB"
constexpr std::uint32_t kMlpVersion = 1;

void apply_activation(Activation act, std::vector<double>& v) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      for (double& x : v) x = x > 0 ? x : 0.0;
      return;
    case Activation::tanh:
      for (double& x : v) x = std::tanh(x);
      return;
    case Activation::softmax_group3: {
      if (v.size() % 3 != 0) throw Error(Errc::shape_mismatch, "softmax_group3 needs output width % 3 == 0");
      for (std::size_t g = 0; g < v.size(); g += 3) {
        double m = std::max(v[g], std::max(v[g + 1], v[g + 2]));
        double e0 = std::exp(v[g] - m), e1 = std::exp(v[g + 1] - m), e2 = std::exp(v[g + 2] - m);
        double z = e0 + e1 + e2;
        v[g] = e0 / z;
        v[g + 1] = e1 / z;
        v[g + 2] = e2 / z;
      }
      return;
    }
  }
}

// Converts grad wrt post-activation into grad wrt pre-activation, in place,
// using only the post-activation values y.
void activation_backward(Activation act, const std::vector<double>& y, std::vector<double>& g) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] <= 0) g[i] = 0;
      return;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      return;
    case Activation::softmax_group3:
      for (std::size_t b = 0; b < g.size(); b += 3) {
        double dot = g[b] * y[b] + g[b + 1] * y[b + 1] + g[b + 2] * y[b + 2];
        for (int j = 0; j < 3; ++j) g[b + j] = y[b + j] * (g[b + j] - dot);
      }
      return;
  }
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softmax_group3: return "softmax_group3";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  for (Activation a : {Activation::identity, Activation::relu, Activation::tanh, Activation::softmax_group3})
    if (name == activation_name(a)) return a;
  throw Error(Errc::io_error, "unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations, std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)), activations_(std::move(activations)), seed_(seed) {
  if (layer_sizes_.size() < 2) throw Error(Errc::shape_mismatch, "need at least input and output layer");
  if (activations_.size() != layer_sizes_.size() - 1)
    throw Error(Errc::shape_mismatch, "one activation tag per layer transition");
  for (int w : layer_sizes_)
    if (w < 1) throw Error(Errc::shape_mismatch, "layer width must be >= 1");

  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l)
    count += static_cast<std::size_t>(layer_sizes_[l] + 1) * layer_sizes_[l + 1];
  params_.assign(count, 0.0);

  Rng rng(seed);
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const int fan_in = layer_sizes_[l];
    const int fan_out = layer_sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (int j = 0; j < fan_out * fan_in; ++j) params_[p++] = rng.uniform(-limit, limit);
    p += fan_out;  // biases stay zero
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape tape;
  auto out = forward(x, tape);
  return {out.begin(), out.end()};
}

std::span<const double> Mlp::forward(std::span<const double> x, Tape& tape) const {
  if (static_cast<int>(x.size()) != input_size())
    throw Error(Errc::shape_mismatch, "input length " + std::to_string(x.size()) + " != " +
                                          std::to_string(input_size()));
  const std::size_t n_layers = layer_sizes_.size();
  tape.activ.resize(n_layers);
  tape.activ[0].assign(x.begin(), x.end());

  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    const int in_w = layer_sizes_[l];
    const int out_w = layer_sizes_[l + 1];
    const std::vector<double>& in = tape.activ[l];
    std::vector<double>& out = tape.activ[l + 1];
    out.resize(out_w);
    const double* w = params_.data() + p;
    const double* b = w + static_cast<std::size_t>(out_w) * in_w;
    for (int j = 0; j < out_w; ++j) {
      const double* wj = w + static_cast<std::size_t>(j) * in_w;
      double acc = b[j];
      for (int i = 0; i < in_w; ++i) acc += wj[i] * in[i];
      out[j] = acc;
    }
    apply_activation(activations_[l], out);
    p += static_cast<std::size_t>(out_w) * (in_w + 1);
  }
  return tape.activ.back();
}

void Mlp::backward(const Tape& tape, std::span<const double> grad_out, std::span<double> param_grad,
                   std::vector<double>* input_grad) const {
  if (tape.activ.size() != layer_sizes_.size()) throw Error(Errc::shape_mismatch, "tape does not match network");
  if (static_cast<int>(grad_out.size()) != output_size())
    throw Error(Errc::shape_mismatch, "grad_out length != output width");
  if (param_grad.size() != params_.size()) throw Error(Errc::shape_mismatch, "param_grad length != param count");

  std::vector<double> g(grad_out.begin(), grad_out.end());
  std::vector<double> g_prev;

  // Offsets of each layer's block in the flat parameter vector.
  std::vector<std::size_t> offsets(layer_sizes_.size() - 1);
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    offsets[l] = p;
    p += static_cast<std::size_t>(layer_sizes_[l] + 1) * layer_sizes_[l + 1];
  }

  for (std::size_t l = layer_sizes_.size() - 1; l-- > 0;) {
    const int in_w = layer_sizes_[l];
    const int out_w = layer_sizes_[l + 1];
    activation_backward(activations_[l], tape.activ[l + 1], g);

    const std::vector<double>& in = tape.activ[l];
    double* dw = param_grad.data() + offsets[l];
    double* db = dw + static_cast<std::size_t>(out_w) * in_w;
    for (int j = 0; j < out_w; ++j) {
      const double gj = g[j];
      if (gj != 0.0) {
        double* dwj = dw + static_cast<std::size_t>(j) * in_w;
        for (int i = 0; i < in_w; ++i) dwj[i] += gj * in[i];
      }
      db[j] += gj;
    }

    const bool need_input = l > 0 || input_grad != nullptr;
    if (need_input) {
      const double* w = params_.data() + offsets[l];
      g_prev.assign(in_w, 0.0);
      for (int j = 0; j < out_w; ++j) {
        const double gj = g[j];
        if (gj == 0.0) continue;
        const double* wj = w + static_cast<std::size_t>(j) * in_w;
        for (int i = 0; i < in_w; ++i) g_prev[i] += wj[i] * gj;
      }
      g.swap(g_prev);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(g);
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_architecture(source))
    throw Error(Errc::architecture_mismatch, "soft_update across different architectures");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(Errc::invalid_spec, "tau must be in (0, 1]");
  auto& t = target.params();
  const auto& s = source.params();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
}

void save_mlp(const Mlp& net, const std::string& path) {
  BinWriter w;
  w.u32(kMlpMagic);
  w.u32(kMlpVersion);
  w.u32(static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (int s : net.layer_sizes()) w.u32(static_cast<std::uint32_t>(s));
  for (Activation a : net.activations()) w.u8(static_cast<std::uint8_t>(a));
  w.u64(net.seed());
  for (double v : net.params()) w.f64(v);
  write_file_bytes(path, w.buffer());

  nlohmann::json meta;
  meta["layer_sizes"] = net.layer_sizes();
  meta["activations"] = nlohmann::json::array();
  for (Activation a : net.activations()) meta["activations"].push_back(activation_name(a));
  meta["seed"] = net.seed();
  meta["param_count"] = net.param_count();
  meta["format"] = "MLPB v1, little-endian f64";
  write_file_bytes(path + ".json", meta.dump(2) + "\n");
}

Mlp load_mlp(const std::string& path) {
  BinReader r(read_file_bytes(path));
  if (r.u32() != kMlpMagic) throw Error(Errc::io_error, path + ": not an MLPB file");
  const std::uint32_t version = r.u32();
  if (version != kMlpVersion)
    throw Error(Errc::version_error, path + ": MLPB version " + std::to_string(version));
  const std::uint32_t n_sizes = r.u32();
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(r.u32());
  std::vector<Activation> acts(n_sizes - 1);
  for (auto& a : acts) a = static_cast<Activation>(r.u8());
  const std::uint64_t seed = r.u64();
  Mlp net(sizes, acts, seed);
  for (double& v : net.params()) v = r.f64();
  return net;
}

}  // namespace hrt
