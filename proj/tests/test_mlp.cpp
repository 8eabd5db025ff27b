#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "hrt/error.hpp"
#include "hrt/mlp.hpp"
#include "hrt/optim.hpp"
#include "hrt/rng.hpp"

using namespace hrt;

namespace {

// Independent reference evaluation: plain loops over the same parameter
// layout, written separately from Mlp::forward.
std::vector<double> reference_forward(const Mlp& net, const std::vector<double>& x) {
  std::vector<double> h = x;
  std::size_t p = 0;
  const auto& sizes = net.layer_sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in_w = sizes[l], out_w = sizes[l + 1];
    std::vector<double> z(out_w, 0.0);
    for (int j = 0; j < out_w; ++j) {
      double acc = 0;
      for (int i = 0; i < in_w; ++i) acc += net.params()[p + j * in_w + i] * h[i];
      z[j] = acc + net.params()[p + static_cast<std::size_t>(out_w) * in_w + j];
    }
    switch (net.activations()[l]) {
      case Activation::identity:
        break;
      case Activation::relu:
        for (double& v : z) v = std::max(0.0, v);
        break;
      case Activation::tanh:
        for (double& v : z) v = std::tanh(v);
        break;
      case Activation::softmax_group3:
        for (std::size_t g = 0; g < z.size(); g += 3) {
          double m = std::max({z[g], z[g + 1], z[g + 2]});
          double s = 0;
          for (int k = 0; k < 3; ++k) s += std::exp(z[g + k] - m);
          for (int k = 0; k < 3; ++k) z[g + k] = std::exp(z[g + k] - m) / s;
        }
        break;
    }
    h = z;
    p += static_cast<std::size_t>(out_w) * (in_w + 1);
  }
  return h;
}

double directional_loss(const Mlp& net, const std::vector<double>& x, const std::vector<double>& g) {
  const std::vector<double> y = net.forward(x);
  double loss = 0;
  for (std::size_t i = 0; i < y.size(); ++i) loss += g[i] * y[i];
  return loss;
}

// Central finite differences against backward() on `probes` random parameters.
double max_grad_rel_error(Mlp& net, Rng& rng, int probes) {
  std::vector<double> x(net.input_size());
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  std::vector<double> g(net.output_size());
  for (double& v : g) v = rng.uniform(-1.0, 1.0);

  Mlp::Tape tape;
  net.forward(x, tape);
  std::vector<double> analytic(net.param_count(), 0.0);
  std::vector<double> input_grad;
  net.backward(tape, g, analytic, &input_grad);

  const double h = 1e-5;
  double worst = 0;
  for (int k = 0; k < probes; ++k) {
    const std::size_t p = rng.uniform_index(net.param_count());
    const double saved = net.params()[p];
    net.params()[p] = saved + h;
    const double up = directional_loss(net, x, g);
    net.params()[p] = saved - h;
    const double down = directional_loss(net, x, g);
    net.params()[p] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::fabs(numeric), std::fabs(analytic[p]), 1e-8});
    worst = std::max(worst, std::fabs(numeric - analytic[p]) / scale);
  }

  // Input gradient probes through the same loss.
  for (int k = 0; k < probes / 4 + 1; ++k) {
    const std::size_t i = rng.uniform_index(x.size());
    const double saved = x[i];
    x[i] = saved + h;
    const double up = directional_loss(net, x, g);
    x[i] = saved - h;
    const double down = directional_loss(net, x, g);
    x[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::fabs(numeric), std::fabs(input_grad[i]), 1e-8});
    worst = std::max(worst, std::fabs(numeric - input_grad[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter count follows the (fan_in+1)*fan_out formula") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n_layers = 2 + static_cast<int>(rng.uniform_index(4));
    std::vector<int> sizes;
    std::vector<Activation> acts;
    for (int l = 0; l < n_layers; ++l) sizes.push_back(1 + static_cast<int>(rng.uniform_index(12)));
    for (int l = 0; l + 1 < n_layers; ++l) acts.push_back(Activation::tanh);
    const Mlp net(sizes, acts, trial);
    std::size_t expected = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      expected += static_cast<std::size_t>(sizes[l] + 1) * sizes[l + 1];
    CHECK(net.param_count() == expected);
  }
}

TEST_CASE("forward: identity net reproduces its input") {
  Mlp net({3, 3}, {Activation::identity}, 0);
  std::fill(net.params().begin(), net.params().end(), 0.0);
  for (int j = 0; j < 3; ++j) net.params()[j * 3 + j] = 1.0;  // W = I, b = 0
  const std::vector<double> x{0.5, -1.25, 2.0};
  CHECK(net.forward(x) == x);
}

TEST_CASE("forward: zero weights yield activation(bias)") {
  Mlp net({2, 3}, {Activation::tanh}, 0);
  std::fill(net.params().begin(), net.params().end(), 0.0);
  net.params()[6] = 0.3;
  net.params()[7] = -0.8;
  net.params()[8] = 1.5;
  const std::vector<double> y = net.forward(std::vector<double>{4.0, -2.0});
  CHECK(y[0] == doctest::Approx(std::tanh(0.3)));
  CHECK(y[1] == doctest::Approx(std::tanh(-0.8)));
  CHECK(y[2] == doctest::Approx(std::tanh(1.5)));
}

TEST_CASE("forward matches an independent reference evaluation") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp net({4, 7, 6}, {Activation::tanh, Activation::softmax_group3}, 40 + trial);
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const std::vector<double> got = net.forward(x);
    const std::vector<double> expected = reference_forward(net, x);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward rejects a wrong input width") {
  const Mlp net({3, 2}, {Activation::identity}, 0);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradient") {
  Mlp net({3, 5, 2}, {Activation::tanh, Activation::identity}, 1);
  Mlp::Tape tape;
  net.forward(std::vector<double>{0.1, 0.2, 0.3}, tape);
  std::vector<double> grad(net.param_count(), 0.0);
  net.backward(tape, std::vector<double>{0.0, 0.0}, grad);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("backward: scalar linear net has gradient x") {
  Mlp net({1, 1}, {Activation::identity}, 0);
  net.params()[0] = 1.7;  // weight
  net.params()[1] = 0.0;  // bias
  Mlp::Tape tape;
  net.forward(std::vector<double>{3.25}, tape);
  std::vector<double> grad(2, 0.0);
  net.backward(tape, std::vector<double>{1.0}, grad);
  CHECK(grad[0] == doctest::Approx(3.25));  // d(wx)/dw = x
  CHECK(grad[1] == doctest::Approx(1.0));   // bias grad
}

TEST_CASE("backward agrees with central finite differences") {
  Rng rng(29);
  SUBCASE("tanh/identity 3-layer") {
    Mlp net({5, 16, 8, 3}, {Activation::tanh, Activation::tanh, Activation::identity}, 5);
    CHECK(max_grad_rel_error(net, rng, 100) < 1e-4);
  }
  SUBCASE("relu hidden") {
    Mlp net({4, 12, 2}, {Activation::relu, Activation::identity}, 6);
    CHECK(max_grad_rel_error(net, rng, 100) < 1e-4);
  }
  SUBCASE("softmax head") {
    Mlp net({6, 10, 9}, {Activation::tanh, Activation::softmax_group3}, 7);
    CHECK(max_grad_rel_error(net, rng, 100) < 1e-4);
  }
}

TEST_CASE("initialization is deterministic in the seed") {
  const Mlp a({4, 8, 2}, {Activation::tanh, Activation::identity}, 123);
  const Mlp b({4, 8, 2}, {Activation::tanh, Activation::identity}, 123);
  const Mlp c({4, 8, 2}, {Activation::tanh, Activation::identity}, 124);
  CHECK(a.params() == b.params());
  CHECK_FALSE(a.params() == c.params());
  // finite outputs straight after init
  for (double v : a.forward(std::vector<double>{1e3, -1e3, 0.0, 2.5})) CHECK(std::isfinite(v));
}

TEST_CASE("AdamW") {
  SUBCASE("zero gradient and zero decay is a fixed point") {
    Mlp net({2, 2}, {Activation::identity}, 3);
    const std::vector<double> before = net.params();
    AdamW opt({.learning_rate = 0.1}, net.param_count());
    opt.step(net.params(), std::vector<double>(net.param_count(), 0.0));
    CHECK(net.params() == before);
  }

  SUBCASE("single step on a scalar matches the closed form") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.1;
    const double p0 = 2.0, g = 0.5;
    std::vector<double> p{p0};
    AdamW opt({lr, b1, b2, eps, wd}, 1);
    opt.step(p, std::vector<double>{g});
    const double m_hat = ((1 - b1) * g) / (1 - b1);  // == g after bias correction
    const double v_hat = ((1 - b2) * g * g) / (1 - b2);
    const double expected = p0 - lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * p0);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
  }

  SUBCASE("updates are deterministic") {
    Mlp a({3, 4, 1}, {Activation::tanh, Activation::identity}, 9);
    Mlp b = a;
    AdamW oa({.learning_rate = 1e-3}, a.param_count());
    AdamW ob({.learning_rate = 1e-3}, b.param_count());
    Rng rng(5);
    std::vector<double> grad(a.param_count());
    for (double& g : grad) g = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < 10; ++k) {
      oa.step(a.params(), grad);
      ob.step(b.params(), grad);
    }
    CHECK(a.params() == b.params());
  }

  SUBCASE("non-finite gradients are rejected") {
    std::vector<double> p{1.0};
    AdamW opt({.learning_rate = 0.1}, 1);
    CHECK_THROWS_AS(opt.step(p, std::vector<double>{std::nan("")}), Error);
    CHECK_THROWS_AS(opt.step(p, std::vector<double>{0.0, 1.0}), Error);  // shape
  }
}

TEST_CASE("clip_global_norm") {
  std::vector<double> g{3.0, 4.0};  // norm 5
  const double norm = clip_global_norm(g, 0.5);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(std::hypot(g[0], g[1]) == doctest::Approx(0.5));
  std::vector<double> small{0.1, 0.1};
  clip_global_norm(small, 0.5);
  CHECK(small[0] == doctest::Approx(0.1));  // untouched below the cap
}

TEST_CASE("soft_update") {
  SUBCASE("tau = 1 copies the source") {
    Mlp target({2, 3, 1}, {Activation::tanh, Activation::identity}, 1);
    const Mlp source({2, 3, 1}, {Activation::tanh, Activation::identity}, 2);
    soft_update(target, source, 1.0);
    CHECK(target.params() == source.params());
  }

  SUBCASE("tau = 0.005 on scalars: 1 blends toward 3 as 1.01") {
    Mlp target({1, 1}, {Activation::identity}, 0);
    Mlp source({1, 1}, {Activation::identity}, 0);
    target.params() = {1.0, 0.0};
    source.params() = {3.0, 0.0};
    soft_update(target, source, 0.005);
    CHECK(target.params()[0] == doctest::Approx(1.01).epsilon(1e-15));
  }

  SUBCASE("repeated updates converge geometrically to the source") {
    Mlp target({1, 1}, {Activation::identity}, 0);
    Mlp source({1, 1}, {Activation::identity}, 0);
    target.params() = {10.0, 0.0};
    source.params() = {4.0, 0.0};
    const double tau = 0.1;
    for (int k = 1; k <= 20; ++k) {
      soft_update(target, source, tau);
      const double expected = 4.0 + std::pow(1.0 - tau, k) * (10.0 - 4.0);
      CHECK(target.params()[0] == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  SUBCASE("architecture mismatch is rejected") {
    Mlp target({2, 2}, {Activation::identity}, 0);
    const Mlp source({2, 3}, {Activation::identity}, 0);
    CHECK_THROWS_AS(soft_update(target, source, 0.5), Error);
  }
}

TEST_CASE("MLP checkpoint round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "net.mlpb").string();
  const Mlp net({4, 8, 6}, {Activation::tanh, Activation::softmax_group3}, 77);
  save_mlp(net, path);
  const Mlp loaded = load_mlp(path);
  CHECK(loaded.layer_sizes() == net.layer_sizes());
  CHECK(loaded.activations() == net.activations());
  CHECK(loaded.seed() == net.seed());
  CHECK(loaded.params() == net.params());
  CHECK(std::filesystem::exists(path + ".json"));

  SUBCASE("unknown version is rejected") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }();
    bytes[4] = 9;  // version field
    std::ofstream(path, std::ios::binary) << bytes;
    try {
      load_mlp(path);
      FAIL("expected VersionError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::version_error);
    }
  }
}
