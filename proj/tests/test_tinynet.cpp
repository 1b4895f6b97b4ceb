#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "jade/tinynet.hpp"

using namespace jade;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_input(int dim, Rng& rng) {
  std::vector<double> x(dim);
  for (auto& v : x) v = rng.uniform(-2.0, 2.0);
  return x;
}

// Smallest |pre-activation| across hidden neurons. Finite differences
// straddling a relu kink produce O(1) error, so inputs too close to one are
// resampled.
double kink_margin(const MlpModel& m, const std::vector<double>& x) {
  double margin = 1e300;
  std::vector<double> act = x;
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    std::vector<double> next(layer.out);
    for (int i = 0; i < layer.out; ++i) {
      double z = layer.b[i];
      for (int j = 0; j < layer.in; ++j) z += layer.w[i * layer.in + j] * act[j];
      margin = std::min(margin, std::fabs(z));
      next[i] = z > 0 ? z : 0.0;
    }
    act = std::move(next);
  }
  return margin;
}

// central finite differences over every parameter
Gradients fd_gradients(MlpModel model, const std::vector<double>& x,
                       const std::function<double(const std::vector<double>&)>& loss_of_output,
                       double eps = 1e-5) {
  Gradients fd = zero_gradients(model);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto probe = [&](std::vector<double>& params, std::vector<double>& out,
                     std::size_t i) {
      const double keep = params[i];
      params[i] = keep + eps;
      const double up = loss_of_output(forward(model, x));
      params[i] = keep - eps;
      const double dn = loss_of_output(forward(model, x));
      params[i] = keep;
      out[i] = (up - dn) / (2 * eps);
    };
    for (std::size_t i = 0; i < model.layers[l].w.size(); ++i)
      probe(model.layers[l].w, fd.layers[l].w, i);
    for (std::size_t i = 0; i < model.layers[l].b.size(); ++i)
      probe(model.layers[l].b, fd.layers[l].b, i);
  }
  return fd;
}

void check_close(const Gradients& analytic, const Gradients& fd, double rel = 1e-4,
                 double abs_floor = 1e-6) {
  for (std::size_t l = 0; l < analytic.layers.size(); ++l) {
    auto cmp = [&](const std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double tol = abs_floor + rel * std::max(std::fabs(a[i]), std::fabs(b[i]));
        CHECK(std::fabs(a[i] - b[i]) <= tol);
      }
    };
    cmp(analytic.layers[l].w, fd.layers[l].w);
    cmp(analytic.layers[l].b, fd.layers[l].b);
  }
}

}  // namespace

TEST_CASE("init is deterministic and counts parameters") {
  MlpSpec small{4, {}, 1, Head::Linear};
  CHECK(mlp_init(small, 7).param_count() == 5);

  MlpSpec paper_shape{21, {128, 128, 128}, 1, Head::Linear};
  const std::size_t expect = 21 * 128 + 128 + 2 * (128 * 128 + 128) + 128 + 1;
  CHECK(mlp_init(paper_shape, 7).param_count() == expect);

  const auto a = mlp_init(paper_shape, 42);
  const auto b = mlp_init(paper_shape, 42);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].w == b.layers[l].w);
    CHECK(a.layers[l].b == b.layers[l].b);
  }
  const auto c = mlp_init(paper_shape, 43);
  CHECK(a.layers[0].w != c.layers[0].w);
}

TEST_CASE("forward basics") {
  SUBCASE("zero-weight linear model returns zero") {
    MlpModel m = mlp_init({3, {4}, 1, Head::Linear}, 1);
    for (auto& layer : m.layers)
      for (auto& w : layer.w) w = 0;
    CHECK(forward(m, {1.0, -2.0, 3.0})[0] == 0.0);
  }

  SUBCASE("zero-weight softmax model is uniform") {
    MlpModel m = mlp_init({3, {4}, 5, Head::Softmax}, 1);
    for (auto& layer : m.layers)
      for (auto& w : layer.w) w = 0;
    const auto p = forward(m, {1.0, -2.0, 3.0});
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }

  SUBCASE("softmax outputs are a distribution") {
    Rng rng(5);
    MlpModel m = mlp_init({7, {16}, 6, Head::Softmax}, 2);
    for (int n = 0; n < 20; ++n) {
      const auto p = forward(m, random_input(7, rng));
      double sum = 0;
      for (double v : p) {
        CHECK(v > 0);
        sum += v;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }

  SUBCASE("softmax is invariant to a constant logit shift") {
    MlpModel m = mlp_init({4, {}, 3, Head::Softmax}, 3);
    const std::vector<double> x{0.5, -1.0, 2.0, 0.1};
    const auto p = forward(m, x);
    MlpModel shifted = m;
    for (auto& b : shifted.layers.back().b) b += 7.5;
    const auto q = forward(shifted, x);
    for (std::size_t k = 0; k < p.size(); ++k)
      CHECK(p[k] == doctest::Approx(q[k]).epsilon(1e-12));
  }

  SUBCASE("non-finite input rejected") {
    MlpModel m = mlp_init({2, {}, 1, Head::Linear}, 1);
    CHECK_THROWS_AS(forward(m, {1.0, std::nan("")}), Error);
    CHECK_THROWS_AS(forward(m, {1.0}), Error);  // shape
  }
}

TEST_CASE("backward matches calculus identities") {
  SUBCASE("zero output gradient gives zero parameter gradients") {
    Rng rng(9);
    MlpModel m = mlp_init({5, {8, 8}, 3, Head::Softmax}, 4);
    ForwardCache cache;
    forward(m, random_input(5, rng), &cache);
    const auto g = backward(m, cache, {0, 0, 0});
    for (const auto& layer : g.layers) {
      for (double v : layer.w) CHECK(v == 0);
      for (double v : layer.b) CHECK(v == 0);
    }
  }

  SUBCASE("single linear layer: dL/dW = g x^T, dL/db = g") {
    MlpModel m = mlp_init({3, {}, 2, Head::Linear}, 5);
    const std::vector<double> x{1.0, 2.0, -0.5};
    ForwardCache cache;
    forward(m, x, &cache);
    const std::vector<double> g{0.7, -1.3};
    const auto grads = backward(m, cache, g);
    for (int i = 0; i < 2; ++i) {
      CHECK(grads.layers[0].b[i] == g[i]);
      for (int j = 0; j < 3; ++j) CHECK(grads.layers[0].w[i * 3 + j] == g[i] * x[j]);
    }
  }
}

TEST_CASE("gradient check against central finite differences") {
  Rng rng(31);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const int in = 2 + static_cast<int>(rng.below(6));
    const int h1 = 2 + static_cast<int>(rng.below(6));
    const int out = trial % 2 == 0 ? 1 : 3;
    MlpSpec spec{in, {h1}, out, trial % 2 == 0 ? Head::Linear : Head::Softmax};
    if (trial % 3 == 0) spec.hidden.push_back(2 + static_cast<int>(rng.below(4)));
    MlpModel m = mlp_init(spec, 100 + trial);

    for (int rep = 0; rep < 9; ++rep) {
      auto x = random_input(in, rng);
      while (kink_margin(m, x) < 1e-3) x = random_input(in, rng);
      std::vector<double> gout(out);
      for (auto& v : gout) v = rng.uniform(-1.5, 1.5);
      auto loss_of_output = [&](const std::vector<double>& y) {
        double s = 0;
        for (int k = 0; k < out; ++k) s += gout[k] * y[k];
        return s;
      };
      ForwardCache cache;
      forward(m, x, &cache);
      const auto analytic = backward(m, cache, gout);
      const auto fd = fd_gradients(m, x, loss_of_output);
      check_close(analytic, fd);
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("adam updates") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-2;

  SUBCASE("zero gradients leave parameters unchanged") {
    MlpModel m = mlp_init({2, {3}, 1, Head::Linear}, 6);
    const auto before = m.layers;
    adam_step(m, zero_gradients(m), cfg);
    for (std::size_t l = 0; l < m.layers.size(); ++l) CHECK(m.layers[l].w == before[l].w);
    CHECK(m.adam_t == 1);
  }

  SUBCASE("first step magnitude is about the learning rate") {
    MlpModel m = mlp_init({1, {}, 1, Head::Linear}, 7);
    Gradients g = zero_gradients(m);
    g.layers[0].w[0] = 3.7;  // |g| >> epsilon
    const double w0 = m.layers[0].w[0];
    adam_step(m, g, cfg);
    CHECK(m.layers[0].w[0] == doctest::Approx(w0 - cfg.learning_rate).epsilon(1e-6));
  }

  SUBCASE("constant gradient walks parameters against its sign") {
    MlpModel m = mlp_init({1, {}, 1, Head::Linear}, 8);
    Gradients g = zero_gradients(m);
    g.layers[0].w[0] = -0.5;
    const double w0 = m.layers[0].w[0];
    for (int i = 0; i < 50; ++i) adam_step(m, g, cfg);
    CHECK(m.layers[0].w[0] > w0);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto path = (fs::temp_directory_path() / "jade_tinynet_ckpt.json").string();
  Rng rng(77);
  MlpModel m = mlp_init({6, {10, 10}, 2, Head::Softmax}, 9);
  // dirty the optimizer state
  AdamConfig cfg;
  for (int i = 0; i < 3; ++i) {
    ForwardCache cache;
    forward(m, random_input(6, rng), &cache);
    adam_step(m, backward(m, cache, {0.3, -0.2}), cfg);
  }
  save_model(m, path);
  const MlpModel loaded = load_model(path, m.spec);

  SUBCASE("bit-identical forward outputs") {
    for (int n = 0; n < 10; ++n) {
      const auto x = random_input(6, rng);
      CHECK(forward(m, x) == forward(loaded, x));
    }
  }

  SUBCASE("wrong spec rejected") {
    CHECK_THROWS_AS(load_model(path, MlpSpec{6, {10}, 2, Head::Softmax}), Error);
  }

  SUBCASE("training continues exactly from the saved trajectory") {
    auto train_step = [&cfg](MlpModel& model, int step) {
      Rng data_rng(1000 + step);  // fixed data order
      std::vector<double> x(6);
      for (auto& v : x) v = data_rng.uniform(-1.0, 1.0);
      const double target = x[0] - 2.0 * x[1];
      ForwardCache cache;
      const auto y = forward(model, x, &cache);
      const double err0 = y[0] - target;
      adam_step(model, backward(model, cache, {2 * err0, 0}), cfg);
      return err0 * err0;
    };
    MlpModel uninterrupted = m;
    MlpModel resumed = loaded;
    double a = 0, b = 0;
    for (int step = 0; step < 5; ++step) {
      a = train_step(uninterrupted, step);
      b = train_step(resumed, step);
    }
    CHECK(a == b);
  }
}

TEST_CASE("training trajectories are bit-identical under a fixed seed") {
  auto run = [] {
    MlpModel m = mlp_init({4, {8}, 1, Head::Linear}, 55);
    AdamConfig cfg;
    cfg.learning_rate = 1e-3;
    Rng rng(123);
    for (int i = 0; i < 40; ++i) {
      std::vector<double> x(4);
      for (auto& v : x) v = rng.uniform(-1.0, 1.0);
      ForwardCache cache;
      const auto y = forward(m, x, &cache);
      adam_step(m, backward(m, cache, {y[0] - x[0]}), cfg);
    }
    return m;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].w == b.layers[l].w);
    CHECK(a.layers[l].b == b.layers[l].b);
  }
}
