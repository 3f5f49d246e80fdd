#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "phyadv/binary_io.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/nn/model.hpp"
#include "phyadv/nn/optim.hpp"
#include "phyadv/nn/weights_io.hpp"
#include "support/finite_diff.hpp"
#include "support/nn_gradcheck.hpp"

using namespace phyadv;
using namespace phyadv::nn;

namespace {

ModelState identity_dense(std::size_t n) {
  auto m = init_model({{n}, {LayerSpec::dense(n, n)}}, 1);
  m.params[0].weight.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) m.params[0].weight[i * n + i] = 1.0;
  return m;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("phyadv_test_" + name);
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ConfigError);
  CHECK_THROWS_AS(Tensor({2, 0}), ConfigError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK_FALSE(t.has_grad());
  t.zero_grad();
  CHECK(t.grad().size() == 6);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped({4}), ConfigError);
}

TEST_CASE("forward: identity dense, softmax symmetry, energy-norm") {
  auto m = identity_dense(3);
  const auto y = forward(m, Tensor::vector({1, 2, 3}));
  CHECK(y == Tensor::vector({1, 2, 3}));

  auto sm = init_model({{2}, {LayerSpec::softmax()}}, 0);
  const auto p = forward(sm, Tensor::vector({0, 0}));
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  auto en = init_model({{2}, {LayerSpec::energy_norm(2)}}, 0);
  const auto e = forward(en, Tensor::vector({3, 4}));
  CHECK(e[0] == doctest::Approx(3 * std::sqrt(2.0) / 5).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(4 * std::sqrt(2.0) / 5).epsilon(1e-12));
  CHECK((e[0] * e[0] + e[1] * e[1]) / 2 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(forward(m, Tensor::vector({1, 2})), ConfigError);
  CHECK_THROWS_AS(forward(en, Tensor::vector({0, 0})), NumericError);
}

TEST_CASE("inconsistent specs are rejected") {
  CHECK_THROWS_AS(init_model({{4}, {LayerSpec::dense(4, 3), LayerSpec::dense(4, 2)}}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({{2, 5}, {LayerSpec::conv1d(2, 3, 7)}}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({{2, 5}, {LayerSpec::softmax()}}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({{3}, {LayerSpec::energy_norm(4)}}, 1), ConfigError);
}

TEST_CASE("backward: linear layer input gradient is the column sums of W") {
  auto m = init_model({{3}, {LayerSpec::dense(3, 2)}}, 42);
  Tape tape;
  forward(m, Tensor::vector({0.3, -1.0, 2.0}), &tape);
  const auto g = backward(m, tape, Tensor::vector({1, 1}));
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(g.input[j] == doctest::Approx(m.params[0].weight[j] + m.params[0].weight[3 + j]));
}

TEST_CASE("backward: zero loss gradient gives zero gradients; missing tape is a state error") {
  auto m = init_model({{4}, {LayerSpec::dense(4, 5), LayerSpec::relu(), LayerSpec::dense(5, 3)}}, 3);
  Tape tape;
  forward(m, Tensor({2, 4}, 0.7), &tape);
  const auto g = backward(m, tape, Tensor({2, 3}, 0.0));
  for (auto v : g.input.data()) CHECK(v == 0.0);
  for (const auto* t : g.tensors())
    for (auto v : t->data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(backward(m, Tape{}, Tensor({2, 3})), StateError);
}

TEST_CASE("gradient correctness for every layer kind over 10 seeds") {
  for (const auto& c : testing::gradient_cases()) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto r = testing::check_model_gradients(c.spec, seed);
      INFO(c.name << " seed " << seed);
      CHECK(r.input_error < 1e-4);
      CHECK(r.param_error < 1e-4);
    }
  }
}

TEST_CASE("random 3-layer net with cross-entropy matches finite differences") {
  const ModelSpec spec{{6}, {LayerSpec::dense(6, 8), LayerSpec::relu(), LayerSpec::dense(8, 8), LayerSpec::relu(),
                             LayerSpec::dense(8, 4)}};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto m = init_model(spec, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Tensor x({3, 6});
    for (auto& v : x.data()) v = normal(rng);
    const std::vector<int> labels{0, 3, 1};
    auto loss = [&] { return cross_entropy_logits(forward(m, x), labels).loss; };
    Tape tape;
    const auto ce = cross_entropy_logits(forward(m, x, &tape), labels);
    const auto g = backward(m, tape, ce.grad);
    auto params = m.parameters();
    auto grads = g.tensors();
    for (std::size_t i = 0; i < params.size(); ++i)
      CHECK(testing::max_relative_error(grads[i]->data(), testing::central_difference(params[i]->data(), loss)) <
            1e-4);
    CHECK(testing::max_relative_error(g.input.data(), testing::central_difference(x.data(), loss)) < 1e-4);
  }
}

TEST_CASE("cross-entropy values and errors") {
  const std::vector<int> zero{0};
  CHECK(cross_entropy_probs(Tensor::vector({1, 0, 0}), zero).loss == 0.0);
  for (std::size_t k : {2u, 8u, 16u}) {
    Tensor uniform({k}, 1.0 / static_cast<double>(k));
    CHECK(cross_entropy_probs(uniform, zero).loss == doctest::Approx(std::log(static_cast<double>(k))));
    CHECK(cross_entropy_logits(Tensor({k}, 0.3), zero).loss == doctest::Approx(std::log(static_cast<double>(k))));
  }
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(cross_entropy_logits(Tensor({3}), bad), ConfigError);
  const std::vector<int> neg{-1};
  CHECK_THROWS_AS(cross_entropy_probs(Tensor({3}, 0.3), neg), ConfigError);

  // extreme logits stay finite
  const auto ext = cross_entropy_logits(Tensor::vector({1000, -1000, 0}), std::vector<int>{1});
  CHECK(std::isfinite(ext.loss));
  CHECK(ext.grad.all_finite());

  // gradient vs finite differences
  Tensor z = Tensor::vector({0.2, -1.3, 2.0, 0.5});
  const std::vector<int> label{2};
  auto f = [&] { return cross_entropy_logits(z, label).loss; };
  const auto analytic = cross_entropy_logits(z, label).grad;
  CHECK(testing::max_relative_error(analytic.data(), testing::central_difference(z.data(), f)) < 1e-4);
  Tensor p = Tensor::vector({0.2, 0.1, 0.4, 0.3});
  auto fp = [&] { return cross_entropy_probs(p, label).loss; };
  const auto analytic_p = cross_entropy_probs(p, label).grad;
  CHECK(testing::max_relative_error(analytic_p.data(), testing::central_difference(p.data(), fp)) < 1e-4);
}

TEST_CASE("softmax outputs sum to one and are strictly positive") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50);
  auto sm = init_model({{6}, {LayerSpec::softmax()}}, 0);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor z({6});
    for (auto& v : z.data()) v = u(rng);
    const auto p = forward(sm, z);
    double sum = 0;
    for (auto v : p.data()) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("energy-norm output has unit mean square for any nonzero input") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  auto en = init_model({{7}, {LayerSpec::energy_norm(7)}}, 0);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x({7});
    const double magnitude = std::pow(10.0, (trial % 13) - 6);
    for (auto& v : x.data()) v = magnitude * normal(rng);
    const auto y = forward(en, x);
    CHECK(std::abs(squared_norm(y.data()) / 7.0 - 1.0) < 1e-6);
  }
}

TEST_CASE("optimizer: sgd exact step, zero grads, adam convergence, non-finite grads") {
  Tensor w = Tensor::vector({1.0});
  Tensor g = Tensor::vector({2.0});
  std::vector<Tensor*> params{&w};
  std::vector<const Tensor*> grads{&g};
  auto sgd = make_optimizer(OptimAlgorithm::sgd, 0.1, std::span<const Tensor* const>(grads));
  optimizer_step(sgd, params, grads);
  CHECK(w[0] == 1.0 - 0.1 * 2.0);

  Tensor zero = Tensor::vector({0.0});
  std::vector<const Tensor*> zgrads{&zero};
  const double before = w[0];
  optimizer_step(sgd, params, zgrads);
  CHECK(w[0] == before);

  auto adam = make_optimizer(OptimAlgorithm::adam, 0.05, std::span<const Tensor* const>(grads));
  optimizer_step(adam, params, zgrads);
  CHECK(adam.step == 1);
  CHECK(w[0] == before);

  w[0] = 5.0;
  adam = make_optimizer(OptimAlgorithm::adam, 0.05, std::span<const Tensor* const>(grads));
  int steps = 0;
  for (; steps < 2000 && std::abs(w[0]) >= 1e-2; ++steps) {
    g[0] = 2.0 * w[0];
    optimizer_step(adam, params, grads);
  }
  CHECK(std::abs(w[0]) < 1e-2);
  CHECK(steps <= 2000);

  g[0] = std::nan("");
  const double kept = w[0];
  const auto step_before = adam.step;
  CHECK_THROWS_AS(optimizer_step(adam, params, grads), NumericError);
  CHECK(w[0] == kept);
  CHECK(adam.step == step_before);
}

TEST_CASE("init: determinism, seed sensitivity, Glorot variance") {
  const ModelSpec spec{{100}, {LayerSpec::dense(100, 100)}};
  const auto a = init_model(spec, 11);
  const auto b = init_model(spec, 11);
  const auto c = init_model(spec, 12);
  CHECK(a == b);
  CHECK_FALSE(a.params[0].weight == c.params[0].weight);
  for (auto v : a.params[0].bias.data()) CHECK(v == 0.0);

  const auto w = a.params[0].weight.data();
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0;
  for (auto v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  const double expected = 2.0 / 200.0;
  CHECK(var > 0.8 * expected);
  CHECK(var < 1.2 * expected);
}

TEST_CASE("weight file: round trip, truncation, byte-level fixture") {
  const ModelSpec spec{{2, 16},
                       {LayerSpec::conv1d(2, 4, 3, 2), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(28, 5),
                        LayerSpec::softmax()}};
  const auto m = init_model(spec, 77);
  const auto path = temp_path("weights.w");
  save_weights(m, path);
  CHECK(load_weights(path) == m);

  // trained (non-f32) parameters round trip at f32 precision, and the file itself is a fixed point
  auto trained = m;
  trained.params[0].weight[0] = 0.1;
  save_weights(trained, path);
  const auto reloaded = load_weights(path);
  CHECK(reloaded == rounded_to_f32(trained));
  const auto bytes = io::read_file(path);
  CHECK(encode_weight_file(to_weight_file(reloaded)) == bytes);

  // truncated file: format error, target untouched
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  io::write_file(path, truncated);
  auto target = m;
  CHECK_THROWS_AS(load_weights(target, path), FormatError);
  CHECK(target == m);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_weight_file(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 2;
  CHECK_THROWS_AS(decode_weight_file(bad_version), FormatError);

  // architecture mismatch on load into an existing model
  save_weights(m, path);
  auto other = init_model({{3}, {LayerSpec::dense(3, 3)}}, 1);
  CHECK_THROWS_AS(load_weights(other, path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("weight file: hand-assembled little-endian fixture decodes identically") {
  // dense(2 -> 1) with w = [0.5, -2], b = [0.25], seed 7, written byte by byte
  std::vector<std::uint8_t> b;
  auto put = [&](std::initializer_list<int> v) {
    for (int x : v) b.push_back(static_cast<std::uint8_t>(x));
  };
  for (char ch : std::string("PHYADVW1")) b.push_back(static_cast<std::uint8_t>(ch));
  put({1, 0, 0, 0});                        // version
  put({7, 0, 0, 0, 0, 0, 0, 0});            // seed
  put({1, 0, 0, 0, 2, 0, 0, 0});            // input rank 1, [2]
  put({1, 0, 0, 0});                        // one record
  put({'D', 'E', 'N', 'S', 'E', 0, 0, 0});  // tag
  put({2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0});          // sizes: in=2, out=1
  put({2, 0, 0, 0});                                  // two tensors
  put({2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0});          // weight [1,2]
  put({1, 0, 0, 0, 1, 0, 0, 0});                      // bias [1]
  put({0x00, 0x00, 0x00, 0x3F, 0x00, 0x00, 0x00, 0xC0});  // 0.5f, -2.0f
  put({0x00, 0x00, 0x80, 0x3E});                          // 0.25f

  const auto m = from_weight_file(decode_weight_file(b));
  CHECK(m.seed == 7);
  CHECK(m.spec.layers.size() == 1);
  CHECK(m.params[0].weight == Tensor({1, 2}, {0.5, -2.0}));
  CHECK(m.params[0].bias == Tensor({1}, {0.25}));
  CHECK(encode_weight_file(to_weight_file(m)) == b);
}

TEST_CASE("kernels: parallel batch gradient matches the serial reference") {
  const ModelSpec spec{{2, 20},
                       {LayerSpec::conv1d(2, 4, 5), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(64, 8),
                        LayerSpec::softmax()}};
  const auto m = init_model(spec, 5);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Tensor x({37, 2, 20});
  for (auto& v : x.data()) v = normal(rng);
  std::vector<int> labels(37);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 8);
  const auto s = kernels::classification_gradient(m, x, labels, kernels::Exec::serial);
  const auto p = kernels::classification_gradient(m, x, labels, kernels::Exec::parallel);
  CHECK(s.loss == doctest::Approx(p.loss).epsilon(1e-12));
  CHECK(s.correct == p.correct);
  const auto gs = s.grads.tensors();
  const auto gp = p.grads.tensors();
  for (std::size_t i = 0; i < gs.size(); ++i) CHECK(testing::max_relative_error(gs[i]->data(), gp[i]->data()) < 1e-12);
  // parallel path is deterministic run to run
  const auto p2 = kernels::classification_gradient(m, x, labels, kernels::Exec::parallel);
  CHECK(p2.grads.tensors()[0]->data()[0] == gp[0]->data()[0]);
  CHECK(kernels::predict_classes(m, x, kernels::Exec::serial) == kernels::predict_classes(m, x));
}
