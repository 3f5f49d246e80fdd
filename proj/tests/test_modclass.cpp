#include <doctest.h>

#include <cmath>
#include <limits>

#include "phyadv/errors.hpp"
#include "phyadv/modclass/attacks.hpp"
#include "phyadv/modclass/classifier.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/threat_model.hpp"
#include "support/finite_diff.hpp"

using namespace phyadv;
using namespace phyadv::modclass;
using phyadv::nn::Tensor;

namespace {

wireless::Dataset small_dataset(std::size_t per_cell, std::vector<int> snrs, std::uint64_t seed = 3) {
  wireless::DatasetConfig dc;
  dc.frames_per_cell = per_cell;
  dc.seed = seed;
  dc.snrs = std::move(snrs);
  return wireless::synthesize_dataset(dc);
}

// A briefly trained classifier shared by the attack tests.
const TrainedClassifier& fixture() {
  static const TrainedClassifier tc = [] {
    ClassifierConfig cc;
    cc.epochs = 4;
    cc.seed = 7;
    return train_classifier(small_dataset(30, {18}), cc);
  }();
  return tc;
}

Tensor frame_of(const wireless::Dataset& ds, std::size_t i) {
  const std::size_t idx[] = {i};
  return wireless::frames_tensor(ds, idx).reshaped({2, wireless::kFrameLength});
}

int predict(const nn::ModelState& m, const Tensor& frame) {
  return static_cast<int>(nn::argmax(nn::logits(m, frame).data()));
}

}  // namespace

TEST_CASE("threat model declaration is validated") {
  ThreatModel tm;
  CHECK_THROWS_AS(tm.validate(), ConfigError);  // no success metric
  tm.success_metric = "accuracy";
  CHECK_THROWS_AS(tm.validate(), ConfigError);  // no assumptions
  tm.assumptions = "additive perturbation at the receiver input";
  CHECK_THROWS_AS(tm.validate(), ConfigError);  // no adversary
  tm.adversary = "transmitter sharing the channel";
  CHECK_NOTHROW(tm.validate());
  tm.attack_phase = "poisoning";
  CHECK_THROWS_AS(tm.validate(), ConfigError);
  CHECK(knowledge_from_name("black-box") == Knowledge::black_box);
  CHECK_THROWS_AS(knowledge_from_name("omniscient"), ConfigError);
}

TEST_CASE("classifier config and architecture") {
  ClassifierConfig cc;
  CHECK(cc.architecture.output_shape() == nn::Shape{8});
  CHECK_NOTHROW(cc.validate());
  cc.architecture.layers.pop_back();
  cc.architecture.layers.back() = nn::LayerSpec::dense(128, 4);
  CHECK_THROWS_AS(cc.validate(), ConfigError);
  ClassifierConfig zero;
  zero.epochs = 0;
  CHECK_THROWS_AS(zero.validate(), ConfigError);
}

TEST_CASE("train_classifier: smoke run on 80 frames, history, determinism") {
  const auto ds = small_dataset(10, {10});
  CHECK(ds.size() == 80);
  ClassifierConfig cc;
  cc.epochs = 1;
  cc.batch_size = 16;
  const auto a = train_classifier(ds, cc);
  REQUIRE(a.history.size() == 1);
  CHECK(std::isfinite(a.history[0].train_loss));
  CHECK(std::isfinite(a.history[0].test_loss));
  CHECK(a.history[0].train_accuracy >= 0.0);
  const auto b = train_classifier(ds, cc);
  CHECK(a.model == b.model);
}

TEST_CASE("train_classifier: errors") {
  auto ds = small_dataset(10, {10});
  ClassifierConfig cc;
  cc.epochs = 1;

  auto nan_ds = ds;
  nan_ds.frames[0].samples[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    (void)train_classifier(nan_ds, cc);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 0);
  }

  auto missing = ds;
  for (std::size_t i = 0; i < missing.size(); ++i)
    if (missing.frames[i].label == wireless::Scheme::GFSK) missing.split[i] = wireless::Split::test;
  CHECK_THROWS_AS(train_classifier(missing, cc), ConfigError);
  cc.holdout_scheme = wireless::Scheme::GFSK;
  CHECK_NOTHROW(train_classifier(missing, cc));
  CHECK(usable_indices(ds, wireless::Split::train, cc).size() == 7 * 8);
}

TEST_CASE("augmented training runs") {
  const auto ds = small_dataset(10, {10});
  for (auto aug : {Augmentation::gaussian, Augmentation::adversarial}) {
    ClassifierConfig cc;
    cc.epochs = 1;
    cc.augmentation = aug;
    const auto tc = train_classifier(ds, cc);
    CHECK(std::isfinite(tc.history[0].train_loss));
    CHECK(tc.model.params[0].weight.all_finite());
  }
}

TEST_CASE("accuracy_vs_snr with predictor stubs") {
  std::vector<int> truth, snr;
  for (int s : {0, 2, 4})
    for (int k = 0; k < 8; ++k)
      for (int r = 0; r < 5; ++r) {
        truth.push_back(k);
        snr.push_back(s);
      }
  const auto perfect = accuracy_vs_snr(truth, truth, snr);
  REQUIRE(perfect.size() == 3);
  for (const auto& p : perfect) CHECK(p.accuracy == 1.0);
  const std::vector<int> constant(truth.size(), 3);
  for (const auto& p : accuracy_vs_snr(constant, truth, snr)) {
    CHECK(p.accuracy == 0.125);
    CHECK(p.frames == 40);
  }
  // a missing interior level is omitted
  std::vector<int> gap = snr;
  for (auto& s : gap)
    if (s == 2) s = 0;
  CHECK(accuracy_vs_snr(truth, truth, gap).size() == 2);
  CHECK_THROWS_AS(accuracy_vs_snr(truth, std::vector<int>{1}, snr), ConfigError);
}

TEST_CASE("C&W: already misclassified frame needs no perturbation") {
  const auto& tc = fixture();
  const auto ds = small_dataset(30, {18});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = frame_of(ds, i);
    const int pred = predict(tc.model, x);
    if (pred == static_cast<int>(ds.frames[i].label)) continue;
    const auto r = cw_l2_attack(tc.model, x, static_cast<int>(ds.frames[i].label), CwAttackConfig{});
    CHECK(r.record.success);
    CHECK(r.record.l2 == 0.0);
    CHECK(r.record.iterations == 0);
    CHECK(nn::squared_norm(r.delta.data()) == 0.0);
    return;
  }
  WARN("fixture classified every frame correctly");
}

TEST_CASE("C&W: Eq.1 contract, budget, minimality trace, determinism") {
  const auto& tc = fixture();
  const auto ds = small_dataset(4, {10, 18}, 11);
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto x = wireless::frames_tensor(ds, idx);
  const auto y = wireless::frame_labels(ds, idx);
  CwAttackConfig cfg;
  cfg.steps = 60;
  cfg.max_power_ratio = 0.1;
  const auto res = cw_l2_attack(tc.model, x, y, cfg);
  REQUIRE(res.size() == ds.size());
  std::size_t successes = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& r = res[i];
    const auto xi = x.row(i);
    const double xn2 = nn::squared_norm(xi);
    CHECK(nn::squared_norm(r.delta.data()) <= cfg.max_power_ratio * xn2 * (1 + 1e-12));
    CHECK(r.record.power_ratio == doctest::Approx(nn::squared_norm(r.delta.data()) / xn2));
    if (!r.record.success) continue;
    ++successes;
    // re-run forward on the stored delta, one frame at a time
    Tensor adv({2, wireless::kFrameLength}, std::vector<double>(xi.begin(), xi.end()));
    nn::axpy(1.0, r.delta.data(), adv.data());
    CHECK(predict(tc.model, adv) != y[i]);
    // accepted |delta| never increases along the search
    double prev = std::numeric_limits<double>::infinity();
    double prev_c = std::numeric_limits<double>::infinity();
    for (const auto& s : r.record.trace) {
      CHECK(s.accepted_l2 <= prev);
      prev = s.accepted_l2;
      if (s.success) {
        CHECK(s.c < prev_c);
        prev_c = s.c;
      }
    }
  }
  CHECK(successes > res.size() / 2);

  const auto again = cw_l2_attack(tc.model, x, y, cfg, kernels::Exec::serial);
  for (std::size_t i = 0; i < res.size(); ++i) {
    CHECK(again[i].delta == res[i].delta);
    CHECK(again[i].record.iterations == res[i].record.iterations);
  }
  // a zero budget can only succeed on frames that are already misclassified
  cfg.max_power_ratio = 0.0;
  const auto none = cw_l2_attack(tc.model, x, y, cfg);
  const auto clean = kernels::predict_classes(tc.model, x);
  for (std::size_t i = 0; i < none.size(); ++i) CHECK(none[i].record.success == (clean[i] != y[i]));
}

TEST_CASE("C&W config validation") {
  CwAttackConfig c;
  c.search_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.c_min = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("FGSM: definition, zero epsilon, sign agrees with finite differences") {
  const auto& tc = fixture();
  const auto ds = small_dataset(2, {18}, 5);
  const auto x = frame_of(ds, 0);
  const int label = static_cast<int>(ds.frames[0].label);

  const auto zero = fgsm_attack(tc.model, x, label, 0.0);
  CHECK(nn::squared_norm(zero.data()) == 0.0);

  const double eps = fgsm_epsilon_for_ratio(x.data(), 0.05);
  const auto d = fgsm_attack(tc.model, x, label, eps);
  double linf = 0;
  for (double v : d.data()) {
    CHECK((v == eps || v == -eps || v == 0.0));
    linf = std::max(linf, std::abs(v));
  }
  CHECK(linf == eps);
  CHECK(nn::squared_norm(d.data()) == doctest::Approx(0.05 * nn::squared_norm(x.data())).epsilon(1e-9));

  // oracle: sign of the central-difference loss gradient
  std::vector<double> xv(x.data().begin(), x.data().end());
  const int labels[] = {label};
  const auto loss = [&] {
    Tensor t({2, wireless::kFrameLength}, xv);
    return nn::cross_entropy_logits(nn::logits(tc.model, t), labels).loss;
  };
  const auto fd = phyadv::testing::central_difference(xv, loss, 1e-5);
  std::size_t agree = 0, counted = 0;
  for (std::size_t k = 0; k < fd.size(); ++k) {
    if (std::abs(fd[k]) < 1e-6) continue;
    ++counted;
    agree += (fd[k] > 0) == (d[k] > 0);
  }
  CHECK(counted > 100);
  CHECK(agree == counted);
}

TEST_CASE("matched-norm Gaussian perturbation") {
  const auto a = gaussian_perturbation({2, 128}, 1.5, 9);
  CHECK(nn::l2_norm(a.data()) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(gaussian_perturbation({2, 128}, 1.5, 9) == a);
  CHECK_FALSE(gaussian_perturbation({2, 128}, 1.5, 10) == a);
  CHECK(nn::squared_norm(gaussian_perturbation({4}, 0.0, 1).data()) == 0.0);
}
