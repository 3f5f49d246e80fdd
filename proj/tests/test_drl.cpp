#include <doctest.h>

#include <cmath>
#include <limits>

#include "phyadv/drl/feedback.hpp"
#include "phyadv/drl/transfer.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/wireless/channel.hpp"

using namespace phyadv;
using namespace phyadv::drl;

namespace {

std::vector<double> flatten(const nn::Gradients& g) {
  std::vector<double> out;
  for (const auto* t : g.tensors()) out.insert(out.end(), t->data().begin(), t->data().end());
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return nn::dot(a, b) / (nn::l2_norm(a) * nn::l2_norm(b));
}

AttackSchedule small_schedule(std::size_t start, std::size_t end, std::size_t pool_size) {
  AttackSchedule s;
  s.window_start = start;
  s.window_end = end;
  for (std::size_t i = 0; i < pool_size; ++i) {
    autoenc::UniversalPerturbation p;
    p.delta.assign(7, 0.1 * static_cast<double>(i + 1));
    s.pool.push_back(p);
  }
  return s;
}

}  // namespace

TEST_CASE("config and schedule validation") {
  DrlConfig c;
  CHECK_NOTHROW(c.validate());
  c.sigma_pi = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  auto s = small_schedule(200, 400, 2);
  CHECK_NOTHROW(s.validate(600));
  CHECK_THROWS_AS(s.validate(300), ConfigError);
  s.window_start = 400;
  CHECK_THROWS_AS(s.validate(600), ConfigError);
  auto empty = small_schedule(200, 400, 0);
  CHECK_THROWS_AS(empty.validate(600), ConfigError);
}

TEST_CASE("broadcast adversary draws from the pool only inside the window") {
  auto s = small_schedule(10, 20, 3);
  s.policy = PoolPolicy::round_robin;
  BroadcastAdversary rr(s);
  CHECK_FALSE(rr.perturbation(9).has_value());
  CHECK_FALSE(rr.perturbation(20).has_value());
  for (std::size_t t = 10; t < 20; ++t) CHECK(rr.perturbation(t)->data() == s.pool[(t - 10) % 3].delta.data());
  s.policy = PoolPolicy::uniform;
  BroadcastAdversary u(s);
  std::vector<bool> seen(3, false);
  for (std::size_t t = 10; t < 20; ++t) {
    const auto p = u.perturbation(t);
    CHECK(p->data() == u.perturbation(t)->data());
    for (std::size_t i = 0; i < 3; ++i) seen[i] = seen[i] || p->data() == s.pool[i].delta.data();
  }
  CHECK((seen[0] || seen[1] || seen[2]));
}

TEST_CASE("receiver step: accuracy before the update, chance level, decreasing loss") {
  autoenc::AutoencoderConfig ac;
  const auto enc = nn::init_model(autoenc::encoder_spec(ac), 1);
  auto dec_state = nn::init_model(autoenc::decoder_spec(ac), 2);

  // labels equal to the decoder's own predictions -> accuracy 1.0
  const auto book = autoenc::codebook(enc);
  std::vector<int> own = kernels::predict_classes(dec_state, book);
  LiveModel dec(dec_state);
  auto opt = nn::make_optimizer(nn::OptimAlgorithm::adam, 5e-3, dec.snapshot());
  CHECK(train_step_receiver(dec, opt, book, own).accuracy == 1.0);

  // untrained decoder on random messages -> about 1/16
  LiveModel fresh(dec_state);
  auto opt2 = nn::make_optimizer(nn::OptimAlgorithm::adam, 5e-3, fresh.snapshot());
  auto rng = make_rng(3);
  std::vector<int> msgs(4096);
  std::uniform_int_distribution<int> pick(0, 15);
  for (auto& m : msgs) m = pick(rng);
  auto rx = nn::forward(enc, autoenc::one_hot(msgs, 16));
  const double acc = train_step_receiver(fresh, opt2, rx, msgs).accuracy;
  CHECK(std::abs(acc - 1.0 / 16) < 4 * std::sqrt(1.0 / 16 * 15.0 / 16 / 4096));

  // fixed noiseless batch: loss falls on every one of 10 consecutive steps
  LiveModel learner(dec_state);
  auto opt3 = nn::make_optimizer(nn::OptimAlgorithm::adam, 5e-3, learner.snapshot());
  std::vector<int> all(16);
  for (int i = 0; i < 16; ++i) all[static_cast<std::size_t>(i)] = i;
  double prev = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 10; ++s) {
    const double loss = train_step_receiver(learner, opt3, book, all).loss;
    CHECK(loss < prev);
    prev = loss;
  }
  CHECK(learner.counts().update == 10);
}

TEST_CASE("policy gradient: baseline cancels constant losses, non-finite feedback skipped") {
  auto rng = make_rng(4);
  nn::Tensor w({64, 7});
  wireless::add_gaussian(w.data(), 0.15, rng);
  const std::vector<double> equal(64, 1.7);
  const auto g = policy_gradient_outputs(w, equal, 0.15);
  REQUIRE(g.has_value());
  CHECK(nn::squared_norm(g->data()) == 0.0);
  auto bad = equal;
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(policy_gradient_outputs(w, bad, 0.15).has_value());

  // equal true losses plus feedback noise: update norm shrinks as the round grows
  auto norm_at = [&](std::size_t b) {
    double total = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      nn::Tensor wb({b, 7});
      wireless::add_gaussian(wb.data(), 0.15, rng);
      std::vector<double> fb(b, 1.0);
      wireless::add_gaussian(fb, 0.1, rng);
      const auto gb = *policy_gradient_outputs(wb, fb, 0.15);
      std::vector<double> col(7, 0.0);  // the update direction summed over the round
      for (std::size_t i = 0; i < b; ++i) nn::axpy(1.0, gb.row(i), col);
      total += nn::l2_norm(col);
    }
    return total / 20;
  };
  const double small = norm_at(100), large = norm_at(10000);
  CHECK(large < 0.2 * small);
}

TEST_CASE("policy gradient direction matches the white-box gradient (single message)") {
  // The estimator targets the loss smoothed by the exploration noise, so the
  // oracle is the supervised gradient with channel noise of stddev sigma_pi.
  autoenc::AutoencoderConfig ac;
  const double sigma_pi = 0.15;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto enc = nn::init_model(autoenc::encoder_spec(ac), 11 + s);
    const auto dec = nn::init_model(autoenc::decoder_spec(ac), 12 + s);
    const std::vector<int> msgs(1000, 5);
    const std::vector<int> oracle_msgs(50000, 5);
    auto rng = make_rng(8 + s);
    const auto truth = flatten(supervised_encoder_gradient(enc, dec, oracle_msgs, sigma_pi, rng));
    const auto pointwise = flatten(supervised_encoder_gradient(enc, dec, msgs, 0.0, rng));
    const auto est = flatten(policy_gradient_estimate(enc, dec, msgs, sigma_pi, 0.0, 0.0, rng));
    const double cs = cosine(truth, est);
    MESSAGE("toy " << s << " cosine " << cs << " (unsmoothed gradient: " << cosine(pointwise, est) << ")");
    CHECK(cs > 0.9);
  }
}

TEST_CASE("simulation trace: shape, determinism, black-box access contract") {
  DrlConfig c;
  c.time_steps = 60;
  const auto s = small_schedule(20, 40, 4);
  const auto clean = run_simulation(c, nullptr);
  const auto attacked = run_simulation(c, &s);
  const auto again = run_simulation(c, &s);
  REQUIRE(attacked.trace.accuracy.size() == 60);
  for (std::size_t t = 0; t < 60; ++t) {
    CHECK(attacked.trace.accuracy[t] >= 0.0);
    CHECK(attacked.trace.accuracy[t] <= 1.0);
    CHECK(attacked.trace.attacked[t] == (t >= 20 && t < 40));
  }
  CHECK(again.trace.accuracy == attacked.trace.accuracy);
  CHECK(again.encoder == attacked.encoder);
  // identical before the window, and the adversary adds no model accesses
  for (std::size_t t = 0; t < 20; ++t) CHECK(clean.trace.accuracy[t] == attacked.trace.accuracy[t]);
  CHECK(clean.trace.encoder_access == attacked.trace.encoder_access);
  CHECK(clean.trace.decoder_access == attacked.trace.decoder_access);
  CHECK(attacked.trace.decoder_access.update == 60);
  CHECK(attacked.trace.encoder_access.update == 60);

  auto wrong = small_schedule(20, 40, 1);
  wrong.pool[0].delta.resize(3);
  CHECK_THROWS_AS(run_simulation(c, &wrong), ConfigError);
  CHECK(run_simulation(c, nullptr, 10).trace.accuracy.size() == 10);
}

TEST_CASE("default simulation without attack reaches the plateau") {
  const auto r = run_simulation(DrlConfig{}, nullptr);
  CHECK(r.trace.accuracy.size() == 600);
  CHECK(window_mean(r.trace, 180, 200) >= 0.9);
  CHECK(window_mean(r.trace, 200, 600) >= 0.9);
  CHECK(r.trace.skipped_rounds == 0);
  // energy-norm keeps the learned codewords at unit power
  const auto book = autoenc::codebook(r.encoder);
  for (std::size_t m = 0; m < 16; ++m) CHECK(nn::squared_norm(book.row(m)) == doctest::Approx(7.0).epsilon(1e-9));
}

TEST_CASE("replicates and aggregation") {
  DrlConfig c;
  c.time_steps = 30;
  const auto par = run_replicates(c, nullptr, 3);
  const auto ser = run_replicates(c, nullptr, 3, kernels::Exec::serial);
  for (std::size_t r = 0; r < 3; ++r) CHECK(par[r].accuracy == ser[r].accuracy);
  CHECK(par[0].accuracy != par[1].accuracy);

  std::vector<AccuracyTrace> t(2);
  t[0].accuracy = {0.5, 1.0};
  t[1].accuracy = {0.7, 1.0};
  const auto agg = aggregate_traces(t);
  CHECK(agg[0].mean == doctest::Approx(0.6));
  CHECK(agg[0].std == doctest::Approx(std::sqrt(0.02)));
  CHECK(agg[1].std == 0.0);
  CHECK(agg[1].n == 2);
}

TEST_CASE("transfer selection: order, count, shortfall") {
  SourceRun run;
  for (int i = 0; i < 300; ++i) {
    Candidate c;
    c.clean_bler = 0.02;
    c.surrogate_bler = i < 250 ? 0.03 + 0.0001 * ((i * 37) % 250) : 0.01;
    c.perturbation.seed = static_cast<std::uint64_t>(i);
    run.candidates.push_back(c);
  }
  CHECK(run.successes() == 250);
  const auto sel = transfer_perturbations(run, 200);
  REQUIRE(sel.size() == 200);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    CHECK(sel[i].success());
    if (i) CHECK(sel[i].surrogate_bler <= sel[i - 1].surrogate_bler);
  }
  CHECK_THROWS_AS(transfer_perturbations(run, 251), ConfigError);
}

TEST_CASE("source run and transfer evaluation") {
  autoenc::AutoencoderConfig sc;
  sc.seed = 21;
  sc.epochs = 20;
  const auto sur = autoenc::train_autoencoder(sc);
  SourceConfig cfg;
  cfg.candidates = 6;
  cfg.trials = 2048;
  cfg.crafting.steps = 100;
  const auto run = craft_source_run(sur, cfg);
  CHECK(run.candidates.size() == 6);
  CHECK(run.successes() >= 1);
  for (const auto& c : run.candidates) CHECK(c.perturbation.energy() <= 0.25 * 7 * (1 + 1e-12));

  sc.seed = 22;
  const auto target = autoenc::train_autoencoder(sc);
  const auto pool = pool_of(transfer_perturbations(run, run.successes()));
  const auto out = evaluate_transfer(target.encoder, target.decoder, pool, 4.0, 128, 4, 1);
  CHECK(out.success_rate >= 0.0);
  CHECK(out.clean_accuracy.size() == pool.size());

  std::vector<autoenc::UniversalPerturbation> zero(2);
  for (auto& z : zero) z.delta.assign(7, 0.0);
  const auto none = evaluate_transfer(target.encoder, target.decoder, zero, 4.0, 128, 4, 1);
  CHECK(none.success_rate == 0.0);
  CHECK(none.attacked_accuracy == none.clean_accuracy);
}
