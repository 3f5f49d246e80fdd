#include "phyadv/drl/transfer.hpp"

#include <algorithm>
#include <random>

#include "phyadv/errors.hpp"
#include "phyadv/wireless/channel.hpp"

namespace phyadv::drl {

std::size_t SourceRun::successes() const noexcept {
  return static_cast<std::size_t>(std::count_if(candidates.begin(), candidates.end(),
                                                [](const Candidate& c) { return c.success(); }));
}

SourceRun craft_source_run(const autoenc::Autoencoder& surrogate, const SourceConfig& config, kernels::Exec exec) {
  SourceRun run;
  run.eval_ebno_db = config.eval_ebno_db;
  run.trials = config.trials;
  const double grid[] = {config.eval_ebno_db};
  const auto eval_seed = derive_seed(config.seed, {1});
  const double clean = autoenc::bler_curve(surrogate.encoder, surrogate.decoder, grid, config.trials,
                                           autoenc::ChannelModifier::none(), eval_seed, exec)
                           .front()
                           .bler;
  run.candidates.resize(config.candidates);
  // crafting is single-threaded per perturbation; candidates are independent
  kernels::for_each_index(config.candidates, exec, [&](std::size_t i) {
    auto& c = run.candidates[i];
    c.perturbation = autoenc::craft_universal_perturbation(surrogate.decoder, config.crafting,
                                                           derive_seed(config.seed, {0, i}));
    c.clean_bler = clean;
    c.surrogate_bler = autoenc::bler_curve(surrogate.encoder, surrogate.decoder, grid, config.trials,
                                           autoenc::ChannelModifier::adversarial(c.perturbation.delta), eval_seed,
                                           kernels::Exec::serial)
                           .front()
                           .bler;
  });
  return run;
}

std::vector<Candidate> transfer_perturbations(const SourceRun& source, std::size_t count) {
  std::vector<Candidate> ok;
  for (const auto& c : source.candidates)
    if (c.success()) ok.push_back(c);
  if (ok.size() < count)
    throw ConfigError("transfer needs " + std::to_string(count) + " successful perturbations, source run has " +
                      std::to_string(ok.size()) + " (shortfall " + std::to_string(count - ok.size()) + ")");
  std::stable_sort(ok.begin(), ok.end(),
                   [](const Candidate& a, const Candidate& b) { return a.surrogate_bler > b.surrogate_bler; });
  ok.resize(count);
  return ok;
}

std::vector<autoenc::UniversalPerturbation> pool_of(const std::vector<Candidate>& selected) {
  std::vector<autoenc::UniversalPerturbation> pool;
  pool.reserve(selected.size());
  for (const auto& c : selected) pool.push_back(c.perturbation);
  return pool;
}

TransferOutcome evaluate_transfer(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                  const std::vector<autoenc::UniversalPerturbation>& pool, double ebno_db,
                                  std::size_t batch, std::size_t rounds, std::uint64_t seed, kernels::Exec exec) {
  if (pool.empty() || batch == 0 || rounds == 0) throw ConfigError("evaluate_transfer: empty pool, batch or rounds");
  const auto book = autoenc::codebook(encoder);
  const std::size_t m = book.dim(0), n = book.dim(1);
  const double sd = autoenc::noise_stddev(ebno_db, std::log2(static_cast<double>(m)) / static_cast<double>(n));
  TransferOutcome out;
  out.clean_accuracy.resize(pool.size());
  out.attacked_accuracy.resize(pool.size());
  for (const auto& p : pool)
    if (p.delta.size() != n) throw ConfigError("pool perturbation length does not match the codeword length");
  kernels::for_each_index(pool.size(), exec, [&](std::size_t p) {
    auto rng = make_rng(seed, {p});
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    const std::size_t total = batch * rounds;
    std::vector<int> sent(total);
    nn::Tensor rx({total, n});
    for (std::size_t b = 0; b < total; ++b) {
      const auto msg = pick(rng);
      sent[b] = static_cast<int>(msg);
      auto r = rx.row(b);
      std::copy(book.row(msg).begin(), book.row(msg).end(), r.begin());
      wireless::add_gaussian(r, sd, rng);
    }
    auto adv = rx;
    for (std::size_t b = 0; b < total; ++b) nn::axpy(1.0, pool[p].delta, adv.row(b));
    const auto zc = nn::logits(decoder, rx);
    const auto za = nn::logits(decoder, adv);
    std::size_t hc = 0, ha = 0;
    for (std::size_t b = 0; b < total; ++b) {
      hc += static_cast<int>(nn::argmax(zc.row(b))) == sent[b];
      ha += static_cast<int>(nn::argmax(za.row(b))) == sent[b];
    }
    out.clean_accuracy[p] = static_cast<double>(hc) / static_cast<double>(total);
    out.attacked_accuracy[p] = static_cast<double>(ha) / static_cast<double>(total);
  });
  std::size_t wins = 0;
  for (std::size_t p = 0; p < pool.size(); ++p) wins += out.attacked_accuracy[p] < out.clean_accuracy[p];
  out.success_rate = static_cast<double>(wins) / static_cast<double>(pool.size());
  return out;
}

}  // namespace phyadv::drl
