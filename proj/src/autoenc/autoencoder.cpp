#include "phyadv/autoenc/autoencoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "phyadv/errors.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/wireless/channel.hpp"

namespace phyadv::autoenc {

using nn::LayerSpec;

void AutoencoderConfig::validate() const {
  if (k == 0 || k > 16) throw ConfigError("autoencoder.k must be in [1, 16]");
  if (n == 0) throw ConfigError("autoencoder.n must be positive");
  if (epochs == 0 || steps_per_epoch == 0 || batch_size == 0)
    throw ConfigError("autoencoder epochs, steps_per_epoch and batch_size must be positive");
  if (!(learning_rate > 0)) throw ConfigError("autoencoder.learning_rate must be positive");
  if (!std::isfinite(train_ebno_db)) throw ConfigError("autoencoder.train_ebno_db must be finite");
}

nn::ModelSpec encoder_spec(const AutoencoderConfig& c) {
  const auto m = c.messages();
  const auto h = c.encoder_hidden ? c.encoder_hidden : m;
  return {{m}, {LayerSpec::dense(m, h), LayerSpec::relu(), LayerSpec::dense(h, c.n), LayerSpec::energy_norm(c.n)}};
}

nn::ModelSpec decoder_spec(const AutoencoderConfig& c) {
  const auto m = c.messages();
  const auto h = c.decoder_hidden ? c.decoder_hidden : m;
  return {{c.n}, {LayerSpec::dense(c.n, h), LayerSpec::relu(), LayerSpec::dense(h, m), LayerSpec::softmax()}};
}

double noise_stddev(double ebno_db, double rate) {
  if (!(rate > 0)) throw ConfigError("rate must be positive");
  return std::sqrt(1.0 / (2.0 * rate * std::pow(10.0, ebno_db / 10.0)));
}

std::size_t Autoencoder::messages() const { return encoder.spec.input_shape.at(0); }
std::size_t Autoencoder::n() const { return encoder.spec.output_shape().at(0); }
std::size_t Autoencoder::k() const { return static_cast<std::size_t>(std::countr_zero(messages())); }

nn::Tensor one_hot(std::span<const int> messages, std::size_t m) {
  nn::Tensor t({messages.size(), m});
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (messages[i] < 0 || static_cast<std::size_t>(messages[i]) >= m) throw ConfigError("message index out of range");
    t.row(i)[static_cast<std::size_t>(messages[i])] = 1.0;
  }
  return t;
}

nn::Tensor codebook(const nn::ModelState& encoder) {
  const auto m = encoder.spec.input_shape.at(0);
  std::vector<int> all(m);
  for (std::size_t i = 0; i < m; ++i) all[i] = static_cast<int>(i);
  return nn::forward(encoder, one_hot(all, m));
}

StepResult end_to_end_step(Autoencoder& ae, nn::OptimState& enc_opt, nn::OptimState& dec_opt,
                           std::span<const int> messages, double stddev, Rng& rng) {
  const auto m = ae.messages();
  nn::Tape enc_tape, dec_tape;
  auto x = nn::forward(ae.encoder, one_hot(messages, m), &enc_tape);
  wireless::add_gaussian(x.data(), stddev, rng);
  const auto z = nn::logits(ae.decoder, x, &dec_tape);
  const auto ce = nn::cross_entropy_logits(z, messages);
  if (!std::isfinite(ce.loss)) throw NumericError("autoencoder loss is not finite");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < messages.size(); ++i) hits += static_cast<int>(nn::argmax(z.row(i))) == messages[i];
  const auto gd = nn::backward(ae.decoder, dec_tape, ce.grad);
  // the channel is additive, so d loss / d encoder output = d loss / d decoder input
  const auto ge = nn::backward(ae.encoder, enc_tape, gd.input);
  nn::optimizer_step(dec_opt, ae.decoder, gd);
  nn::optimizer_step(enc_opt, ae.encoder, ge);
  return {ce.loss, static_cast<double>(hits) / static_cast<double>(messages.size())};
}

Autoencoder train_autoencoder(const AutoencoderConfig& config) {
  config.validate();
  Autoencoder ae;
  ae.encoder = nn::init_model(encoder_spec(config), derive_seed(config.seed, {0}));
  ae.decoder = nn::init_model(decoder_spec(config), derive_seed(config.seed, {1}));
  auto enc_opt = nn::make_optimizer(nn::OptimAlgorithm::adam, config.learning_rate, ae.encoder);
  auto dec_opt = nn::make_optimizer(nn::OptimAlgorithm::adam, config.learning_rate, ae.decoder);
  const double sd = noise_stddev(config.train_ebno_db, config.rate());
  const auto m = static_cast<int>(config.messages());

  std::vector<int> msgs(config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto rng = make_rng(config.seed, {2, epoch});
    std::uniform_int_distribution<int> pick(0, m - 1);
    double loss = 0.0, acc = 0.0;
    for (std::size_t s = 0; s < config.steps_per_epoch; ++s) {
      for (auto& v : msgs) v = pick(rng);
      try {
        const auto r = end_to_end_step(ae, enc_opt, dec_opt, msgs, sd, rng);
        loss += r.loss;
        acc += r.accuracy;
      } catch (const NumericError& e) {
        throw TrainingError(e.what(), static_cast<int>(epoch));
      }
    }
    const auto steps = static_cast<double>(config.steps_per_epoch);
    ae.history.push_back({epoch, loss / steps, acc / steps});
  }
  return ae;
}

double ChannelModifier::energy() const noexcept {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::jam: return jam_energy;
    case Kind::adversarial: return nn::squared_norm(delta);
  }
  return 0.0;
}

namespace {

// Errors over one chunk of blocks at one grid point.
std::size_t chunk_errors(const nn::ModelState& decoder, const nn::Tensor& book, std::size_t count, double stddev,
                         const ChannelModifier& mod, std::uint64_t seed, std::size_t point, std::size_t chunk,
                         bool batched) {
  const std::size_t m = book.dim(0);
  const std::size_t n = book.dim(1);
  auto rng = make_rng(seed, {point, chunk});
  auto jam_rng = make_rng(seed, {point, chunk, 1});
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::vector<int> sent(count);
  nn::Tensor rx({count, n});
  for (std::size_t b = 0; b < count; ++b) {
    const auto msg = pick(rng);
    sent[b] = static_cast<int>(msg);
    auto r = rx.row(b);
    std::copy(book.row(msg).begin(), book.row(msg).end(), r.begin());
    wireless::add_gaussian(r, stddev, rng);
    if (mod.kind == ChannelModifier::Kind::jam) wireless::add_jamming(r, mod.jam_energy, jam_rng);
    if (mod.kind == ChannelModifier::Kind::adversarial) nn::axpy(1.0, mod.delta, r);
  }
  std::size_t errors = 0;
  if (batched) {
    const auto z = nn::logits(decoder, rx);
    for (std::size_t b = 0; b < count; ++b) errors += static_cast<int>(nn::argmax(z.row(b))) != sent[b];
  } else {
    for (std::size_t b = 0; b < count; ++b) {
      const auto z = nn::logits(decoder, nn::Tensor({n}, std::vector<double>(rx.row(b).begin(), rx.row(b).end())));
      errors += static_cast<int>(nn::argmax(z.data())) != sent[b];
    }
  }
  return errors;
}

}  // namespace

std::vector<BlerPoint> bler_curve(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                  std::span<const double> ebno_grid_db, std::size_t trials,
                                  const ChannelModifier& modifier, std::uint64_t seed, kernels::Exec exec) {
  if (trials == 0) throw ConfigError("bler_curve: trials must be positive");
  const auto book = codebook(encoder);
  const std::size_t m = book.dim(0);
  const std::size_t n = book.dim(1);
  if (decoder.spec.input_shape != nn::Shape{n}) throw ConfigError("decoder input does not match encoder output");
  if (modifier.kind == ChannelModifier::Kind::adversarial && modifier.delta.size() != n)
    throw ConfigError("perturbation length does not match the codeword length");
  if (modifier.kind == ChannelModifier::Kind::jam && !(modifier.jam_energy >= 0))
    throw ConfigError("jam energy must be >= 0");
  const double rate = std::log2(static_cast<double>(m)) / static_cast<double>(n);

  const std::size_t chunks = (trials + kBlerChunk - 1) / kBlerChunk;
  std::vector<BlerPoint> curve;
  for (std::size_t p = 0; p < ebno_grid_db.size(); ++p) {
    const double sd = noise_stddev(ebno_grid_db[p], rate);
    std::vector<std::size_t> errs(chunks);
    kernels::for_each_index(chunks, exec, [&](std::size_t c) {
      const auto count = std::min(kBlerChunk, trials - c * kBlerChunk);
      errs[c] = chunk_errors(decoder, book, count, sd, modifier, seed, p, c, exec == kernels::Exec::parallel);
    });
    BlerPoint pt;
    pt.ebno_db = ebno_grid_db[p];
    pt.trials = trials;
    for (auto e : errs) pt.errors += e;
    pt.bler = static_cast<double>(pt.errors) / static_cast<double>(trials);
    pt.low_confidence = pt.errors < 10;
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace phyadv::autoenc
