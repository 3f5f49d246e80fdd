#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "phyadv/binary_io.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/wireless/channel.hpp"
#include "phyadv/wireless/dataset.hpp"
#include "phyadv/wireless/metrics.hpp"
#include "phyadv/wireless/modulation.hpp"

using namespace phyadv;
using namespace phyadv::wireless;

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1u);
  return b;
}

double measured_snr_db(const Signal& clean, const Signal& noisy) {
  Signal noise(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) noise[i] = noisy[i] - clean[i];
  return 10.0 * std::log10(signal_power(clean) / signal_power(noise));
}

}  // namespace

TEST_CASE("canonical symbol mappings") {
  const std::vector<std::uint8_t> bpsk_bits{0, 1};
  const auto bpsk = map_symbols(Scheme::BPSK, bpsk_bits);
  CHECK(bpsk[0] == Complex(1, 0));
  CHECK(bpsk[1] == Complex(-1, 0));
  // modulate at one sample per symbol yields the same symbols
  CHECK(modulate(Scheme::BPSK, bpsk_bits, 1) == bpsk);

  const std::vector<std::uint8_t> qpsk_bits{0, 0};
  const auto q = map_symbols(Scheme::QPSK, qpsk_bits)[0];
  CHECK(q.real() == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(q.imag() == doctest::Approx(1 / std::sqrt(2.0)));

  CHECK_THROWS_AS(map_symbols(Scheme::QAM16, std::vector<std::uint8_t>{0, 1, 1}), ConfigError);
  CHECK_THROWS_AS(scheme_from_name("AM-DSB"), ConfigError);
  CHECK_THROWS_AS(scheme_from_tag(8), ConfigError);
  CHECK(scheme_from_name("8PSK") == Scheme::PSK8);
}

TEST_CASE("QAM16 constellation: unit mean power against hand-enumerated levels") {
  // oracle: odd levels {-3,-1,1,3} per axis; mean I^2+Q^2 over the 16 points = 10
  double raw = 0;
  for (int i : {-3, -1, 1, 3})
    for (int q : {-3, -1, 1, 3}) raw += i * i + q * q;
  CHECK(raw / 16.0 == 10.0);
  const auto pts = constellation(Scheme::QAM16);
  double p = 0;
  for (const auto& s : pts) p += std::norm(s);
  CHECK(std::abs(p / 16.0 - 1.0) < 1e-9);
  CHECK(std::abs(pts[0].real() * std::sqrt(10.0)) == doctest::Approx(3.0));
}

TEST_CASE("all schemes: unit average power, constant envelope, Gray neighbours") {
  for (auto s : kAllSchemes) {
    INFO(scheme_name(s));
    if (is_linear(s)) {
      const auto pts = constellation(s);
      double p = 0;
      for (const auto& c : pts) p += std::norm(c);
      CHECK(std::abs(p / static_cast<double>(pts.size()) - 1.0) < 1e-9);
    } else {
      const auto sig = modulate(s, random_bits(64, 3), 8);
      CHECK(sig.size() == 64 * 8);
      for (const auto& c : sig) CHECK(std::abs(std::abs(c) - 1.0) < 1e-12);
    }
  }
  // Gray: adjacent 8PSK phases differ in exactly one bit
  const auto psk = constellation(Scheme::PSK8);
  for (unsigned a = 0; a < 8; ++a)
    for (unsigned b = 0; b < 8; ++b) {
      const double d = std::abs(psk[a] - psk[b]);
      if (a != b && d < 0.8) CHECK(__builtin_popcount(a ^ b) == 1);
    }
  // modulation is deterministic
  const auto bits = random_bits(60, 9);
  CHECK(modulate(Scheme::GFSK, bits, 8) == modulate(Scheme::GFSK, bits, 8));
}

TEST_CASE("awgn: pass-through, measured noise power, determinism") {
  const auto sig = modulate(Scheme::QPSK, random_bits(2 * 12500, 1), 8);  // 10^5 samples
  CHECK(awgn(sig, kInfiniteSnr, 3) == sig);
  const auto noisy = awgn(sig, 0.0, 3);
  double noise = 0;
  for (std::size_t i = 0; i < sig.size(); ++i) noise += std::norm(noisy[i] - sig[i]);
  noise /= static_cast<double>(sig.size());
  CHECK(std::abs(noise / signal_power(sig) - 1.0) < 0.05);
  CHECK(awgn(sig, 0.0, 3) == noisy);
  CHECK_FALSE(awgn(sig, 0.0, 4) == noisy);
}

TEST_CASE("power accounting within 0.5 dB at 10^4 samples for every scheme") {
  for (auto s : kAllSchemes) {
    const auto k = static_cast<std::size_t>(bits_per_symbol(s));
    const auto sig = modulate(s, random_bits(k * 1250, 11), 8);  // 10^4 samples
    for (int snr : {-10, 0, 10, 18}) {
      const auto noisy = awgn(sig, snr, 100 + static_cast<std::uint64_t>(snr + 20));
      CHECK(std::abs(measured_snr_db(sig, noisy) - snr) < 0.5);
    }
  }
}

TEST_CASE("jamming: zero ratio, exact injected energy, closed-form BER, determinism") {
  const auto bits = random_bits(100000, 21);
  const auto sig = modulate(Scheme::BPSK, bits, 1);
  CHECK(jam(sig, 0.0, 1) == sig);
  CHECK_THROWS_AS(jam(sig, -0.1, 1), ConfigError);

  const auto received = jam(awgn(sig, 40.0, 2), 1.0, 5);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) errors += (received[i].real() < 0) != (bits[i] == 1);
  const double ber = static_cast<double>(errors) / static_cast<double>(bits.size());
  const double theory = q_function(std::sqrt(2.0));
  CHECK(theory == doctest::Approx(0.0786).epsilon(0.01));
  const double se = std::sqrt(theory * (1 - theory) / static_cast<double>(bits.size()));
  CHECK(std::abs(ber - theory) < 3.5 * se);
  CHECK(jam(sig, 1.0, 5) == jam(sig, 1.0, 5));

  // jamming/perturbation parity: injected energy equals p * |x|^2 exactly
  for (double p : {0.01, 0.1, 0.25, 1.0}) {
    const auto j = jam(sig, p, 8);
    double injected = 0, energy = 0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      injected += std::norm(j[i] - sig[i]);
      energy += std::norm(sig[i]);
    }
    CHECK(injected == doctest::Approx(p * energy).epsilon(1e-9));
  }
}

TEST_CASE("block/bit error rates and per-class metrics") {
  const std::vector<int> a{1, 2, 3, 4};
  const std::vector<int> b{5, 6, 7, 8};
  CHECK(bler(a, a) == 0.0);
  CHECK(bler(a, b) == 1.0);
  CHECK_THROWS_AS(bler(std::vector<int>{}, std::vector<int>{}), ConfigError);
  CHECK_THROWS_AS(bler(a, std::vector<int>{1}), ConfigError);
  CHECK(bit_error_rate(std::vector<std::uint8_t>{0, 1, 1, 0}, std::vector<std::uint8_t>{0, 1, 0, 0}) == 0.25);

  // hand-counted 3-class confusion matrix
  const std::vector<int> truth{0, 0, 0, 1, 1, 2, 2, 2, 2};
  const std::vector<int> pred{0, 0, 1, 1, 2, 2, 2, 0, 2};
  const auto cm = ConfusionMatrix::from(pred, truth, 3);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(2, 0) == 1);
  const auto m = per_class_metrics(cm);
  CHECK(m[0].precision == doctest::Approx(2.0 / 3));
  CHECK(m[0].recall == doctest::Approx(2.0 / 3));
  CHECK(m[1].precision == doctest::Approx(0.5));
  CHECK(m[1].recall == doctest::Approx(0.5));
  CHECK(m[2].precision == doctest::Approx(0.75));
  CHECK(m[2].recall == doctest::Approx(0.75));
  CHECK(m[2].f1 == doctest::Approx(0.75));
  CHECK(m[0].false_positives == 1);
  CHECK(m[1].false_negatives == 1);
  const auto s = summarize(cm);
  CHECK(s.accuracy == doctest::Approx(6.0 / 9));
  CHECK(s.false_positives == 3);
}

TEST_CASE("Eb/N0 conversion and Monte-Carlo BPSK against the Q-function") {
  CHECK(ebno_to_snr(0.0, 1.0) == 0.0);
  CHECK(ebno_to_snr(0.0, 4.0 / 7.0) == doctest::Approx(-2.4304).epsilon(1e-4));
  CHECK_THROWS_AS(ebno_to_snr(0.0, 0.0), ConfigError);
  CHECK(bpsk_ber_theory(4.0) == doctest::Approx(1.25e-2).epsilon(0.01));

  const auto est = simulate_bpsk_ber(4.0, 100000, 17);
  CHECK(std::abs(est.ber() - bpsk_ber_theory(4.0)) < 0.1 * bpsk_ber_theory(4.0));
  for (double ebno : {0.0, 2.0, 6.0}) {
    const auto e = simulate_bpsk_ber(ebno, 100000, 23);
    CHECK(std::abs(e.ber() - bpsk_ber_theory(ebno)) < 3.0 * e.standard_error());
  }
  // serial reference and the parallel kernel agree exactly
  const auto s = simulate_bpsk_ber(2.0, 50000, 5, kernels::Exec::serial);
  const auto p = simulate_bpsk_ber(2.0, 50000, 5, kernels::Exec::parallel);
  CHECK(s.errors == p.errors);
}

TEST_CASE("dataset synthesis: size, determinism, schema, split") {
  DatasetConfig cfg;
  cfg.frames_per_cell = 10;
  cfg.seed = 5;
  const auto ds = synthesize_dataset(cfg);
  CHECK(ds.size() == 1600);
  CHECK(ds.indices(Split::train).size() == 8 * 20 * 8);
  for (const auto& f : ds.frames) {
    CHECK(f.finite());
    CHECK(on_snr_grid(f.snr_db));
  }
  CHECK_THROWS_AS(synthesize_dataset(DatasetConfig{.frames_per_cell = 0}), ConfigError);

  cfg.frames_per_cell = 100;
  const auto h1 = dataset_hash(synthesize_dataset(cfg));
  const auto h2 = dataset_hash(synthesize_dataset(cfg, kernels::Exec::serial));
  CHECK(h1 == h2);
  cfg.seed = 6;
  CHECK(dataset_hash(synthesize_dataset(cfg)) != h1);
}

TEST_CASE("dataset frames carry the labelled SNR (power-ratio estimator)") {
  DatasetConfig cfg;
  std::size_t total = 0, within = 0;
  double error_sum = 0;
  for (auto s : kAllSchemes)
    for (int snr : kSnrGrid) {
      if (snr < 0) continue;
      for (std::size_t i = 0; i < 10; ++i) {
        const auto parts = synthesize_frame(s, snr, frame_seed(3, s, snr, i), cfg);
        const double err = measured_snr_db(parts.clean, parts.noisy) - snr;
        error_sum += err;
        within += std::abs(err) <= 1.0;
        ++total;
      }
    }
  // 256 real noise degrees of freedom per frame: sd of the estimate is about 0.38 dB
  CHECK(static_cast<double>(within) / static_cast<double>(total) >= 0.98);
  CHECK(std::abs(error_sum / static_cast<double>(total)) < 0.1);
}

TEST_CASE("dataset file: round trip, hand-built header, errors") {
  DatasetConfig cfg;
  cfg.frames_per_cell = 2;
  const auto ds = synthesize_dataset(cfg);
  const auto path = std::filesystem::temp_directory_path() / "phyadv_test_dataset.bin";
  save_dataset(ds, path);
  const auto back = load_dataset(path, cfg.train_fraction);
  CHECK(dataset_hash(back) == dataset_hash(ds));
  CHECK(back.split == ds.split);

  auto bytes = io::read_file(path);
  CHECK(bytes.size() == 8 + 8 + 4 + ds.size() * (2 + 1024));
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "PHYADVD1");
  CHECK(bytes[8] == (ds.size() & 0xFF));
  CHECK(bytes[16] == 1);  // schema version
  CHECK(bytes[20] == static_cast<std::uint8_t>(ds.frames[0].label));
  CHECK(static_cast<std::int8_t>(bytes[21]) == ds.frames[0].snr_db);

  auto bad = bytes;
  bad[20] = 11;  // analog scheme tags are not part of the schema
  CHECK_THROWS_AS(decode_dataset(bad), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_dataset(truncated), FormatError);
  std::filesystem::remove(path);
}
