// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "phyadv/autoenc/autoencoder.hpp"
#include "phyadv/kernels/parallel.hpp"
#include "phyadv/modclass/attacks.hpp"
#include "phyadv/modclass/classifier.hpp"
#include "phyadv/wireless/channel.hpp"
#include "phyadv/wireless/dataset.hpp"

using namespace phyadv;

namespace {

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

struct ClassifierInputs {
  nn::ModelState model = nn::init_model(modclass::default_classifier_spec(), 1);
  nn::Tensor frames;
  std::vector<int> labels;

  explicit ClassifierInputs(std::size_t per_cell) {
    wireless::DatasetConfig dc;
    dc.frames_per_cell = per_cell;
    dc.snrs = {10};
    const auto ds = wireless::synthesize_dataset(dc);
    std::vector<std::size_t> idx(ds.frames.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    frames = wireless::frames_tensor(ds, idx);
    labels = wireless::frame_labels(ds, idx);
  }
};

void BM_ClassificationGradient(benchmark::State& state) {
  static const ClassifierInputs in(8);  // 64 frames
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::classification_gradient(in.model, in.frames, in.labels, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(in.labels.size()));
}

void BM_PredictClasses(benchmark::State& state) {
  static const ClassifierInputs in(32);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::predict_classes(in.model, in.frames, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(in.labels.size()));
}

void BM_CarliniWagner(benchmark::State& state) {
  static const ClassifierInputs in(2);  // 16 frames
  modclass::CwAttackConfig cw;
  cw.steps = 20;
  cw.search_steps = 2;
  cw.early_abort = false;
  for (auto _ : state)
    benchmark::DoNotOptimize(modclass::cw_l2_attack(in.model, in.frames, in.labels, cw, exec_of(state)));
}

void BM_SynthesizeDataset(benchmark::State& state) {
  wireless::DatasetConfig dc;
  dc.frames_per_cell = 20;
  for (auto _ : state) benchmark::DoNotOptimize(wireless::synthesize_dataset(dc, exec_of(state)));
}

void BM_BpskBer(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(wireless::simulate_bpsk_ber(4.0, 1 << 20, 3, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * (1 << 20));
}

void BM_BlerCurve(benchmark::State& state) {
  autoenc::AutoencoderConfig ac;
  const auto enc = nn::init_model(autoenc::encoder_spec(ac), 1);
  const auto dec = nn::init_model(autoenc::decoder_spec(ac), 2);
  const std::vector<double> grid{0, 4, 8};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        autoenc::bler_curve(enc, dec, grid, 16384, autoenc::ChannelModifier::none(), 5, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 3 * 16384);
}

}  // namespace

BENCHMARK(BM_ClassificationGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictClasses)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CarliniWagner)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SynthesizeDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BpskBer)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlerCurve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
