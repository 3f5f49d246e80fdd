#include "phyadv/modclass/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "phyadv/errors.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::modclass {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Logit margin required to call a frame misclassified, so the verdict cannot
// flip under a differently-batched re-evaluation.
constexpr double kSuccessMargin = 1e-6;

bool misclassified(std::span<const double> z, int label, double margin) {
  const auto t = static_cast<std::size_t>(label);
  for (std::size_t j = 0; j < z.size(); ++j)
    if (j != t && z[j] > z[t] + margin) return true;
  return false;
}

struct FrameState {
  std::vector<double> x;
  int label = 0;
  double radius = 0.0;
  double x_norm2 = 0.0;
  double lo = 0.0, hi = 0.0, c = 0.0;
  std::vector<double> delta, m, v;
  std::vector<double> step_best, best;
  double step_best_l2 = kInf, best_l2 = kInf;
  double last_check = kInf;
  bool running = false;  // inside the current search step
  bool done = false;     // no further search (trivial success)
  CwResult result;
};

void run_chunk(const nn::ModelState& model, std::span<FrameState> frames, const nn::Shape& frame_shape,
               const CwAttackConfig& cfg) {
  const std::size_t dim = frames.front().x.size();
  const std::size_t check_every = std::max<std::size_t>(1, cfg.steps / 10);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  // trivial success: already misclassified at delta = 0
  {
    nn::Shape s = frame_shape;
    s.insert(s.begin(), frames.size());
    nn::Tensor batch(s);
    for (std::size_t i = 0; i < frames.size(); ++i) std::copy(frames[i].x.begin(), frames[i].x.end(), batch.row(i).begin());
    const auto z = nn::logits(model, batch);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (misclassified(z.row(i), frames[i].label, kSuccessMargin)) {
        frames[i].done = true;
        frames[i].best.assign(dim, 0.0);
        frames[i].best_l2 = 0.0;
      }
    }
  }

  for (std::size_t s = 0; s < cfg.search_steps; ++s) {
    for (auto& f : frames) {
      if (f.done) continue;
      f.c = std::sqrt(f.lo * f.hi);
      f.delta.assign(dim, 0.0);
      f.m.assign(dim, 0.0);
      f.v.assign(dim, 0.0);
      f.step_best_l2 = kInf;
      f.last_check = kInf;
      f.running = true;
    }
    for (std::size_t it = 0; it < cfg.steps; ++it) {
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < frames.size(); ++i)
        if (!frames[i].done && frames[i].running) active.push_back(i);
      if (active.empty()) break;

      nn::Shape shape = frame_shape;
      shape.insert(shape.begin(), active.size());
      nn::Tensor batch(shape);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const auto& f = frames[active[a]];
        auto r = batch.row(a);
        for (std::size_t k = 0; k < dim; ++k) r[k] = f.x[k] + f.delta[k];
      }
      nn::Tape tape;
      const auto z = nn::logits(model, batch, &tape);
      nn::Tensor dz(z.shape());
      std::vector<double> objective(active.size());
      for (std::size_t a = 0; a < active.size(); ++a) {
        auto& f = frames[active[a]];
        const auto zr = z.row(a);
        const auto t = static_cast<std::size_t>(f.label);
        std::size_t other = t == 0 ? 1 : 0;
        for (std::size_t j = 0; j < zr.size(); ++j)
          if (j != t && zr[j] > zr[other]) other = j;
        const double gap = zr[t] - zr[other];
        const double d2 = nn::squared_norm(f.delta);
        objective[a] = d2 + f.c * std::max(gap, -cfg.confidence);
        if (misclassified(zr, f.label, kSuccessMargin) && d2 < f.step_best_l2 * f.step_best_l2) {
          f.step_best_l2 = std::sqrt(d2);
          f.step_best = f.delta;
        }
        if (gap > -cfg.confidence) {
          dz.row(a)[t] = f.c;
          dz.row(a)[other] = -f.c;
        }
      }
      const auto g = nn::backward(model, tape, dz, nn::GradTarget::input_only);
      for (std::size_t a = 0; a < active.size(); ++a) {
        auto& f = frames[active[a]];
        const auto gr = g.input.row(a);
        f.result.record.iterations++;
        const auto t = static_cast<double>(it + 1);
        const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
        for (std::size_t k = 0; k < dim; ++k) {
          const double gk = gr[k] + 2.0 * f.delta[k];
          f.m[k] = b1 * f.m[k] + (1 - b1) * gk;
          f.v[k] = b2 * f.v[k] + (1 - b2) * gk * gk;
          f.delta[k] -= cfg.learning_rate * (f.m[k] / c1) / (std::sqrt(f.v[k] / c2) + eps);
        }
        nn::project_l2_ball(f.delta, f.radius);
        if (cfg.early_abort && (it + 1) % check_every == 0) {
          if (objective[a] > 0.9999 * f.last_check) f.running = false;
          f.last_check = objective[a];
        }
      }
    }
    for (auto& f : frames) {
      if (f.done) continue;
      const bool ok = std::isfinite(f.step_best_l2);
      if (ok) {
        f.hi = f.c;
        if (f.step_best_l2 < f.best_l2) {
          f.best_l2 = f.step_best_l2;
          f.best = f.step_best;
        }
      } else {
        f.lo = f.c;
      }
      f.result.record.trace.push_back({f.c, ok, f.step_best_l2, f.best_l2});
    }
  }

  for (auto& f : frames) {
    auto& r = f.result.record;
    r.success = std::isfinite(f.best_l2);
    f.result.delta = nn::Tensor(frame_shape, r.success ? f.best : std::vector<double>(dim, 0.0));
    r.l2 = r.success ? f.best_l2 : 0.0;
    const double xn = std::sqrt(f.x_norm2);
    r.l2_ratio = xn > 0 ? r.l2 / xn : 0.0;
    r.power_ratio = f.x_norm2 > 0 ? r.l2 * r.l2 / f.x_norm2 : 0.0;
  }
}

}  // namespace

void CwAttackConfig::validate() const {
  if (!(confidence >= 0)) throw ConfigError("cw.confidence must be >= 0");
  if (steps == 0) throw ConfigError("cw.steps must be >= 1");
  if (search_steps == 0) throw ConfigError("cw.search_steps must be >= 1");
  if (!(c_min > 0) || !(c_max > c_min)) throw ConfigError("cw.c range must satisfy 0 < c_min < c_max");
  if (!(learning_rate > 0)) throw ConfigError("cw.learning_rate must be positive");
  if (!(max_power_ratio >= 0)) throw ConfigError("cw.max_power_ratio must be >= 0");
}

std::vector<CwResult> cw_l2_attack(const nn::ModelState& model, const nn::Tensor& frames, std::span<const int> labels,
                                   const CwAttackConfig& config, kernels::Exec exec) {
  config.validate();
  const std::size_t n = frames.dim(0);
  if (labels.size() != n) throw ConfigError("label count does not match frame count");
  if (!frames.all_finite()) throw NumericError("cw_l2_attack: non-finite input frame");
  const nn::Shape frame_shape(frames.shape().begin() + 1, frames.shape().end());

  std::vector<FrameState> states(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = states[i];
    const auto r = frames.row(i);
    f.x.assign(r.begin(), r.end());
    f.label = labels[i];
    f.x_norm2 = nn::squared_norm(r);
    f.radius = std::sqrt(config.max_power_ratio * f.x_norm2);
    f.lo = config.c_min;
    f.hi = config.c_max;
  }
  const std::size_t chunks = (n + kCwChunk - 1) / kCwChunk;
  kernels::for_each_index(chunks, exec, [&](std::size_t c) {
    const auto begin = c * kCwChunk;
    run_chunk(model, std::span(states).subspan(begin, std::min(kCwChunk, n - begin)), frame_shape, config);
  });
  std::vector<CwResult> out;
  out.reserve(n);
  for (auto& f : states) out.push_back(std::move(f.result));
  return out;
}

CwResult cw_l2_attack(const nn::ModelState& model, const nn::Tensor& frame, int label, const CwAttackConfig& config) {
  nn::Shape s = frame.shape();
  s.insert(s.begin(), 1);
  const int labels[] = {label};
  return std::move(cw_l2_attack(model, frame.reshaped(s), labels, config, kernels::Exec::serial).front());
}

nn::Tensor fgsm_attack(const nn::ModelState& model, const nn::Tensor& frames, std::span<const int> labels,
                       std::span<const double> epsilon, kernels::Exec exec) {
  const std::size_t n = frames.dim(0);
  if (labels.size() != n || epsilon.size() != n) throw ConfigError("fgsm: batch, label and epsilon counts differ");
  nn::Tensor out(frames.shape());
  const std::size_t chunks = (n + kernels::kGradientChunk - 1) / kernels::kGradientChunk;
  kernels::for_each_index(chunks, exec, [&](std::size_t c) {
    const auto begin = c * kernels::kGradientChunk;
    const auto count = std::min(kernels::kGradientChunk, n - begin);
    nn::Tape tape;
    const auto z = nn::logits(model, kernels::take_rows(frames, begin, count), &tape);
    const auto ce = nn::cross_entropy_logits(z, labels.subspan(begin, count));
    const auto g = nn::backward(model, tape, ce.grad, nn::GradTarget::input_only);
    for (std::size_t i = 0; i < count; ++i) {
      const auto gr = g.input.row(i);
      auto dr = out.row(begin + i);
      const double e = epsilon[begin + i];
      for (std::size_t k = 0; k < gr.size(); ++k) dr[k] = gr[k] > 0 ? e : (gr[k] < 0 ? -e : 0.0);
    }
  });
  return out;
}

nn::Tensor fgsm_attack(const nn::ModelState& model, const nn::Tensor& frame, int label, double epsilon) {
  nn::Shape s = frame.shape();
  s.insert(s.begin(), 1);
  const int labels[] = {label};
  const double eps[] = {epsilon};
  return fgsm_attack(model, frame.reshaped(s), labels, eps, kernels::Exec::serial).reshaped(frame.shape());
}

double fgsm_epsilon_for_ratio(std::span<const double> frame, double power_ratio) {
  if (frame.empty()) return 0.0;
  return std::sqrt(power_ratio * nn::squared_norm(frame) / static_cast<double>(frame.size()));
}

nn::Tensor gaussian_perturbation(const nn::Shape& shape, double l2, std::uint64_t seed) {
  nn::Tensor d(shape);
  if (l2 <= 0) return d;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : d.data()) v = g(rng);
  const double norm = nn::l2_norm(d.data());
  nn::scale(d.data(), l2 / norm);
  return d;
}

nn::Tensor perturbed(const nn::Tensor& frames, const nn::Tensor& deltas) {
  if (frames.shape() != deltas.shape()) throw ConfigError("perturbation shape does not match frames");
  nn::Tensor out = frames;
  nn::axpy(1.0, deltas.data(), out.data());
  return out;
}

nn::Tensor stack_deltas(std::span<const CwResult> results) {
  if (results.empty()) return {};
  nn::Shape s = results.front().delta.shape();
  s.insert(s.begin(), results.size());
  nn::Tensor out(s);
  for (std::size_t i = 0; i < results.size(); ++i)
    std::copy(results[i].delta.data().begin(), results[i].delta.data().end(), out.row(i).begin());
  return out;
}

}  // namespace phyadv::modclass
