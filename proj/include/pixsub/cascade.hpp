#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pixsub/formation.hpp"
#include "pixsub/refine.hpp"
#include "pixsub/toynet.hpp"

namespace pixsub {

// T refinement stages; between stages the estimate is blurred with the
// formation kernel and pixel-substituted, so every stage past the first works
// on an input that satisfies the observation exactly. The cascade returns the
// last refined image; the per-stage substituted images live in the trace.
struct CascadeConfig {
  int stages_count = 1;
  DegradeSpec degrade;
  std::vector<RefinerSpec> stages;
  bool stage1_upsamples = true;  // stage 1 consumes the LR observation itself
  double kernel_sigma = 0.0;     // 0 = derive from the degradation spec
  int kernel_size = 0;
  bool shared_weights = false;  // stages >= 3 reuse the stage-2 net
  int net_features = 16;
  int net_blocks = 2;

  Kernel cascade_kernel() const {
    DegradeSpec spec = degrade;
    if (kernel_sigma > 0.0) spec.sigma = kernel_sigma;
    if (kernel_size > 0) spec.kernel_size = kernel_size;
    return formation_kernel(spec);
  }
};

struct StageTrace {
  Image refined;
  Image blurred;
  Image substituted;
  SubstitutionRecord record;
  ResidualReport refined_residual;      // refined estimate pushed through blur+decimate
  ResidualReport substituted_residual;  // substituted image under decimation alone
  bool guard_tripped = false;
  int iterations = 0;
};

struct CascadeResult {
  Image output;  // refined image of the last stage
  std::vector<StageTrace> stages;
  bool guard_tripped = false;
};

namespace detail {

inline const ToyNet* cascade_net(const std::vector<ToyNet>& nets, size_t t, bool shared) {
  if (t < nets.size() && nets[t].features > 0) return &nets[t];
  if (shared && t >= 2 && nets.size() > 1 && nets[1].features > 0) return &nets[1];
  return nullptr;
}

}  // namespace detail

inline CascadeResult run_cascade(const Image& lr, const CascadeConfig& cfg,
                                 const std::vector<ToyNet>& nets) {
  if (cfg.stages_count < 1) throw ConfigError("cascade needs at least one stage");
  if (static_cast<int>(cfg.stages.size()) != cfg.stages_count)
    throw ConfigError("cascade stage specs do not match the stage count");
  if (!cfg.stage1_upsamples)
    throw ConfigError("cascades with externally upsampled input are not supported");

  const Kernel k = cfg.cascade_kernel();
  const ScaleFactor s = cfg.degrade.scale;
  CascadeResult res;
  Image input = lr;

  for (int t = 0; t < cfg.stages_count; ++t) {
    const bool first = t == 0;
    const RefinerSpec& spec = cfg.stages[static_cast<size_t>(t)];
    StageTrace st;

    switch (spec.kind) {
      case RefinerKind::Bicubic:
        st.refined = refine_bicubic(input, s, first);
        break;
      case RefinerKind::Ibp: {
        IterResult r = refine_ibp(refine_bicubic(input, s, first), lr, k, s, spec.iters, spec.step);
        st.refined = std::move(r.image);
        st.guard_tripped = r.guard_tripped;
        st.iterations = r.iterations;
        break;
      }
      case RefinerKind::GradPrior: {
        IterResult r = refine_gradprior(refine_bicubic(input, s, first), lr, k, s, spec.iters,
                                        spec.step, spec.lambda_prior);
        st.refined = std::move(r.image);
        st.guard_tripped = r.guard_tripped;
        st.iterations = r.iterations;
        break;
      }
      case RefinerKind::ToyNet: {
        const ToyNet* net = detail::cascade_net(nets, static_cast<size_t>(t), cfg.shared_weights);
        if (!net) throw ConfigError("stage " + std::to_string(t + 1) + " has no network weights");
        if (net->upsampler != (first && s.s > 1))
          throw ConfigError("stage " + std::to_string(t + 1) +
                            " network upsampler does not fit its position");
        if (net->upsampler && net->scale != s.s)
          throw ConfigError("stage " + std::to_string(t + 1) + " network was built for scale " +
                            std::to_string(net->scale));
        st.refined = tensor_to_image(toynet_forward(*net, image_to_tensor(input)));
        break;
      }
    }

    if (st.refined.width != lr.width * s.s || st.refined.height != lr.height * s.s)
      throw DimensionError("stage " + std::to_string(t + 1) + " produced wrong dimensions");

    // The blur + substitution after the last stage feeds nothing, but the
    // trace still reports it so the constraint can be checked at every stage.
    st.refined_residual = constraint_residual(st.refined, lr, k, s);
    st.blurred = convolve(st.refined, k);
    auto [sub, rec] = pixel_substitute(st.blurred, lr, s);
    st.substituted = std::move(sub);
    st.record = rec;
    st.substituted_residual = decimation_residual(st.substituted, lr, s);

    res.guard_tripped = res.guard_tripped || st.guard_tripped;
    input = st.substituted;
    res.stages.push_back(std::move(st));
  }

  res.output = res.stages.back().refined;
  return res;
}

// Load per-stage weight files named in the config. With shared weights,
// stages past the second fall back to the stage-2 file.
inline std::vector<ToyNet> load_cascade_nets(const CascadeConfig& cfg) {
  std::vector<ToyNet> nets(cfg.stages.size());
  for (size_t t = 0; t < cfg.stages.size(); ++t) {
    if (cfg.stages[t].kind != RefinerKind::ToyNet) continue;
    std::string path = cfg.stages[t].weights_path;
    if (path.empty() && cfg.shared_weights && t >= 2) path = cfg.stages[1].weights_path;
    if (path.empty())
      throw ConfigError("stage " + std::to_string(t + 1) + " needs a weights file");
    nets[t] = load_weights(path);
  }
  return nets;
}

inline CascadeResult run_cascade(const Image& lr, const CascadeConfig& cfg) {
  return run_cascade(lr, cfg, load_cascade_nets(cfg));
}

// ---- training ------------------------------------------------------------

struct TrainSample {
  Image lr, hr;
};

struct TrainOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 1;
  std::uint64_t seed = 0;
};

struct TrainLogEntry {
  int stage = 0;
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<ToyNet> nets;
  std::vector<TrainLogEntry> log;
};

namespace detail {

// splitmix64-style mixer; decorrelates per-stage seeds drawn from one root.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One greedily-trained stage: minibatch 1, Adam, seeded reshuffle per epoch.
// formation_lambda > 0 adds the soft observation-consistency term.
inline void train_stage(ToyNet& net, const std::vector<TrainSample>& samples,
                        const std::vector<Image>& stage_inputs, int stage,
                        const CascadeConfig& cfg, const TrainOptions& opts,
                        double formation_lambda, std::vector<TrainLogEntry>& log) {
  const Kernel k = cfg.cascade_kernel();
  const ScaleFactor s = cfg.degrade.scale;
  const auto params = net.parameters();
  const auto grads = net.gradients();
  AdamState adam;
  adam.lr = opts.lr;
  adam.beta1 = opts.beta1;
  adam.beta2 = opts.beta2;
  adam.eps = opts.eps;
  std::mt19937_64 shuffle_rng(mix_seed(opts.seed, 2 * static_cast<std::uint64_t>(stage) + 1));
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  int step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (size_t idx : order) {
      ToyNetTrace trace;
      const Tensor y = toynet_forward(net, image_to_tensor(stage_inputs[idx]), &trace);
      LossResult data = l1_loss(y, image_to_tensor(samples[idx].hr));
      double loss = data.loss;
      Tensor gy = std::move(data.grad);
      if (formation_lambda != 0.0) {
        LossResult form = formation_loss(y, samples[idx].lr, k, s, formation_lambda);
        loss += form.loss;
        for (size_t i = 0; i < gy.data.size(); ++i) gy.data[i] += form.grad.data[i];
      }
      net.zero_grad();
      toynet_backward(net, trace, gy);
      adam_step(params, grads, adam);
      log.push_back({stage, ++step, loss});
    }
  }
}

}  // namespace detail

// Stage-wise greedy training: each stage is trained to map its (frozen)
// predecessor's substituted output to the HR target, then its own outputs are
// baked once as the next stage's inputs.
inline TrainResult train_cascade(const std::vector<TrainSample>& samples, const CascadeConfig& cfg,
                                 const TrainOptions& opts) {
  if (samples.empty()) throw DataError("training needs at least one sample");
  if (cfg.stages_count < 1) throw ConfigError("cascade needs at least one stage");
  if (!cfg.stage1_upsamples)
    throw ConfigError("cascades with externally upsampled input are not supported");
  if (!cfg.stages.empty()) {  // an empty list means "all trainable", for callers building configs by hand
    if (static_cast<int>(cfg.stages.size()) != cfg.stages_count)
      throw ConfigError("cascade stage specs do not match the stage count");
    for (const RefinerSpec& sp : cfg.stages)
      if (sp.kind != RefinerKind::ToyNet)
        throw ConfigError("train_cascade: every stage must be a toynet refiner");
  }
  const ScaleFactor s = cfg.degrade.scale;
  for (const TrainSample& smp : samples) {
    if (smp.hr.width != smp.lr.width * s.s || smp.hr.height != smp.lr.height * s.s ||
        smp.hr.channels != smp.lr.channels)
      throw DimensionError("training pair dimensions do not match the scale factor");
    if (smp.lr.channels != 3) throw DimensionError("training expects RGB images");
  }

  const Kernel k = cfg.cascade_kernel();
  TrainResult res;
  std::vector<Image> inputs;
  inputs.reserve(samples.size());
  for (const TrainSample& smp : samples) inputs.push_back(smp.lr);

  const int trained = cfg.shared_weights ? std::min(cfg.stages_count, 2) : cfg.stages_count;
  for (int t = 0; t < trained; ++t) {
    const bool first = t == 0;
    ToyNet net = ToyNet::create(cfg.net_features, cfg.net_blocks, first && s.s > 1, s.s,
                                detail::mix_seed(opts.seed, 2 * static_cast<std::uint64_t>(t)));
    detail::train_stage(net, samples, inputs, t + 1, cfg, opts, 0.0, res.log);
    res.nets.push_back(std::move(net));

    if (t + 1 < cfg.stages_count) {
      const ToyNet& frozen = res.nets.back();
      for (size_t i = 0; i < samples.size(); ++i) {
        const Image refined = tensor_to_image(toynet_forward(frozen, image_to_tensor(inputs[i])));
        inputs[i] = pixel_substitute(convolve(refined, k), samples[i].lr, s).first;
      }
    }
  }
  while (static_cast<int>(res.nets.size()) < cfg.stages_count) res.nets.push_back(res.nets[1]);
  return res;
}

// Ablation arm: a single network trained with the observation constraint as a
// soft penalty instead of enforced substitution. With lambda = 0 this reduces
// to plain stage-1 training (bit-identical trajectory to a one-stage cascade).
inline TrainResult train_soft_constraint(const std::vector<TrainSample>& samples,
                                         const CascadeConfig& cfg, const TrainOptions& opts,
                                         double lambda) {
  if (samples.empty()) throw DataError("training needs at least one sample");
  if (cfg.stages_count != 1)
    throw ConfigError("train_soft_constraint: soft-loss training is single-stage (T=1)");
  if (!cfg.stages.empty() &&
      (cfg.stages.size() != 1 || cfg.stages[0].kind != RefinerKind::ToyNet))
    throw ConfigError("train_soft_constraint: the stage must be a toynet refiner");
  if (lambda < 0.0) throw ConfigError("train_soft_constraint: lambda must be >= 0");
  const ScaleFactor s = cfg.degrade.scale;
  TrainResult res;
  std::vector<Image> inputs;
  inputs.reserve(samples.size());
  for (const TrainSample& smp : samples) inputs.push_back(smp.lr);

  ToyNet net = ToyNet::create(cfg.net_features, cfg.net_blocks, s.s > 1, s.s,
                              detail::mix_seed(opts.seed, 0));
  detail::train_stage(net, samples, inputs, 1, cfg, opts, lambda, res.log);
  res.nets.push_back(std::move(net));
  return res;
}

}  // namespace pixsub
