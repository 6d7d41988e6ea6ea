#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "seqdesign/model.hpp"
#include "seqdesign/noise.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/seqcore.hpp"

namespace seqdesign {

enum class InnerOptimizer { sgd, adagrad };
// What the guidance KL compares: the denoiser's clean-token predictions, or
// the reverse-transition mixtures they induce. For the absorbing kernel the
// transition form reduces exactly to the denoiser form on masked positions
// scaled by the unmask probability.
enum class KlForm { denoiser, transition };

struct GuidanceConfig {
    double step_size = 0.5;      // eta; 0 disables the inner loop
    double kl_weight = 0.1;      // lambda
    double value_weight = 1.0;   // weight on the value term (Langevin loss)
    double temperature = 0.0;    // tau; scales the sqrt(2*eta*tau) noise
    int inner_steps = 5;         // K
    InnerOptimizer optimizer = InnerOptimizer::sgd;
    GuidanceLayer layer = GuidanceLayer::last;
    KlForm kl_form = KlForm::denoiser;

    void validate() const;
};

// A guidance bundle: the Langevin knobs plus the value function they ascend.
struct Guidance {
    GuidanceConfig config;
    ValueFn value_fn;
};

struct StepRecord {
    int step = 0;            // diffusion step index (T..0 order of recording)
    Sequence sequence;       // snapshot (greedy decode for continuous chains)
    double objective = 0.0;
    double pseudo_ll = 0.0;
    double kl = 0.0;
    double value = 0.0;
};

// T+1 snapshots for a T-step chain: the initial state plus one per step.
struct SampleTrace {
    std::vector<StepRecord> steps;
};

struct TraceOptions {
    bool enabled = false;
    bool with_pseudo_ll = false;
    std::function<double(const Sequence&)> objective;  // optional scorer
};

// One guided Langevin inner loop at diffusion step t (K steps on the hidden
// state). `ref_probs` is the reference token distribution computed from the
// unguided hidden state; `kl_row_weight` weights each position's KL term.
struct NosStepResult {
    Tensor hidden;
    Tensor probs;        // token distribution decoded from the final hidden
    double kl = 0.0;     // final KL against the reference, summed over rows
    double value = 0.0;  // final value
    std::vector<double> inner_losses;
};

NosStepResult nos_step(const Denoiser& model, Tensor hidden, int t,
                       const Tensor& ref_probs, const std::vector<double>& kl_row_weight,
                       const ValueFn& value_fn, const GuidanceConfig& cfg, Rng& rng);

// One evaluation of the guidance loss
//   kl_weight * KL(q || ref) - value_weight * value
// at a fixed hidden state, optionally with its gradient. nos_step and the
// LaMBO-2 projected Langevin loop are both built on this.
struct GuidanceEval {
    Tensor probs;
    double kl = 0.0;
    double value = 0.0;
    double loss = 0.0;
    Tensor grad;  // filled when with_grad
};

GuidanceEval guidance_loss_eval(const Denoiser& model, const Tensor& hidden, int t,
                                const Tensor& ref_log_probs,
                                const std::vector<double>& kl_row_weight,
                                const ValueFn& value_fn, const GuidanceConfig& cfg,
                                bool with_grad);

// Reverse-process sampling. Categorical chains start from all-[MASK] and
// apply the absorbing posterior mixture; continuous chains start from
// N(0, I) in embedding space and apply the Gaussian posterior around the
// expected clean embedding. Optional guidance runs nos_step at every t;
// optional (seed, conserved) infills by re-corrupting the seed each step.
struct SamplerInputs {
    const Sequence* seed = nullptr;
    const PositionMask* conserved = nullptr;
    const Guidance* guidance = nullptr;
    SampleTrace* trace = nullptr;
    TraceOptions trace_options;
};

Sequence reverse_sample(const Denoiser& model, const NoiseSchedule& schedule,
                        CorruptionKind kind, Rng& rng, const SamplerInputs& inputs = {});

Sequence unguided_sample(const Denoiser& model, const NoiseSchedule& schedule,
                         CorruptionKind kind, Rng& rng, SampleTrace* trace = nullptr,
                         const TraceOptions& trace_options = {});

// Guided reverse sampling; kind categorical = NOS-D, gaussian = NOS-C.
Sequence nos_sample(const Denoiser& model, const Guidance& guidance,
                    const NoiseSchedule& schedule, CorruptionKind kind,
                    const PositionMask* conserved, const Sequence* seed, Rng& rng,
                    SampleTrace* trace = nullptr, const TraceOptions& trace_options = {});

// Infilling: conserved positions track a freshly corrupted seed at every
// step and equal the seed exactly in the result. All-conserved with guidance
// warns and returns the seed.
Sequence infill(const Denoiser& model, const Sequence& seed, const PositionMask& conserved,
                const NoiseSchedule& schedule, CorruptionKind kind,
                const Guidance* guidance, Rng& rng, SampleTrace* trace = nullptr,
                const TraceOptions& trace_options = {});

// Left-to-right sampling from the masked model: unmasks exactly one position
// per step, with the timestep recovered from the mask fraction. Guidance, if
// given, runs on the hidden state before each position is sampled.
Sequence autoregressive_mode_sample(const Denoiser& model, const NoiseSchedule& schedule,
                                    Rng& rng, const Guidance* guidance = nullptr);

// Metropolis-Hastings over single-token mutations with
// p(accept) = min(1, exp(-dE / T)). Proposals draw a uniform mutable
// position and a uniform non-pad data token.
struct MhResult {
    Sequence sequence;
    std::vector<double> energy_trace;  // energy after every proposal
    int accepted = 0;
};

MhResult mh_mcmc_sample(const std::function<double(const Sequence&)>& energy,
                        const Sequence& seed, double temperature, int steps,
                        const Alphabet& alphabet, Rng& rng,
                        const PositionMask* immutable = nullptr);

// Sum over non-mask positions of log p(w_i | w with position i masked, t=1).
double pseudo_log_likelihood(const Denoiser& model, const Sequence& w,
                             const MaskTransition& transition);
// Same, divided by the number of scored positions; comparable across
// sequences with different mask counts.
double mean_pseudo_log_likelihood(const Denoiser& model, const Sequence& w,
                                  const MaskTransition& transition);

} // namespace seqdesign
