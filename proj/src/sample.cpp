#include "seqdesign/sample.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "seqdesign/kernels.hpp"

namespace seqdesign {

void GuidanceConfig::validate() const {
    if (step_size < 0.0 || kl_weight < 0.0 || temperature < 0.0 || inner_steps < 0) {
        throw std::invalid_argument(
            "guidance config: step size, KL weight, temperature >= 0 and inner steps >= 0");
    }
}

namespace {

Tensor clamped_log(const Tensor& probs) {
    Tensor out = probs;
    for (double& x : out.data) x = std::log(std::max(x, 1e-30));
    return out;
}

// KL(q || ref) with per-row weights, on the tape.
Var weighted_kl(Tape& tape, Var logits, const Tensor& log_ref,
                const std::vector<double>& row_weight) {
    const Tensor& lt = tape.value(logits);
    Tensor weight({lt.rows(), lt.cols()});
    for (int i = 0; i < lt.rows(); ++i) {
        for (int j = 0; j < lt.cols(); ++j) weight.at(i, j) = row_weight[static_cast<size_t>(i)];
    }
    const Var p = tape.softmax(logits);
    const Var diff = tape.sub(tape.log_softmax(logits), tape.leaf(log_ref));
    return tape.sum_all(tape.mul(tape.mul(p, diff), tape.leaf(std::move(weight))));
}

} // namespace

GuidanceEval guidance_loss_eval(const Denoiser& model, const Tensor& hidden, int t,
                                const Tensor& ref_log_probs,
                                const std::vector<double>& kl_row_weight,
                                const ValueFn& value_fn, const GuidanceConfig& cfg,
                                bool with_grad) {
    Tape tape;
    const Var leaf = tape.leaf(hidden);
    const EncoderOutput enc = model.encode_from_guided(tape, leaf, t, cfg.layer);
    const Var logits = model.decode_logits(tape, enc, true);
    const Var kl = weighted_kl(tape, logits, ref_log_probs, kl_row_weight);
    const Var value = value_fn(tape, enc);
    const Var loss = tape.sub(tape.scale(kl, cfg.kl_weight), tape.scale(value, cfg.value_weight));
    GuidanceEval out;
    out.kl = tape.scalar(kl);
    out.value = tape.scalar(value);
    out.loss = tape.scalar(loss);
    out.probs = row_softmax(tape.value(logits));
    if (with_grad) {
        tape.backward(loss);
        out.grad = tape.grad(leaf);
    }
    return out;
}

NosStepResult nos_step(const Denoiser& model, Tensor hidden, int t,
                       const Tensor& ref_probs, const std::vector<double>& kl_row_weight,
                       const ValueFn& value_fn, const GuidanceConfig& cfg, Rng& rng) {
    cfg.validate();
    const Tensor log_ref = clamped_log(ref_probs);
    NosStepResult result;

    const bool active = cfg.step_size > 0.0 && cfg.inner_steps > 0;
    if (active) {
        Tensor adagrad_acc = Tensor::zeros(hidden.shape);
        const double noise_scale =
            cfg.temperature > 0.0 ? std::sqrt(2.0 * cfg.step_size * cfg.temperature) : 0.0;
        for (int k = 0; k < cfg.inner_steps; ++k) {
            const GuidanceEval eval = guidance_loss_eval(model, hidden, t, log_ref, kl_row_weight,
                                                         value_fn, cfg, true);
            result.inner_losses.push_back(eval.loss);
            for (size_t i = 0; i < hidden.data.size(); ++i) {
                const double g = eval.grad.data[i];
                double step = cfg.step_size * g;
                if (cfg.optimizer == InnerOptimizer::adagrad) {
                    adagrad_acc.data[i] += g * g;
                    step = cfg.step_size * g / std::sqrt(adagrad_acc.data[i] + 1e-10);
                }
                hidden.data[i] -= step;
            }
            if (noise_scale > 0.0) {
                for (double& x : hidden.data) x += noise_scale * rng.normal();
            }
        }
    }

    const GuidanceEval final_eval = guidance_loss_eval(model, hidden, t, log_ref, kl_row_weight,
                                                       value_fn, cfg, false);
    result.hidden = std::move(hidden);
    result.probs = final_eval.probs;
    result.kl = final_eval.kl;
    result.value = final_eval.value;
    return result;
}

namespace {

std::vector<double> kl_row_weights(const GuidanceConfig& cfg, const Sequence* w,
                                   int length, int mask, double unmask_prob) {
    std::vector<double> weight(static_cast<size_t>(length), 1.0);
    if (cfg.kl_form == KlForm::transition && w != nullptr) {
        for (int i = 0; i < length; ++i) {
            weight[static_cast<size_t>(i)] = (*w)[i] == mask ? unmask_prob : 0.0;
        }
    }
    return weight;
}

Sequence argmax_decode(const Tensor& probs) {
    Sequence w;
    w.ids.reserve(static_cast<size_t>(probs.rows()));
    for (int i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < probs.cols(); ++j) {
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        }
        w.ids.push_back(best);
    }
    return w;
}

struct Recorder {
    SampleTrace* trace;
    const TraceOptions* options;
    const Denoiser* model;
    const MaskTransition* transition;

    void operator()(int level, const Sequence& snapshot, double kl, double value) const {
        if (trace == nullptr || !options->enabled) return;
        StepRecord rec;
        rec.step = level;
        rec.sequence = snapshot;
        rec.kl = kl;
        rec.value = value;
        if (options->objective) rec.objective = options->objective(snapshot);
        if (options->with_pseudo_ll) {
            rec.pseudo_ll = pseudo_log_likelihood(*model, snapshot, *transition);
        }
        trace->steps.push_back(std::move(rec));
    }
};

Sequence reverse_sample_categorical(const Denoiser& model, const NoiseSchedule& schedule,
                                    const MaskTransition& transition, Rng& rng,
                                    const SamplerInputs& in, const Recorder& record) {
    const DenoiserConfig& cfg = model.config();
    const int length = cfg.length;
    const int mask = cfg.vocab - 1;
    const int steps = schedule.steps;

    Sequence w(std::vector<int>(static_cast<size_t>(length), mask));
    if (in.seed != nullptr) {
        const Sequence corrupted_seed = mask_forward(*in.seed, steps, transition, rng);
        w = merge_conserved(w, corrupted_seed, *in.conserved);
    }
    record(steps, w, 0.0, 0.0);

    for (int t = steps; t >= 1; --t) {
        Tensor probs;
        double kl = 0.0;
        double value = 0.0;
        const double unmask = transition.unmask_prob(t);
        if (in.guidance != nullptr) {
            const GuidanceConfig& gcfg = in.guidance->config;
            Tape tape;
            const EncoderOutput enc = model.encode(tape, w, t);
            const Tensor ref_probs = model.token_distribution_from(tape, enc, true);
            const Tensor hidden = gcfg.layer == GuidanceLayer::first
                                      ? tape.value(enc.embedding)
                                      : tape.value(enc.hidden);
            const NosStepResult res =
                nos_step(model, hidden, t, ref_probs,
                         kl_row_weights(gcfg, &w, length, mask, unmask),
                         in.guidance->value_fn, gcfg, rng);
            probs = res.probs;
            kl = res.kl;
            value = res.value;
        } else {
            probs = model.token_distribution(w, t, true);
        }

        for (int i = 0; i < length; ++i) {
            if (w[i] != mask) continue;  // absorbing posterior never re-masks
            if (rng.uniform() < unmask) {
                std::vector<double> row(static_cast<size_t>(cfg.vocab));
                for (int j = 0; j < cfg.vocab; ++j) row[static_cast<size_t>(j)] = probs.at(i, j);
                w[i] = rng.categorical(row);
            }
        }
        if (in.seed != nullptr) {
            const Sequence corrupted_seed = mask_forward(*in.seed, t - 1, transition, rng);
            w = merge_conserved(w, corrupted_seed, *in.conserved);
        }
        record(t - 1, w, kl, value);
    }
    return w;
}

Sequence reverse_sample_gaussian(const Denoiser& model, const NoiseSchedule& schedule,
                                 const MaskTransition& transition, Rng& rng,
                                 const SamplerInputs& in, const Recorder& record) {
    (void)transition;
    const DenoiserConfig& cfg = model.config();
    const int length = cfg.length;
    const int steps = schedule.steps;

    Tensor x({length, cfg.embed_dim});
    for (double& v : x.data) v = rng.normal();

    Tensor seed_embedding;
    if (in.seed != nullptr) {
        seed_embedding = Tensor({length, cfg.embed_dim});
        const Tensor& table = model.embedding_matrix();
        for (int i = 0; i < length; ++i) {
            for (int j = 0; j < cfg.embed_dim; ++j) {
                seed_embedding.at(i, j) = table.at((*in.seed)[i], j);
            }
        }
        const Tensor corrupted = gaussian_forward(seed_embedding, steps, schedule, rng);
        for (int i = 0; i < length; ++i) {
            if ((*in.conserved)[i]) {
                for (int j = 0; j < cfg.embed_dim; ++j) x.at(i, j) = corrupted.at(i, j);
            }
        }
    }

    auto merge_rows = [&](Tensor& target, const Tensor& source) {
        for (int i = 0; i < length; ++i) {
            if ((*in.conserved)[i]) {
                for (int j = 0; j < cfg.embed_dim; ++j) target.at(i, j) = source.at(i, j);
            }
        }
    };

    if (record.trace != nullptr && record.options->enabled) {
        Tape tape;
        const EncoderOutput enc = model.encode_from_embedding(tape, tape.leaf(x), steps);
        record(steps, argmax_decode(model.token_distribution_from(tape, enc, true)), 0.0, 0.0);
    }

    for (int t = steps; t >= 1; --t) {
        Tensor probs;
        double kl = 0.0;
        double value = 0.0;
        {
            Tape tape;
            const EncoderOutput enc = model.encode_from_embedding(tape, tape.leaf(x), t);
            probs = model.token_distribution_from(tape, enc, true);
            if (in.guidance != nullptr) {
                const GuidanceConfig& gcfg = in.guidance->config;
                const Tensor ref_probs = probs;
                const Tensor hidden =
                    gcfg.layer == GuidanceLayer::first ? x : tape.value(enc.hidden);
                const NosStepResult res =
                    nos_step(model, hidden, t, ref_probs,
                             kl_row_weights(gcfg, nullptr, length, cfg.vocab - 1, 1.0),
                             in.guidance->value_fn, gcfg, rng);
                probs = res.probs;
                kl = res.kl;
                value = res.value;
                // Guiding the first layer moves the noisy embedding itself.
                if (gcfg.layer == GuidanceLayer::first) x = res.hidden;
            }
        }

        // Expected clean embedding under the (guided) token distribution.
        Tensor xhat0({length, cfg.embed_dim});
        kernels::matmul(probs.data.data(), model.embedding_matrix().data.data(),
                        xhat0.data.data(), length, cfg.vocab, cfg.embed_dim);

        const auto [mean, variance] = gaussian_posterior(x, xhat0, t, schedule);
        x = mean;
        if (variance > 0.0) {
            const double stddev = std::sqrt(variance);
            for (double& v : x.data) v += stddev * rng.normal();
        }
        if (in.seed != nullptr) {
            const Tensor corrupted = gaussian_forward(seed_embedding, t - 1, schedule, rng);
            merge_rows(x, corrupted);
        }
        if (t > 1) record(t - 1, argmax_decode(probs), kl, value);

        if (t == 1) {
            // Final decode from x_0.
            Tape tape;
            const EncoderOutput enc = model.encode_from_embedding(tape, tape.leaf(x), 0);
            const Tensor final_probs = model.token_distribution_from(tape, enc, true);
            Sequence w;
            w.ids.reserve(static_cast<size_t>(length));
            for (int i = 0; i < length; ++i) {
                std::vector<double> row(static_cast<size_t>(cfg.vocab));
                for (int j = 0; j < cfg.vocab; ++j) row[static_cast<size_t>(j)] = final_probs.at(i, j);
                w.ids.push_back(rng.categorical(row));
            }
            if (in.seed != nullptr) w = merge_conserved(w, *in.seed, *in.conserved);
            record(0, w, kl, value);
            return w;
        }
    }
    throw std::logic_error("reverse_sample_gaussian: unreachable");
}

} // namespace

Sequence reverse_sample(const Denoiser& model, const NoiseSchedule& schedule,
                        CorruptionKind kind, Rng& rng, const SamplerInputs& inputs) {
    const DenoiserConfig& cfg = model.config();
    if ((inputs.seed == nullptr) != (inputs.conserved == nullptr)) {
        throw std::invalid_argument("reverse_sample: seed and conserved mask come together");
    }
    if (inputs.seed != nullptr) {
        if (inputs.seed->length() != cfg.length || inputs.conserved->length() != cfg.length) {
            throw std::invalid_argument("reverse_sample: seed/mask length mismatch");
        }
        for (int id : inputs.seed->ids) {
            if (id < 0 || id >= cfg.vocab - 1) {
                throw std::invalid_argument("reverse_sample: seed must be clean (no masks)");
            }
        }
    }
    if (inputs.guidance != nullptr) inputs.guidance->config.validate();

    if (inputs.guidance != nullptr && inputs.conserved != nullptr &&
        inputs.conserved->count_conserved() == inputs.conserved->length()) {
        std::cerr << "warning: guided infill with every position conserved is a no-op\n";
        return *inputs.seed;
    }

    const MaskTransition transition = mask_transition(schedule, cfg.vocab - 1);
    const Recorder record{inputs.trace, &inputs.trace_options, &model, &transition};
    if (kind == CorruptionKind::categorical) {
        return reverse_sample_categorical(model, schedule, transition, rng, inputs, record);
    }
    return reverse_sample_gaussian(model, schedule, transition, rng, inputs, record);
}

Sequence unguided_sample(const Denoiser& model, const NoiseSchedule& schedule,
                         CorruptionKind kind, Rng& rng, SampleTrace* trace,
                         const TraceOptions& trace_options) {
    SamplerInputs in;
    in.trace = trace;
    in.trace_options = trace_options;
    return reverse_sample(model, schedule, kind, rng, in);
}

Sequence nos_sample(const Denoiser& model, const Guidance& guidance,
                    const NoiseSchedule& schedule, CorruptionKind kind,
                    const PositionMask* conserved, const Sequence* seed, Rng& rng,
                    SampleTrace* trace, const TraceOptions& trace_options) {
    SamplerInputs in;
    in.seed = seed;
    in.conserved = conserved;
    in.guidance = &guidance;
    in.trace = trace;
    in.trace_options = trace_options;
    return reverse_sample(model, schedule, kind, rng, in);
}

Sequence infill(const Denoiser& model, const Sequence& seed, const PositionMask& conserved,
                const NoiseSchedule& schedule, CorruptionKind kind,
                const Guidance* guidance, Rng& rng, SampleTrace* trace,
                const TraceOptions& trace_options) {
    SamplerInputs in;
    in.seed = &seed;
    in.conserved = &conserved;
    in.guidance = guidance;
    in.trace = trace;
    in.trace_options = trace_options;
    return reverse_sample(model, schedule, kind, rng, in);
}

Sequence autoregressive_mode_sample(const Denoiser& model, const NoiseSchedule& schedule,
                                    Rng& rng, const Guidance* guidance) {
    const DenoiserConfig& cfg = model.config();
    const int length = cfg.length;
    const int mask = cfg.vocab - 1;
    const MaskTransition transition = mask_transition(schedule, mask);

    Sequence w(std::vector<int>(static_cast<size_t>(length), mask));
    for (int i = 0; i < length; ++i) {
        const double fraction = static_cast<double>(length - i) / length;
        const int t = timestep_for_mask_fraction(transition, fraction);
        Tensor probs;
        if (guidance != nullptr) {
            const GuidanceConfig& gcfg = guidance->config;
            Tape tape;
            const EncoderOutput enc = model.encode(tape, w, t);
            const Tensor ref_probs = model.token_distribution_from(tape, enc, true);
            const Tensor hidden = gcfg.layer == GuidanceLayer::first
                                      ? tape.value(enc.embedding)
                                      : tape.value(enc.hidden);
            const NosStepResult res =
                nos_step(model, hidden, t, ref_probs,
                         kl_row_weights(gcfg, &w, length, mask, transition.unmask_prob(t)),
                         guidance->value_fn, gcfg, rng);
            probs = res.probs;
        } else {
            probs = model.token_distribution(w, t, true);
        }
        std::vector<double> row(static_cast<size_t>(cfg.vocab));
        for (int j = 0; j < cfg.vocab; ++j) row[static_cast<size_t>(j)] = probs.at(i, j);
        w[i] = rng.categorical(row);  // every prefix is fixed once sampled
    }
    return w;
}

MhResult mh_mcmc_sample(const std::function<double(const Sequence&)>& energy,
                        const Sequence& seed, double temperature, int steps,
                        const Alphabet& alphabet, Rng& rng,
                        const PositionMask* immutable) {
    if (temperature <= 0.0) throw std::invalid_argument("mh_mcmc: temperature must be positive");
    std::vector<int> mutable_positions;
    for (int i = 0; i < seed.length(); ++i) {
        if (immutable == nullptr || !(*immutable)[i]) mutable_positions.push_back(i);
    }
    if (mutable_positions.empty()) throw std::invalid_argument("mh_mcmc: nothing to mutate");
    std::vector<int> tokens;
    for (int i = 0; i < alphabet.size(); ++i) {
        if (i != alphabet.pad_index()) tokens.push_back(i);
    }

    MhResult result;
    result.sequence = seed;
    result.energy_trace.reserve(static_cast<size_t>(steps));
    double current = energy(seed);
    for (int s = 0; s < steps; ++s) {
        const int pos = mutable_positions[static_cast<size_t>(
            rng.uniform_int(static_cast<int>(mutable_positions.size())))];
        const int tok = tokens[static_cast<size_t>(
            rng.uniform_int(static_cast<int>(tokens.size())))];
        Sequence proposal = result.sequence;
        proposal[pos] = tok;
        const double proposed = energy(proposal);
        const double accept_prob = std::min(1.0, std::exp(-(proposed - current) / temperature));
        if (rng.uniform() < accept_prob) {
            result.sequence = std::move(proposal);
            current = proposed;
            ++result.accepted;
        }
        result.energy_trace.push_back(current);
    }
    return result;
}

double pseudo_log_likelihood(const Denoiser& model, const Sequence& w,
                             const MaskTransition& transition) {
    const int mask = transition.mask_index;
    const int length = w.length();
    std::vector<double> terms(static_cast<size_t>(length), 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < length; ++i) {
        if (w[i] == mask) continue;
        Sequence masked = w;
        masked[i] = mask;
        const Tensor probs = model.token_distribution(masked, 1, true);
        terms[static_cast<size_t>(i)] = std::log(std::max(probs.at(i, w[i]), 1e-300));
    }
    double total = 0.0;
    for (double v : terms) total += v;
    return total;
}

double mean_pseudo_log_likelihood(const Denoiser& model, const Sequence& w,
                                  const MaskTransition& transition) {
    int scored = 0;
    for (int id : w.ids) scored += id != transition.mask_index;
    if (scored == 0) return 0.0;
    return pseudo_log_likelihood(model, w, transition) / scored;
}

} // namespace seqdesign
