#include "seqdesign/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqdesign {

void TrainConfig::validate() const {
    if (steps < 1 || batch_size < 1 || learning_rate <= 0.0 || warmup_steps < 1 ||
        lr_floor < 0.0 || gen_disc_ratio < 1) {
        throw std::invalid_argument("train config: all values must be positive, ratio >= 1");
    }
}

namespace {

// -log p(target) summed over rows, divided by row count; logits on tape.
Var mean_token_cross_entropy(Tape& tape, Var logits, const std::vector<int>& targets) {
    const Tensor& t = tape.value(logits);
    Tensor pick({t.rows(), t.cols()});
    for (int i = 0; i < t.rows(); ++i) {
        pick.at(i, targets[static_cast<size_t>(i)]) = -1.0 / t.rows();
    }
    return tape.sum_all(tape.mul(tape.log_softmax(logits), tape.leaf(std::move(pick))));
}

} // namespace

double diffusion_loss(const Denoiser& model, const std::vector<Sequence>& batch,
                      CorruptionKind kind, const NoiseSchedule& schedule,
                      const MaskTransition& transition, Rng& rng, bool accumulate_grad) {
    if (batch.empty()) return 0.0;
    double total = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const Sequence& w0 : batch) {
        const int t = 1 + rng.uniform_int(schedule.steps);
        Tape tape(accumulate_grad);
        EncoderOutput enc;
        if (kind == CorruptionKind::categorical) {
            const Sequence wt = mask_forward(w0, t, transition, rng);
            enc = model.encode(tape, wt, t);
        } else {
            // x_t is reparameterized through the embedding so its gradient
            // reaches the embedding matrix.
            const Var x0 = model.embed(tape, w0);
            const double abar = schedule.abar(t);
            Tensor noise = Tensor::randn(tape.value(x0).shape, rng,
                                         std::sqrt(1.0 - abar));
            const Var xt = tape.add(tape.scale(x0, std::sqrt(abar)), tape.leaf(std::move(noise)));
            enc = model.encode_from_embedding(tape, xt, t);
        }
        // The model never has to predict [MASK], so the mask logit is
        // suppressed in training exactly as it is at decode time.
        const Var logits = model.decode_logits(tape, enc, true);
        const Var loss = mean_token_cross_entropy(tape, logits, w0.ids);
        total += tape.scalar(loss);
        if (accumulate_grad) tape.backward(tape.scale(loss, inv_batch));
    }
    return total * inv_batch;
}

std::vector<double> smoothed_labels(int label, double abar, int classes) {
    if (label < 0 || label >= classes) throw std::invalid_argument("smoothed_labels: label range");
    if (abar < 0.0 || abar > 1.0) throw std::invalid_argument("smoothed_labels: abar in [0,1]");
    std::vector<double> out(static_cast<size_t>(classes), (1.0 - abar) / classes);
    out[static_cast<size_t>(label)] += abar;
    return out;
}

double discriminator_loss(const Denoiser& model, const std::vector<LabeledExample>& batch,
                          const NoiseSchedule& schedule, const MaskTransition& transition,
                          CorruptionKind kind, Rng& rng, bool accumulate_grad) {
    if (batch.empty()) return 0.0;
    // Count labeled (example, objective) pairs first so each contribution
    // can be scaled for the mean on its own tape.
    int present = 0;
    for (const LabeledExample& ex : batch) {
        for (size_t obj = 0; obj < ex.labels.size(); ++obj) {
            if (ex.labels[obj].has_value()) ++present;
        }
    }
    if (present == 0) return 0.0;
    const double inv_present = 1.0 / present;

    double total = 0.0;
    for (const LabeledExample& ex : batch) {
        bool any = false;
        for (const auto& l : ex.labels) any = any || l.has_value();
        if (!any) continue;

        const int t = 1 + rng.uniform_int(schedule.steps);
        const double abar = schedule.abar(t);
        Tape tape(accumulate_grad);
        EncoderOutput enc;
        if (kind == CorruptionKind::categorical) {
            const Sequence wt = mask_forward(ex.sequence, t, transition, rng);
            enc = model.encode(tape, wt, t);
        } else {
            const Var x0 = model.embed(tape, ex.sequence);
            Tensor noise = Tensor::randn(tape.value(x0).shape, rng, std::sqrt(1.0 - abar));
            const Var xt = tape.add(tape.scale(x0, std::sqrt(abar)), tape.leaf(std::move(noise)));
            enc = model.encode_from_embedding(tape, xt, t);
        }

        Var loss{};
        for (size_t obj = 0; obj < ex.labels.size(); ++obj) {
            if (!ex.labels[obj].has_value()) continue;
            const int classes = model.config().objective_classes[obj];
            const std::vector<double> target = smoothed_labels(*ex.labels[obj], abar, classes);
            const Var head_logits =
                model.objective_head_logits(tape, enc, static_cast<int>(obj));
            const int k = model.config().ensemble_size;
            Tensor pick({k, classes});
            for (int row = 0; row < k; ++row) {
                for (int c = 0; c < classes; ++c) {
                    pick.at(row, c) = -target[static_cast<size_t>(c)] / k;
                }
            }
            const Var ce = tape.sum_all(
                tape.mul(tape.log_softmax(head_logits), tape.leaf(std::move(pick))));
            loss = loss.valid() ? tape.add(loss, ce) : ce;
        }
        total += tape.scalar(loss);
        if (accumulate_grad) tape.backward(tape.scale(loss, inv_present));
    }
    return total * inv_present;
}

std::vector<double> decile_edges_from(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("decile_edges_from: empty");
    std::sort(values.begin(), values.end());
    std::vector<double> edges;
    const size_t n = values.size();
    for (int d = 1; d <= 9; ++d) {
        size_t idx = static_cast<size_t>(d) * n / 10;
        if (idx >= n) idx = n - 1;
        edges.push_back(values[idx]);
    }
    return edges;
}

int discretize_label(double value, double cutoff, const std::vector<double>& decile_edges) {
    if (value < cutoff) return 0;
    int cls = 1;
    for (double edge : decile_edges) {
        if (value > edge) ++cls;
    }
    return std::min(cls, 10);
}

AdamState make_adam_state(const std::vector<Parameter*>& params) {
    AdamState state;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Parameter* p : params) {
        state.m.push_back(Tensor::zeros(p->value.shape));
        state.v.push_back(Tensor::zeros(p->value.shape));
    }
    return state;
}

void adam_step(std::vector<Parameter*>& params, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (size_t j = 0; j < p.value.data.size(); ++j) {
            const double g = p.grad.data[j];
            m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * g;
            v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * g * g;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double lr_at_step(int step, const TrainConfig& config) {
    const double peak = config.learning_rate;
    if (step < config.warmup_steps) {
        return peak * static_cast<double>(step + 1) / config.warmup_steps;
    }
    const int decay_steps = std::max(1, config.steps - config.warmup_steps);
    const double progress =
        std::min(1.0, static_cast<double>(step - config.warmup_steps) / decay_steps);
    return config.lr_floor +
           (peak - config.lr_floor) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void HmmSpec::validate() const {
    if (p01 <= 0.0 || p01 >= 1.0 || p10 <= 0.0 || p10 >= 1.0) {
        throw std::invalid_argument("hmm: transition probabilities in (0,1)");
    }
    if (support0.empty() || support1.empty() ||
        support0.size() != emission0.size() || support1.size() != emission1.size()) {
        throw std::invalid_argument("hmm: support/emission size mismatch");
    }
    for (int tok : support0) {
        if (std::find(support1.begin(), support1.end(), tok) != support1.end()) {
            throw std::invalid_argument("hmm: supports must be disjoint");
        }
    }
}

HmmSpec default_hmm_spec(const Alphabet& alphabet) {
    HmmSpec spec;
    if (alphabet.size() < 21) throw std::invalid_argument("default_hmm_spec: alphabet too small");
    for (int i = 0; i < 10; ++i) spec.support0.push_back(i);
    for (int i = 10; i < 20; ++i) spec.support1.push_back(i);
    const std::vector<double> profile{0.25, 0.2, 0.15, 0.1, 0.08, 0.07, 0.05, 0.04, 0.03, 0.03};
    spec.emission0 = profile;
    spec.emission1 = profile;
    return spec;
}

std::vector<Sequence> sample_hmm_corpus(const HmmSpec& spec, int count, int length, Rng& rng) {
    spec.validate();
    std::vector<Sequence> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Sequence w;
        w.ids.reserve(static_cast<size_t>(length));
        int state = rng.uniform() < spec.stationary0() ? 0 : 1;
        for (int pos = 0; pos < length; ++pos) {
            if (pos > 0) {
                const double flip = state == 0 ? spec.p01 : spec.p10;
                if (rng.uniform() < flip) state = 1 - state;
            }
            const auto& support = state == 0 ? spec.support0 : spec.support1;
            const auto& emission = state == 0 ? spec.emission0 : spec.emission1;
            w.ids.push_back(support[static_cast<size_t>(rng.categorical(emission))]);
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Sequence> sample_planted_corpus(const PlantedSpec& spec, const Alphabet& alphabet,
                                            int count, int length, Rng& rng) {
    if (spec.positions.size() != spec.tokens.size()) {
        throw std::invalid_argument("planted corpus: positions/tokens mismatch");
    }
    // Residue background excludes the pad token.
    std::vector<int> background;
    for (int i = 0; i < alphabet.size(); ++i) {
        if (i != alphabet.pad_index()) background.push_back(i);
    }
    std::vector<Sequence> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Sequence w;
        w.ids.reserve(static_cast<size_t>(length));
        for (int pos = 0; pos < length; ++pos) {
            w.ids.push_back(background[static_cast<size_t>(
                rng.uniform_int(static_cast<int>(background.size())))]);
        }
        for (size_t j = 0; j < spec.positions.size(); ++j) {
            if (rng.uniform() < spec.plant_prob) {
                w.ids[static_cast<size_t>(spec.positions[j])] = spec.tokens[j];
            }
        }
        out.push_back(std::move(w));
    }
    return out;
}

LabeledCorpus label_corpus(const std::vector<Sequence>& corpus,
                           const std::vector<Objective>& objectives,
                           const std::vector<double>& cutoffs, const Alphabet& alphabet) {
    if (objectives.size() != cutoffs.size()) {
        throw std::invalid_argument("label_corpus: one cutoff per objective");
    }
    LabeledCorpus out;
    out.cutoffs = cutoffs;
    std::vector<std::vector<double>> values(objectives.size());
    for (size_t obj = 0; obj < objectives.size(); ++obj) {
        for (const Sequence& w : corpus) {
            values[obj].push_back(objectives[obj].evaluate(w, alphabet));
        }
        std::vector<double> binders;
        for (double v : values[obj]) {
            if (v >= cutoffs[obj]) binders.push_back(v);
        }
        if (binders.empty()) {
            throw std::invalid_argument("label_corpus: no values at or above the cutoff for '" +
                                        objectives[obj].name + "'");
        }
        out.edges.push_back(decile_edges_from(binders));
    }
    out.examples.reserve(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        LabeledExample ex;
        ex.sequence = corpus[i];
        for (size_t obj = 0; obj < objectives.size(); ++obj) {
            ex.labels.push_back(discretize_label(values[obj][i], cutoffs[obj], out.edges[obj]));
        }
        out.examples.push_back(std::move(ex));
    }
    return out;
}

std::vector<double> upsample_weights(const std::vector<LabeledExample>& examples,
                                     const std::vector<int>& classes) {
    std::vector<double> weights(examples.size(), 1.0);
    if (examples.empty()) return weights;
    for (size_t obj = 0; obj < classes.size(); ++obj) {
        std::vector<int> counts(static_cast<size_t>(classes[obj]), 0);
        for (const LabeledExample& ex : examples) {
            if (obj < ex.labels.size() && ex.labels[obj].has_value()) {
                ++counts[static_cast<size_t>(*ex.labels[obj])];
            }
        }
        for (size_t i = 0; i < examples.size(); ++i) {
            const LabeledExample& ex = examples[i];
            if (obj < ex.labels.size() && ex.labels[obj].has_value()) {
                const int c = counts[static_cast<size_t>(*ex.labels[obj])];
                if (c > 0) weights[i] *= 1.0 / c;
            }
        }
    }
    return weights;
}

std::vector<MetricRow> train_loop(Denoiser& model, const std::vector<Sequence>& gen_corpus,
                                  const std::vector<LabeledExample>& labeled_corpus,
                                  const TrainConfig& config, CorruptionKind kind,
                                  const NoiseSchedule& schedule, Rng& rng) {
    config.validate();
    if (gen_corpus.empty()) throw std::invalid_argument("train_loop: empty generative corpus");
    const MaskTransition transition =
        mask_transition(schedule, model.config().vocab - 1);

    std::vector<Parameter*> params = model.parameters();
    AdamState adam = make_adam_state(params);
    Rng batch_rng = rng.substream("batches");
    Rng corrupt_rng = rng.substream("corruption");

    std::vector<double> labeled_weights;
    if (!labeled_corpus.empty()) {
        labeled_weights = config.upsample_minority
                              ? upsample_weights(labeled_corpus, model.config().objective_classes)
                              : std::vector<double>(labeled_corpus.size(), 1.0);
    }

    std::vector<MetricRow> metrics;
    metrics.reserve(static_cast<size_t>(config.steps));
    const int cycle = config.gen_disc_ratio + 1;
    for (int step = 0; step < config.steps; ++step) {
        const bool discriminative =
            !labeled_corpus.empty() && (step % cycle) == config.gen_disc_ratio;
        const double lr = lr_at_step(step, config);
        for (Parameter* p : params) p->zero_grad();

        double loss = 0.0;
        if (discriminative) {
            std::vector<LabeledExample> batch;
            batch.reserve(static_cast<size_t>(config.batch_size));
            for (int i = 0; i < config.batch_size; ++i) {
                batch.push_back(labeled_corpus[static_cast<size_t>(
                    batch_rng.categorical(labeled_weights))]);
            }
            loss = discriminator_loss(model, batch, schedule, transition, kind,
                                      corrupt_rng, true);
        } else {
            std::vector<Sequence> batch;
            batch.reserve(static_cast<size_t>(config.batch_size));
            for (int i = 0; i < config.batch_size; ++i) {
                batch.push_back(gen_corpus[static_cast<size_t>(
                    batch_rng.uniform_int(static_cast<int>(gen_corpus.size())))]);
            }
            loss = diffusion_loss(model, batch, kind, schedule, transition,
                                  corrupt_rng, true);
        }
        adam_step(params, adam, lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
        metrics.push_back({step, discriminative ? "disc" : "gen", loss, lr});
    }
    return metrics;
}

double autoregressive_nll(const Denoiser& model, const std::vector<Sequence>& heldout,
                          const MaskTransition& transition) {
    if (heldout.empty()) throw std::invalid_argument("autoregressive_nll: empty set");
    const int mask = transition.mask_index;
    double total = 0.0;
    long tokens = 0;
    for (const Sequence& w : heldout) {
        const int length = w.length();
        for (int i = 0; i < length; ++i) {
            Sequence masked = w;
            for (int j = i; j < length; ++j) masked[j] = mask;
            const double fraction = static_cast<double>(length - i) / length;
            const int t = timestep_for_mask_fraction(transition, fraction);
            const Tensor probs = model.token_distribution(masked, t, true);
            total -= std::log(std::max(probs.at(i, w[i]), 1e-300));
            ++tokens;
        }
    }
    return total / static_cast<double>(tokens);
}

} // namespace seqdesign
