#include "seqdesign/model.hpp"

#include <cmath>
#include <stdexcept>

namespace seqdesign {

namespace {

constexpr double kMaskLogitBias = -1e9;

Tensor conv_init(int cout, int cin, int kw, Rng& rng) {
    return Tensor::randn({cout, cin, kw}, rng, 1.0 / std::sqrt(static_cast<double>(cin * kw)));
}

} // namespace

void DenoiserConfig::validate() const {
    if (embed_dim <= 0 || channels <= 0 || encoder_blocks <= 0 || head_blocks <= 0 ||
        kernel_width <= 0 || ensemble_size <= 0 || vocab <= 1 || length <= 0 || steps <= 0) {
        throw std::invalid_argument("denoiser config: all sizes must be positive");
    }
    if (kernel_width % 2 == 0) {
        throw std::invalid_argument("denoiser config: kernel width must be odd");
    }
    for (int k : objective_classes) {
        if (k < 2) throw std::invalid_argument("denoiser config: objectives need >= 2 classes");
    }
}

Tensor sinusoidal_embedding(int index, int dim) {
    Tensor out({dim});
    for (int i = 0; i < dim; i += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
        out.data[static_cast<size_t>(i)] = std::sin(index * freq);
        if (i + 1 < dim) out.data[static_cast<size_t>(i + 1)] = std::cos(index * freq);
    }
    return out;
}

Denoiser::Denoiser(DenoiserConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng init = rng.substream("denoiser-init");

    Rng emb_rng = init.substream("embedding");
    embedding_ = Parameter("embedding", Tensor::randn({cfg_.vocab, cfg_.embed_dim}, emb_rng));

    Rng proj_rng = init.substream("in_proj");
    in_proj_w_ = Parameter("in_proj.w",
                           Tensor::randn({cfg_.embed_dim, cfg_.channels}, proj_rng,
                                         1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim))));
    in_proj_b_ = Parameter("in_proj.b", Tensor({cfg_.channels}));

    encoder_.reserve(static_cast<size_t>(cfg_.encoder_blocks));
    for (int b = 0; b < cfg_.encoder_blocks; ++b) {
        Rng block_rng = init.substream("encoder", static_cast<uint64_t>(b));
        encoder_.push_back(make_block("encoder.block" + std::to_string(b), block_rng));
    }

    Rng lm_rng = init.substream("lm_head");
    lm_w_ = Parameter("lm_head.w",
                      Tensor::randn({cfg_.channels, cfg_.vocab}, lm_rng,
                                    1.0 / std::sqrt(static_cast<double>(cfg_.channels))));
    lm_b_ = Parameter("lm_head.b", Tensor({cfg_.vocab}));

    heads_.resize(cfg_.objective_classes.size());
    for (size_t obj = 0; obj < cfg_.objective_classes.size(); ++obj) {
        heads_[obj].reserve(static_cast<size_t>(cfg_.ensemble_size));
        for (int e = 0; e < cfg_.ensemble_size; ++e) {
            Rng head_rng = init.substream("head", static_cast<uint64_t>(obj * 1000 + e));
            HeadStack stack;
            const std::string prefix =
                "obj" + std::to_string(obj) + ".head" + std::to_string(e);
            stack.blocks.reserve(static_cast<size_t>(cfg_.head_blocks));
            for (int b = 0; b < cfg_.head_blocks; ++b) {
                Rng block_rng = head_rng.substream("block", static_cast<uint64_t>(b));
                stack.blocks.push_back(make_block(prefix + ".block" + std::to_string(b), block_rng));
            }
            const int classes = cfg_.objective_classes[obj];
            Rng out_rng = head_rng.substream("out");
            stack.out_w = Parameter(prefix + ".out.w",
                                    Tensor::randn({cfg_.channels, classes}, out_rng,
                                                  1.0 / std::sqrt(static_cast<double>(cfg_.channels))));
            stack.out_b = Parameter(prefix + ".out.b", Tensor({classes}));
            heads_[obj].push_back(std::move(stack));
        }
    }

    pos_embedding_ = Tensor({cfg_.length, cfg_.embed_dim});
    for (int p = 0; p < cfg_.length; ++p) {
        const Tensor row = sinusoidal_embedding(p, cfg_.embed_dim);
        for (int j = 0; j < cfg_.embed_dim; ++j) {
            pos_embedding_.at(p, j) = row.data[static_cast<size_t>(j)];
        }
    }
}

Denoiser::ConvBlock Denoiser::make_block(const std::string& name, Rng& rng) const {
    ConvBlock block;
    Rng c1 = rng.substream("conv1");
    Rng c2 = rng.substream("conv2");
    block.conv1 = Parameter(name + ".conv1",
                            conv_init(cfg_.channels, cfg_.channels, cfg_.kernel_width, c1));
    block.bias1 = Parameter(name + ".bias1", Tensor({cfg_.channels}));
    block.ln_gamma = Parameter(name + ".ln_gamma", Tensor::full({cfg_.channels}, 1.0));
    block.ln_beta = Parameter(name + ".ln_beta", Tensor({cfg_.channels}));
    block.conv2 = Parameter(name + ".conv2",
                            conv_init(cfg_.channels, cfg_.channels, cfg_.kernel_width, c2));
    block.bias2 = Parameter(name + ".bias2", Tensor({cfg_.channels}));
    return block;
}

Var Denoiser::embed(Tape& tape, const Sequence& w) const {
    if (w.length() != cfg_.length) {
        throw std::invalid_argument("denoiser: sequence length " + std::to_string(w.length()) +
                                    " does not match configured length " +
                                    std::to_string(cfg_.length));
    }
    return tape.gather_rows(tape.param(embedding_), w.ids);
}

Var Denoiser::run_block(Tape& tape, const ConvBlock& block, Var x) const {
    Var y = tape.add_rowvec(tape.conv1d(x, tape.param(block.conv1)), tape.param(block.bias1));
    y = tape.layer_norm(y, tape.param(block.ln_gamma), tape.param(block.ln_beta));
    y = tape.relu(y);
    y = tape.add_rowvec(tape.conv1d(y, tape.param(block.conv2)), tape.param(block.bias2));
    return tape.add(x, y);
}

EncoderOutput Denoiser::encode_from_embedding(Tape& tape, Var x, int t) const {
    Var z = tape.add(x, tape.leaf(pos_embedding_));
    z = tape.add_rowvec(z, tape.leaf(sinusoidal_embedding(t, cfg_.embed_dim)));
    z = tape.add_rowvec(tape.matmul(z, tape.param(in_proj_w_)),
                        tape.param(in_proj_b_));
    for (const ConvBlock& block : encoder_) z = run_block(tape, block, z);
    return EncoderOutput{x, z, t};
}

EncoderOutput Denoiser::encode(Tape& tape, const Sequence& w, int t) const {
    return encode_from_embedding(tape, embed(tape, w), t);
}

EncoderOutput Denoiser::from_hidden(Tape& tape, Var hidden, int t) const {
    (void)tape;
    return EncoderOutput{Var{}, hidden, t};
}

EncoderOutput Denoiser::encode_from_guided(Tape& tape, Var leaf, int t) const {
    return encode_from_guided(tape, leaf, t, cfg_.guidance_layer);
}

EncoderOutput Denoiser::encode_from_guided(Tape& tape, Var leaf, int t,
                                           GuidanceLayer layer) const {
    if (layer == GuidanceLayer::first) {
        return encode_from_embedding(tape, leaf, t);
    }
    return from_hidden(tape, leaf, t);
}

Tensor Denoiser::hidden_at_layer(const Sequence& w, int t, GuidanceLayer layer) const {
    Tape tape;
    if (layer == GuidanceLayer::first) {
        return tape.value(embed(tape, w));
    }
    return tape.value(encode(tape, w, t).hidden);
}

Var Denoiser::decode_logits(Tape& tape, const EncoderOutput& enc, bool suppress_mask) const {
    Var logits = tape.add_rowvec(tape.matmul(enc.hidden, tape.param(lm_w_)),
                                 tape.param(lm_b_));
    if (suppress_mask) {
        Tensor bias({cfg_.vocab});
        bias.data[static_cast<size_t>(cfg_.vocab - 1)] = kMaskLogitBias;
        logits = tape.add_rowvec(logits, tape.leaf(std::move(bias)));
    }
    return logits;
}

Tensor Denoiser::token_distribution(const Sequence& w, int t, bool suppress_mask) const {
    Tape tape;
    const EncoderOutput enc = encode(tape, w, t);
    return token_distribution_from(tape, enc, suppress_mask);
}

Tensor Denoiser::token_distribution_from(Tape& tape, const EncoderOutput& enc,
                                         bool suppress_mask) const {
    return row_softmax(tape.value(decode_logits(tape, enc, suppress_mask)));
}

Var Denoiser::objective_head_logits(Tape& tape, const EncoderOutput& enc, int objective) const {
    if (objective < 0 || objective >= num_objectives()) {
        throw std::invalid_argument("objective index out of range");
    }
    const auto& stacks = heads_[static_cast<size_t>(objective)];
    Var rows{};
    for (const HeadStack& stack : stacks) {
        Var h = enc.hidden;
        for (const ConvBlock& block : stack.blocks) h = run_block(tape, block, h);
        Var pooled = tape.mean_axis0(h);
        Var logits = tape.add_rowvec(tape.matmul(pooled, tape.param(stack.out_w)),
                                     tape.param(stack.out_b));
        rows = rows.valid() ? tape.concat(rows, logits, 0) : logits;
    }
    return rows;
}

Var Denoiser::ensemble_mean_probs(Tape& tape, Var head_logits) const {
    return tape.mean_axis0(tape.softmax(head_logits));
}

std::vector<double> Denoiser::saliency_l1(const Sequence& w0, const ValueFn& value_fn,
                                          const PositionMask* immutable) const {
    Tape tape;
    const EncoderOutput enc = encode(tape, w0, 0);
    const Var value = value_fn(tape, enc);
    tape.backward(value);
    const Tensor& g = tape.grad(enc.embedding);
    if (!g.all_finite()) throw std::runtime_error("saliency: non-finite gradient");
    std::vector<double> scores(static_cast<size_t>(cfg_.length), 0.0);
    for (int i = 0; i < cfg_.length; ++i) {
        if (immutable != nullptr && (*immutable)[i]) continue;
        double l1 = 0.0;
        for (int j = 0; j < cfg_.embed_dim; ++j) l1 += std::abs(g.at(i, j));
        scores[static_cast<size_t>(i)] = l1;
    }
    return scores;
}

std::vector<double> Denoiser::saliency(const Sequence& w0, const ValueFn& value_fn,
                                       double tau, double eps,
                                       const PositionMask* immutable) const {
    if (tau <= 0.0) throw std::invalid_argument("saliency: tau must be positive");
    std::vector<double> scores = saliency_l1(w0, value_fn, immutable);
    for (int i = 0; i < cfg_.length; ++i) {
        if (immutable != nullptr && (*immutable)[i]) {
            scores[static_cast<size_t>(i)] = 0.0;
            continue;
        }
        const double raw = scores[static_cast<size_t>(i)];
        scores[static_cast<size_t>(i)] = std::max(std::pow(raw, 1.0 / tau), eps);
    }
    return scores;
}

void Denoiser::collect(std::vector<Parameter*>& out) {
    auto add_block = [&out](ConvBlock& b) {
        out.push_back(&b.conv1);
        out.push_back(&b.bias1);
        out.push_back(&b.ln_gamma);
        out.push_back(&b.ln_beta);
        out.push_back(&b.conv2);
        out.push_back(&b.bias2);
    };
    out.push_back(&embedding_);
    out.push_back(&in_proj_w_);
    out.push_back(&in_proj_b_);
    for (ConvBlock& b : encoder_) add_block(b);
    out.push_back(&lm_w_);
    out.push_back(&lm_b_);
    for (auto& ensemble : heads_) {
        for (HeadStack& stack : ensemble) {
            for (ConvBlock& b : stack.blocks) add_block(b);
            out.push_back(&stack.out_w);
            out.push_back(&stack.out_b);
        }
    }
}

std::vector<Parameter*> Denoiser::parameters() {
    std::vector<Parameter*> out;
    collect(out);
    return out;
}

std::vector<const Parameter*> Denoiser::parameters() const {
    std::vector<Parameter*> out;
    const_cast<Denoiser*>(this)->collect(out);
    return {out.begin(), out.end()};
}

ValueFn make_expected_class_value(const Denoiser& model, int objective) {
    const int classes = model.config().objective_classes.at(static_cast<size_t>(objective));
    Tensor class_values({1, classes});
    for (int c = 0; c < classes; ++c) class_values.at(0, c) = c;
    return [&model, objective, class_values](Tape& tape, const EncoderOutput& enc) {
        const Var probs = model.ensemble_mean_probs(
            tape, model.objective_head_logits(tape, enc, objective));
        return tape.sum_all(tape.mul(probs, tape.leaf(class_values)));
    };
}

double evaluate_value(const Denoiser& model, const Sequence& w, const ValueFn& value_fn,
                      int t) {
    Tape tape;
    const EncoderOutput enc = model.encode(tape, w, t);
    return tape.scalar(value_fn(tape, enc));
}

} // namespace seqdesign
