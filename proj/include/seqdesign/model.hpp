#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "seqdesign/autodiff.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/seqcore.hpp"
#include "seqdesign/tensor.hpp"

namespace seqdesign {

enum class GuidanceLayer { first, last };

struct DenoiserConfig {
    int embed_dim = 16;
    int channels = 64;
    int encoder_blocks = 4;
    int head_blocks = 2;
    int kernel_width = 9;
    int ensemble_size = 10;  // k replicated heads per objective
    int vocab = 22;          // data alphabet + [MASK]
    int length = 48;         // L
    int steps = 64;          // T (for time conditioning range)
    GuidanceLayer guidance_layer = GuidanceLayer::last;
    std::vector<int> objective_classes;  // K_i per discriminative objective

    void validate() const;
};

// One forward pass through the shared encoder. `embedding` is the depth-0
// hidden state (the token embeddings x_t, before position/time conditioning);
// `hidden` is the pre-logit state produced by the encoder stack. Either can
// be the guided variable depending on the configured guidance layer.
struct EncoderOutput {
    Var embedding;  // [L, embed_dim]; invalid when built from a hidden leaf
    Var hidden;     // [L, channels]
    int t = 0;
};

// Differentiable scalar evaluated on an encoder output.
using ValueFn = std::function<Var(Tape&, const EncoderOutput&)>;

// Denoising network: embedding matrix, sinusoidal position/time embeddings,
// a stack of 1-D conv residual blocks (conv -> layer_norm -> relu -> conv
// + skip), a linear LM head, and per-objective ensembles of discriminative
// head stacks sharing the encoder.
class Denoiser {
public:
    Denoiser(DenoiserConfig cfg, Rng& rng);

    const DenoiserConfig& config() const { return cfg_; }

    // Token embeddings for a sequence: the depth-0 hidden state.
    Var embed(Tape& tape, const Sequence& w) const;

    // Adds position and time conditioning, then runs the encoder stack.
    EncoderOutput encode_from_embedding(Tape& tape, Var x, int t) const;
    EncoderOutput encode(Tape& tape, const Sequence& w, int t) const;
    // Treats an existing pre-logit tensor as the encoder output (guidance at
    // the last layer).
    EncoderOutput from_hidden(Tape& tape, Var hidden, int t) const;
    // Dispatch on a guidance layer: the leaf is either the embedding or the
    // pre-logit hidden state. Defaults to the configured layer.
    EncoderOutput encode_from_guided(Tape& tape, Var leaf, int t) const;
    EncoderOutput encode_from_guided(Tape& tape, Var leaf, int t, GuidanceLayer layer) const;

    // Hidden state at a guidance layer for a discrete sequence: the token
    // embeddings (first) or the encoder output (last).
    Tensor hidden_at_layer(const Sequence& w, int t, GuidanceLayer layer) const;

    // Per-position vocab logits. When suppress_mask is set the [MASK] column
    // is pushed to -1e9 so clean decoding never emits a mask.
    Var decode_logits(Tape& tape, const EncoderOutput& enc, bool suppress_mask = true) const;
    // softmax rows of decode_logits, as a plain tensor.
    Tensor token_distribution(const Sequence& w, int t, bool suppress_mask = true) const;
    Tensor token_distribution_from(Tape& tape, const EncoderOutput& enc,
                                   bool suppress_mask = true) const;

    // Ensemble class logits for one objective: [k, K_i], one row per head.
    Var objective_head_logits(Tape& tape, const EncoderOutput& enc, int objective) const;
    int num_objectives() const { return static_cast<int>(cfg_.objective_classes.size()); }

    // Ensemble-mean class probabilities: softmax per head row, then mean.
    Var ensemble_mean_probs(Tape& tape, Var head_logits) const;

    // Raw per-position saliency: row-wise L1 norm of d(value)/d(embedding)
    // on the clean sequence; immutable positions are zeroed.
    std::vector<double> saliency_l1(const Sequence& w0, const ValueFn& value_fn,
                                    const PositionMask* immutable = nullptr) const;
    // Tempered, floored saliency scores: max(raw^(1/tau), eps) on mutable
    // positions, exactly 0 on immutable ones.
    std::vector<double> saliency(const Sequence& w0, const ValueFn& value_fn,
                                 double tau, double eps,
                                 const PositionMask* immutable = nullptr) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    const Tensor& embedding_matrix() const { return embedding_.value; }

private:
    struct ConvBlock {
        Parameter conv1, bias1, ln_gamma, ln_beta, conv2, bias2;
    };
    struct HeadStack {
        std::vector<ConvBlock> blocks;
        Parameter out_w, out_b;
    };

    Var run_block(Tape& tape, const ConvBlock& block, Var x) const;
    ConvBlock make_block(const std::string& name, Rng& rng) const;
    void collect(std::vector<Parameter*>& out);

    DenoiserConfig cfg_;
    Parameter embedding_;          // [vocab, embed_dim]
    Parameter in_proj_w_, in_proj_b_;
    std::vector<ConvBlock> encoder_;
    Parameter lm_w_, lm_b_;
    std::vector<std::vector<HeadStack>> heads_;  // [objective][ensemble]
    Tensor pos_embedding_;         // [L, embed_dim], fixed sinusoidal
};

// Sinusoidal embedding of a scalar step index, dimension dim.
Tensor sinusoidal_embedding(int index, int dim);

// Single-objective value: the posterior mean class index under the
// ensemble-averaged head distribution (class c is worth c).
ValueFn make_expected_class_value(const Denoiser& model, int objective);

// Evaluates a value function on a clean sequence.
double evaluate_value(const Denoiser& model, const Sequence& w, const ValueFn& value_fn,
                      int t = 0);

} // namespace seqdesign
