#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seqdesign/model.hpp"
#include "seqdesign/noise.hpp"
#include "seqdesign/objectives.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/seqcore.hpp"

namespace seqdesign {

struct TrainConfig {
    int steps = 2000;          // total optimizer updates
    int batch_size = 32;
    double learning_rate = 1e-3;
    int warmup_steps = 100;
    double lr_floor = 1e-6;    // cosine decay target
    int gen_disc_ratio = 5;    // generative updates per discriminative update
    double adam_beta1 = 0.99;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool upsample_minority = true;

    void validate() const;
};

// Training example with optional per-objective class labels (multi-task data
// is usually only partially labeled).
struct LabeledExample {
    Sequence sequence;
    std::vector<std::optional<int>> labels;
};

struct MetricRow {
    int step = 0;
    std::string kind;  // "gen" or "disc"
    double loss = 0.0;
    double lr = 0.0;
};

// ---- losses ----------------------------------------------------------

// Mean per-token cross-entropy of the clean tokens given a corrupted input
// at a uniformly drawn t in {1..T}. Computed on all positions. When
// `accumulate_grad` is set the scaled gradient of the batch mean is pushed
// into the model parameters.
double diffusion_loss(const Denoiser& model, const std::vector<Sequence>& batch,
                      CorruptionKind kind, const NoiseSchedule& schedule,
                      const MaskTransition& transition, Rng& rng, bool accumulate_grad);

// abar * one_hot + (1 - abar)/K.
std::vector<double> smoothed_labels(int label, double abar, int classes);

// Cross-entropy of every ensemble head against the smoothed labels of the
// corrupted batch, averaged over heads and present labels; missing labels
// contribute nothing. Returns 0 with zero gradients if no labels are present.
double discriminator_loss(const Denoiser& model, const std::vector<LabeledExample>& batch,
                          const NoiseSchedule& schedule, const MaskTransition& transition,
                          CorruptionKind kind, Rng& rng, bool accumulate_grad);

// ---- label discretization --------------------------------------------

// Interior decile edges (9 values) computed from the given values.
std::vector<double> decile_edges_from(std::vector<double> values);

// Class 0 below the cutoff, classes 1..10 by decile bucket; a value exactly
// at an interior edge goes to the lower bucket.
int discretize_label(double value, double cutoff, const std::vector<double>& decile_edges);

// ---- optimizer ---------------------------------------------------------

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;
};

AdamState make_adam_state(const std::vector<Parameter*>& params);
void adam_step(std::vector<Parameter*>& params, AdamState& state, double lr,
               double beta1, double beta2, double eps);

// Linear warmup to the peak rate, then cosine decay to the floor.
double lr_at_step(int step, const TrainConfig& config);

// ---- synthetic corpora -------------------------------------------------

// Two-state hidden Markov chain over disjoint token supports. Disjoint
// supports make the observation process itself Markov, so its entropy rate
// has a closed form the tests can pin down.
struct HmmSpec {
    double p01 = 0.05;
    double p10 = 0.05;
    std::vector<int> support0;
    std::vector<int> support1;
    std::vector<double> emission0;  // probabilities within support0
    std::vector<double> emission1;

    void validate() const;
    double stationary0() const { return p10 / (p01 + p10); }
};

// Default spec over the first 20 tokens of the alphabet, 10 per state, with
// a skewed within-support emission profile.
HmmSpec default_hmm_spec(const Alphabet& alphabet);

std::vector<Sequence> sample_hmm_corpus(const HmmSpec& spec, int count, int length, Rng& rng);

// Uniform random residues with target tokens planted at hidden positions
// with probability plant_prob; yields a spread of planted-objective labels.
struct PlantedSpec {
    std::vector<int> positions;
    std::vector<int> tokens;
    double plant_prob = 0.5;
};

std::vector<Sequence> sample_planted_corpus(const PlantedSpec& spec, const Alphabet& alphabet,
                                            int count, int length, Rng& rng);

// Labels a corpus with discretized objective values (cutoff + deciles per
// objective). Returns the labeled set and the per-objective decile edges.
struct LabeledCorpus {
    std::vector<LabeledExample> examples;
    std::vector<double> cutoffs;
    std::vector<std::vector<double>> edges;
};

LabeledCorpus label_corpus(const std::vector<Sequence>& corpus,
                           const std::vector<Objective>& objectives,
                           const std::vector<double>& cutoffs, const Alphabet& alphabet);

// Sampling weights implementing minority-class upsampling; the example set
// itself is never altered.
std::vector<double> upsample_weights(const std::vector<LabeledExample>& examples,
                                     const std::vector<int>& classes);

// ---- the loop -----------------------------------------------------------

// Alternating generative/discriminative optimization (ratio : 1). Adam with
// the configured betas; deterministic given the rng substream.
std::vector<MetricRow> train_loop(Denoiser& model, const std::vector<Sequence>& gen_corpus,
                                  const std::vector<LabeledExample>& labeled_corpus,
                                  const TrainConfig& config, CorruptionKind kind,
                                  const NoiseSchedule& schedule, Rng& rng);

// Mean per-token negative log-likelihood of held-out sequences evaluated
// autoregressively: positions at and right of i are masked and the timestep
// is recovered from the mask fraction. With an exact model this converges to
// the process entropy rate.
double autoregressive_nll(const Denoiser& model, const std::vector<Sequence>& heldout,
                          const MaskTransition& transition);

} // namespace seqdesign
