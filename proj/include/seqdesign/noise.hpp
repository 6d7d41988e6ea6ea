#pragma once

#include <vector>

#include "seqdesign/rng.hpp"
#include "seqdesign/seqcore.hpp"
#include "seqdesign/tensor.hpp"

namespace seqdesign {

enum class ScheduleKind { cosine, inverse_linear };
enum class CorruptionKind { categorical, gaussian };

// Corruption schedule over T steps. alpha_bar[t] is the cumulative signal
// level: for the Gaussian process the variance-preserving coefficient, for
// the categorical process the probability a token is still unmasked at t.
// The same array serves both processes, tagged by kind.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::cosine;
    int steps = 0;                  // T
    std::vector<double> alpha_bar;  // length T+1, alpha_bar[0] == 1
    std::vector<double> beta;       // length T+1, beta[0] unused; 1 - alpha_t

    double alpha(int t) const { return 1.0 - beta[static_cast<size_t>(t)]; }
    double abar(int t) const { return alpha_bar[static_cast<size_t>(t)]; }
};

NoiseSchedule cosine_schedule(int steps);
// abar(t) = 1 / (1 + t)
NoiseSchedule inverse_linear_schedule(int steps);

// Per-step absorbing transition over |A|+1 tokens, represented by two
// scalars per step (stay probability and mask probability) since the mask
// row is absorbing and data tokens never mutate into other data tokens.
struct MaskTransition {
    int steps = 0;
    int mask_index = 0;
    std::vector<double> step_mask_prob;        // length T+1; [t] = per-step mask prob
    std::vector<double> cumulative_stay_prob;  // length T+1; [t] = prod of stays

    double cumulative_mask_prob(int t) const {
        return 1.0 - cumulative_stay_prob[static_cast<size_t>(t)];
    }
    // p(w_{t-1} = w0 | w_t = MASK, w0): probability a masked position reveals
    // its clean token when stepping back from t to t-1.
    double unmask_prob(int t) const;

    // Materializes Q_t (or cumulative Q_bar_t) as a dense row-stochastic
    // matrix over vocab tokens; used by tests against the scalar form.
    Tensor step_matrix(int t, int vocab) const;
    Tensor cumulative_matrix(int t, int vocab) const;
};

MaskTransition mask_transition(const NoiseSchedule& schedule, int mask_index);

// x_t ~ N(sqrt(abar_t) x0, (1 - abar_t) I); returns x0 exactly at t = 0.
Tensor gaussian_forward(const Tensor& x0, int t, const NoiseSchedule& schedule, Rng& rng);

struct GaussianPosterior {
    double coef_x0 = 0.0;   // weight on x0 in the mean
    double coef_xt = 0.0;   // weight on x_t in the mean
    double variance = 0.0;  // per-coordinate
};

// Closed-form p(x_{t-1} | x_t, x0) coefficients for 1 <= t <= T.
GaussianPosterior gaussian_posterior_coefficients(int t, const NoiseSchedule& schedule);
// Convenience: mean tensor and scalar variance for given x_t, x0.
std::pair<Tensor, double> gaussian_posterior(const Tensor& x_t, const Tensor& x0,
                                             int t, const NoiseSchedule& schedule);

// Masks each non-mask token independently with the cumulative mask
// probability at t; mask tokens stay masked.
Sequence mask_forward(const Sequence& w0, int t, const MaskTransition& transition, Rng& rng);

// Per-position categorical p(w_{t-1} | w_t, w0) over vocab tokens. For an
// absorbing process each row is either a point mass (position unmasked at t)
// or a two-point distribution on {w0 token, MASK}.
// Throws if (w_t, w0) is unreachable under the forward process.
Tensor categorical_posterior(const Sequence& w_t, const Sequence& w0, int t,
                             const MaskTransition& transition);

// Timestep whose cumulative mask probability is closest to the given mask
// fraction; used to run masked models in autoregressive mode.
int timestep_for_mask_fraction(const MaskTransition& transition, double fraction);

} // namespace seqdesign
