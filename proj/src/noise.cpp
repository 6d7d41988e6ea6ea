#include "seqdesign/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace seqdesign {

namespace {

// Clip on the per-step corruption keeps the final step from collapsing the
// cumulative signal to exactly zero.
constexpr double kMaxBeta = 0.999;

NoiseSchedule from_betas(ScheduleKind kind, int steps, std::vector<double> beta) {
    NoiseSchedule s;
    s.kind = kind;
    s.steps = steps;
    s.beta = std::move(beta);
    s.alpha_bar.assign(static_cast<size_t>(steps) + 1, 1.0);
    for (int t = 1; t <= steps; ++t) {
        s.alpha_bar[static_cast<size_t>(t)] =
            s.alpha_bar[static_cast<size_t>(t - 1)] * (1.0 - s.beta[static_cast<size_t>(t)]);
    }
    return s;
}

} // namespace

NoiseSchedule cosine_schedule(int steps) {
    if (steps < 1) throw std::invalid_argument("cosine_schedule: steps must be >= 1");
    const double s = 0.008;
    auto f = [&](double t) {
        const double v = std::cos((t / steps + s) / (1.0 + s) * M_PI / 2.0);
        return v * v;
    };
    const double f0 = f(0.0);
    std::vector<double> beta(static_cast<size_t>(steps) + 1, 0.0);
    double prev = 1.0;
    for (int t = 1; t <= steps; ++t) {
        const double abar = f(static_cast<double>(t)) / f0;
        double b = 1.0 - abar / prev;
        b = std::min(std::max(b, 0.0), kMaxBeta);
        beta[static_cast<size_t>(t)] = b;
        prev *= 1.0 - b;
    }
    return from_betas(ScheduleKind::cosine, steps, std::move(beta));
}

NoiseSchedule inverse_linear_schedule(int steps) {
    if (steps < 1) throw std::invalid_argument("inverse_linear_schedule: steps must be >= 1");
    std::vector<double> beta(static_cast<size_t>(steps) + 1, 0.0);
    for (int t = 1; t <= steps; ++t) {
        // abar(t)/abar(t-1) = t / (1 + t)
        beta[static_cast<size_t>(t)] = 1.0 / (1.0 + t);
    }
    return from_betas(ScheduleKind::inverse_linear, steps, std::move(beta));
}

double MaskTransition::unmask_prob(int t) const {
    if (t < 1 || t > steps) throw std::invalid_argument("unmask_prob: t out of range");
    const double denom = cumulative_mask_prob(t);
    if (denom <= 0.0) return 1.0;  // nothing is ever masked at this level
    return step_mask_prob[static_cast<size_t>(t)] *
           cumulative_stay_prob[static_cast<size_t>(t - 1)] / denom;
}

Tensor MaskTransition::step_matrix(int t, int vocab) const {
    if (t < 1 || t > steps) throw std::invalid_argument("step_matrix: t out of range");
    Tensor q({vocab, vocab});
    const double m = step_mask_prob[static_cast<size_t>(t)];
    for (int i = 0; i < vocab; ++i) {
        if (i == mask_index) {
            q.at(i, mask_index) = 1.0;
        } else {
            q.at(i, i) = 1.0 - m;
            q.at(i, mask_index) = m;
        }
    }
    return q;
}

Tensor MaskTransition::cumulative_matrix(int t, int vocab) const {
    if (t < 0 || t > steps) throw std::invalid_argument("cumulative_matrix: t out of range");
    Tensor q({vocab, vocab});
    const double stay = cumulative_stay_prob[static_cast<size_t>(t)];
    for (int i = 0; i < vocab; ++i) {
        if (i == mask_index) {
            q.at(i, mask_index) = 1.0;
        } else {
            q.at(i, i) = stay;
            q.at(i, mask_index) = 1.0 - stay;
        }
    }
    return q;
}

MaskTransition mask_transition(const NoiseSchedule& schedule, int mask_index) {
    MaskTransition tr;
    tr.steps = schedule.steps;
    tr.mask_index = mask_index;
    tr.step_mask_prob.assign(static_cast<size_t>(schedule.steps) + 1, 0.0);
    tr.cumulative_stay_prob.assign(static_cast<size_t>(schedule.steps) + 1, 1.0);
    for (int t = 1; t <= schedule.steps; ++t) {
        // The schedule's cumulative signal level is the cumulative stay
        // probability; the per-step mask probability follows from the ratio.
        tr.step_mask_prob[static_cast<size_t>(t)] = schedule.beta[static_cast<size_t>(t)];
        tr.cumulative_stay_prob[static_cast<size_t>(t)] = schedule.abar(t);
    }
    return tr;
}

Tensor gaussian_forward(const Tensor& x0, int t, const NoiseSchedule& schedule, Rng& rng) {
    if (t < 0 || t > schedule.steps) {
        throw std::invalid_argument("gaussian_forward: t out of range");
    }
    if (t == 0) return x0;
    const double abar = schedule.abar(t);
    const double mean_coef = std::sqrt(abar);
    const double noise_coef = std::sqrt(1.0 - abar);
    Tensor out = x0;
    for (double& x : out.data) x = mean_coef * x + noise_coef * rng.normal();
    return out;
}

GaussianPosterior gaussian_posterior_coefficients(int t, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps) {
        throw std::invalid_argument("gaussian_posterior: t out of range");
    }
    const double abar_t = schedule.abar(t);
    const double abar_prev = schedule.abar(t - 1);
    const double beta_t = schedule.beta[static_cast<size_t>(t)];
    const double alpha_t = 1.0 - beta_t;
    GaussianPosterior p;
    p.coef_x0 = std::sqrt(abar_prev) * beta_t / (1.0 - abar_t);
    p.coef_xt = std::sqrt(alpha_t) * (1.0 - abar_prev) / (1.0 - abar_t);
    p.variance = (1.0 - abar_prev) / (1.0 - abar_t) * beta_t;
    return p;
}

std::pair<Tensor, double> gaussian_posterior(const Tensor& x_t, const Tensor& x0,
                                             int t, const NoiseSchedule& schedule) {
    if (!x_t.same_shape(x0)) {
        throw std::invalid_argument("gaussian_posterior: shape mismatch " +
                                    x_t.shape_str() + " vs " + x0.shape_str());
    }
    const GaussianPosterior p = gaussian_posterior_coefficients(t, schedule);
    Tensor mean = x0;
    for (size_t i = 0; i < mean.data.size(); ++i) {
        mean.data[i] = p.coef_x0 * x0.data[i] + p.coef_xt * x_t.data[i];
    }
    return {std::move(mean), p.variance};
}

Sequence mask_forward(const Sequence& w0, int t, const MaskTransition& transition, Rng& rng) {
    if (t < 0 || t > transition.steps) {
        throw std::invalid_argument("mask_forward: t out of range");
    }
    Sequence out = w0;
    if (t == 0) return out;
    const double mask_prob = transition.cumulative_mask_prob(t);
    for (int& id : out.ids) {
        if (id == transition.mask_index) continue;  // absorbing
        if (rng.uniform() < mask_prob) id = transition.mask_index;
    }
    return out;
}

int timestep_for_mask_fraction(const MaskTransition& transition, double fraction) {
    int best_t = 1;
    double best_gap = 2.0;
    for (int t = 1; t <= transition.steps; ++t) {
        const double gap = std::abs(transition.cumulative_mask_prob(t) - fraction);
        if (gap < best_gap) {
            best_gap = gap;
            best_t = t;
        }
    }
    return best_t;
}

Tensor categorical_posterior(const Sequence& w_t, const Sequence& w0, int t,
                             const MaskTransition& transition) {
    if (w_t.length() != w0.length()) {
        throw std::invalid_argument("categorical_posterior: length mismatch");
    }
    if (t < 1 || t > transition.steps) {
        throw std::invalid_argument("categorical_posterior: t out of range");
    }
    const int m = transition.mask_index;
    const int vocab = m + 1;
    Tensor dist({w_t.length(), vocab});
    const double unmask = transition.unmask_prob(t);
    for (int i = 0; i < w_t.length(); ++i) {
        if (w0[i] == m) {
            throw std::invalid_argument("categorical_posterior: w0 contains a mask token");
        }
        if (w_t[i] == m) {
            dist.at(i, w0[i]) = unmask;
            dist.at(i, m) = 1.0 - unmask;
        } else {
            if (w_t[i] != w0[i]) {
                throw std::invalid_argument(
                    "categorical_posterior: impossible pair (unmasked token differs from w0) "
                    "at position " + std::to_string(i));
            }
            dist.at(i, w_t[i]) = 1.0;
        }
    }
    return dist;
}

} // namespace seqdesign
