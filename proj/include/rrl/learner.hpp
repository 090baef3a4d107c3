#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "rrl/uncertainty.hpp"

namespace rrl {

/// Robbins-Monro step sizes gamma_t = gamma0 / (t0 + t)^kappa with
/// kappa in (0.5, 1] (the classic square-summable-not-summable window).
struct StepSchedule {
    double gamma0 = 1.0;
    double t0 = 10.0;
    double kappa = 0.75;
};

void validate_schedule(const StepSchedule& s);
double step_size(const StepSchedule& s, long t);

/// One feature-level transition: phi_now = phi(s_t, a_t), phi_next evaluated
/// at the successor under the evaluated policy, and the id of the
/// uncertainty set attached to (s_t, a_t).
struct TransitionSample {
    Vec phi_now;
    double reward = 0.0;
    Vec phi_next;
    int set_id = 0;
};

/// Per-set support-function evaluators, indexed by set id.  Each callback
/// maps the current weights to sigma_set(value-of-w).
struct SigmaOracle {
    std::vector<std::function<double(const Vec&)>> sigma_by_set;
};

/// Closed-form sphere path: w -> -sqrt(radius_param * w' gram_eff w).
std::function<double(const Vec&)> make_gram_sigma(Mat gram_eff, double radius_param);

/// Gram path equivalent to support_inf on the given sphere over value
/// vectors phi w: with the sum-zero flag the gram is built from the
/// column-centered phi and radius_param = radius^2, so the two routes agree
/// to machine precision.
std::function<double(const Vec&)> make_sphere_sigma(const CenteredSphere& sphere,
                                                    const Mat& phi);

/// General path: w -> support_inf(set, phi w).  phi maps weights to the
/// value vector the set acts on (for Q-learning, the policy-row matrix).
std::function<double(const Vec&)> make_general_sigma(UncertaintySet set, Mat phi);

/// Online least-squares policy-evaluation state.  Accumulators store raw
/// sums over the first t samples; every statistic is divided by t at use so
/// the incremental and batch routes agree exactly:
///   A_t = (1/t) sum z_tau (a phi_next - phi_now)',  B_t = (1/t) sum phi phi',
///   b_t = (1/t) sum z_tau r_tau,  z_tau = (a lambda) z_{tau-1} + phi_tau.
/// trace_by_set keeps sum of z_tau per set id, which makes the robust
/// correction exact with one sigma evaluation per distinct set.
struct LearnerState {
    double discount = 0.0;
    double lambda = 0.0;
    double ridge = 0.0;
    StepSchedule schedule;
    Vec w;
    Vec z;
    Mat a_acc;
    Mat b_acc;
    Vec r_acc;
    std::map<int, Vec> trace_by_set;
    long t = 0;
};

/// ridge defaults to 1e-6 * L (keeps B_t invertible before t >= L).
LearnerState learner_init(int n_features, double discount, double lambda,
                          std::optional<Vec> w0 = std::nullopt,
                          const StepSchedule& schedule = {},
                          std::optional<double> ridge = std::nullopt);

/// Clears the eligibility trace (call at trajectory boundaries).
void reset_trace(LearnerState& st);

void observe(LearnerState& st, const TransitionSample& sample);

/// C_t(w) = (discount / t) * sum_sets trace_sum[set] * sigma_set(w).
/// Every set id seen so far must resolve in the oracle.
Vec robust_correction(const LearnerState& st, const Vec& w, const SigmaOracle& sigma);

/// One step w += gamma_t B_t^{-1} (A_t w + b_t + C_t(w)) with ridge on B_t.
/// Requires t >= 1.  Returns the new weights.
const Vec& learner_step(LearnerState& st, const SigmaOracle& sigma);

struct LearnerRun {
    Vec w;
    long steps = 0;
    bool converged = false;
    std::string stop_reason;
    double last_delta = 0.0; // ||w_t - w_{t-1}||_2 at the stop
};

using SampleStream = std::function<std::optional<TransitionSample>()>;

/// observe + learner_step until ||w_t - w_{t-1}||_2 < eps0 (converged), the
/// stream runs dry, or max_steps is hit (both not converged; stop_reason
/// says which).
LearnerRun run_to_convergence(LearnerState& st, const SampleStream& stream, double eps0,
                              long max_steps, const SigmaOracle& sigma);

} // namespace rrl
