#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rrl/uncertainty.hpp"

namespace rrl {

using Policy = std::vector<int>;

/// Finite MDP with a per-(s,a) uncertainty set around the nominal kernel.
///
/// kernel row s * n_actions + a holds the nominal next-state distribution of
/// (s, a).  set_index maps the same row id into set_pool, so uncertainty
/// sets can be shared between state-action pairs (every pair must have
/// exactly one binding).
struct TabularRmdp {
    int n_states = 0;
    int n_actions = 0;
    double discount = 0.0;
    Mat reward; // n_states x n_actions
    Mat kernel; // (n_states * n_actions) x n_states
    std::vector<UncertaintySet> set_pool;
    std::vector<int> set_index;

    int row(int s, int a) const { return s * n_actions + a; }
    const UncertaintySet& set_at(int s, int a) const {
        return set_pool[static_cast<std::size_t>(set_index[row(s, a)])];
    }
};

/// Throws invalid_input unless: discount in (0,1); rewards finite; every
/// kernel row is a probability vector within 1e-12 (message names the first
/// offending (s,a)); every (s,a) resolves to a validated set of matching
/// dimension.
void validate_rmdp(const TabularRmdp& m);

/// Binds one shared uncertainty set to every (s, a).
void bind_shared_set(TabularRmdp& m, UncertaintySet set);

/// JSON round trip.  Layout: n_states, n_actions, discount, reward
/// (row-major S x A), kernel (row-major (s,a,s')), sets (one descriptor per
/// (s,a) in row-major order; textually identical descriptors share one pool
/// entry).  Parse failures throw invalid_input naming the offending field.
std::string rmdp_to_json(const TabularRmdp& m);
TabularRmdp rmdp_from_json(const std::string& text);

/// Policy restrictions of the nominal model.
Mat policy_kernel(const TabularRmdp& m, const Policy& pi); // S x S
Vec policy_reward(const TabularRmdp& m, const Policy& pi); // S

void validate_policy(const TabularRmdp& m, const Policy& pi);

/// Exact non-robust value of pi under the nominal kernel, by solving
/// (I - alpha P_pi) V = r_pi.  Throws solver_failure if the solve degrades.
Vec nonrobust_value(const TabularRmdp& m, const Policy& pi);

/// One robust Bellman backup for a fixed policy:
///   (T_pi V)(s) = r(s, pi(s)) + alpha [ P_(s,pi(s)) V + sigma_{U_(s,pi(s))}(V) ].
Vec robust_bellman_policy(const TabularRmdp& m, const Policy& pi, const Vec& v);

struct OptimalBackup {
    Vec value;
    Policy greedy; // argmax actions, ties to the lowest index
};

/// One robust Bellman optimality backup: max over actions of the policy
/// backup, with the maximizing action per state.
OptimalBackup robust_bellman_optimal(const TabularRmdp& m, const Vec& v);

struct FixedPointResult {
    Vec value;
    int iterations = 0;
    double residual = 0.0;
    std::optional<Policy> greedy; // filled by value iteration
};

/// Fixed point of the optimality backup from V = 0, to sup-norm residual
/// <= tol.  Throws no_convergence (with the last residual) past max_iters.
FixedPointResult robust_value_iteration(const TabularRmdp& m, double tol,
                                        int max_iters = 100000);

/// Fixed point of the policy backup from V = 0 (the robust value of pi).
FixedPointResult robust_policy_evaluation_exact(const TabularRmdp& m, const Policy& pi,
                                                double tol, int max_iters = 100000);

/// Lambda-averaged robust policy backup
///   (1 - lambda) sum_m lambda^m T_pi^{m+1}(V),
/// truncated at the smallest m with
///   lambda^{m+1} (2 ||V||_inf + r_max / (1 - alpha)) < 1e-12.
/// lambda = 0 reduces to robust_bellman_policy bit-for-bit.  Requires
/// lambda in [0, 1).
Vec robust_td_lambda_apply(const TabularRmdp& m, const Policy& pi, const Vec& v,
                           double lambda);

} // namespace rrl
