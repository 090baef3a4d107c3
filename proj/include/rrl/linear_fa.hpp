#pragma once

#include <functional>
#include <optional>

#include "rrl/features.hpp"
#include "rrl/rmdp.hpp"

namespace rrl {

struct SteadyDistribution {
    Vec d;
    double d_min = 0.0;
};

/// Stationary distribution of a row-stochastic matrix by damped power
/// iteration (the 1/2-lazy chain shares the stationary distribution and is
/// aperiodic).  Throws non_ergodic when the support graph is not strongly
/// connected (message names a non-communicating state), when an entry of the
/// limit is <= 1e-9, or when 1e6 sweeps do not reach an L1 step below 1e-12.
SteadyDistribution steady_state(const Mat& p);

/// d-weighted norm sqrt(sum_i d_i v_i^2).
double weighted_norm(const Vec& v, const Vec& d);

/// d-weighted orthogonal projection onto span(phi):
/// Pi v = phi (phi' D phi)^{-1} phi' D v.  Throws rank_error when the
/// weighted gram is singular.
Vec project(const FeatureMatrix& phi, const Vec& d, const Vec& v);

/// Approximate lambda-averaged robust backup built from sampled-sphere (or
/// any other) approximation sets, in closed form:
///   T(V) = (I - a l P)^{-1} (r_pi + a sigma(V)) + a (1 - l) P (I - a l P)^{-1} V
/// with sigma(V)(s) = sigma_{approx set at (s, pi(s))}(V), a = discount,
/// l = lambda.  approx_sets must bind one set per (s,a) like the model's own
/// pool; pass the model's sets to recover the exact operator.
Vec approx_robust_td_apply(const TabularRmdp& m, const Policy& pi,
                           const std::vector<UncertaintySet>& approx_pool,
                           const std::vector<int>& approx_index, const Vec& v,
                           double lambda);

/// Row-level description of a projected fixed-point problem.  The rows are
/// states for V-learning or state-action pairs for Q-learning; sigma maps
/// the current value vector on rows to the per-row support-function value.
struct ProjectedProblem {
    Mat p;      // R x R row-stochastic transition under the evaluated policy
    Vec r;      // R rewards
    Mat phi;    // R x L features (full column rank)
    Vec d;      // R positive row weights
    double discount = 0.0;
    double lambda = 0.0;
    std::function<Vec(const Vec&)> sigma; // value-on-rows -> per-row sigma
};

struct ProjectedFixedPoint {
    Vec w;
    int iterations = 0;
    double residual = 0.0; // last ||phi (w_k+1 - w_k)||_d
};

struct FixedPointOptions {
    double tol = 1e-10;
    int max_iters = 100000;
    // When provided, the iteration refuses to start unless
    // contraction_coefficient(inputs) < 1; force skips that check.
    std::optional<ContractionInputs> contraction_check;
    bool force = false;
};

/// Weight vector w with phi w = Pi T(phi w), where T is the lambda-averaged
/// robust backup described by the problem, found by damped fixed-point
/// iteration
///   w_{k+1} = w_k + step B^{-1} (A w_k + C(w_k) + b).
/// The infinite sums behind A, b, C are evaluated by solving
/// (I - a l P) X = Y exactly.  Divergence halves the step and restarts;
/// below step 1/1024 it throws no_convergence.
ProjectedFixedPoint exact_projected_fixed_point(const ProjectedProblem& problem,
                                                const FixedPointOptions& opts = {});

/// Convenience wrapper for state-value problems on a tabular model.
ProjectedFixedPoint exact_projected_fixed_point(
    const TabularRmdp& m, const Policy& pi, const std::vector<UncertaintySet>& approx_pool,
    const std::vector<int>& approx_index, const FeatureMatrix& phi, const Vec& d,
    double lambda, const FixedPointOptions& opts = {});

struct ExplorationCheck {
    bool feasible = false;
    double beta_min = 0.0; // +inf when a support mismatch makes it infeasible
};

/// Smallest beta with alpha P_{s,pi(s)}(s') <= beta P^o_{s,pi_e(s)}(s') for
/// every vertex kernel P of the model's sets.  All sets must be
/// FiniteVertices or Degenerate; a positive numerator over a zero
/// denominator makes the check infeasible.  feasible additionally requires
/// beta_min < 1.
ExplorationCheck verify_exploration_assumption(const TabularRmdp& m, const Policy& pi,
                                               const Policy& pi_explore);

} // namespace rrl
