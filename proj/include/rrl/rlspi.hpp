#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rrl/envs.hpp"
#include "rrl/features.hpp"
#include "rrl/learner.hpp"

namespace rrl {

/// How the inner loop evaluates the support function of the bound sets.
///
/// induced: sigma_{U_{s,a}}(V_w) with V_w(s') = phi(s', pi(s'))' w, exact for
/// every set variant (per-iteration policy-row feature matrix).
///
/// stacked_gram: the shared-sphere shortcut -sqrt(r w' Phi'Phi w) with Phi
/// the full state-action feature matrix, precomputed once; requires every
/// (s,a) to bind one shared CenteredSphere whose radius supplies r.
enum class SigmaMode { induced, stacked_gram };

struct PolicyIterationConfig {
    int outer_iterations = 20;
    int n_trajectories = 100;  // fresh trajectories per outer iteration
    int horizon = 50;          // steps per trajectory
    double eps0 = 0.1;         // inner-loop weight-change stop
    long inner_max_steps = 0;  // extra per-iteration sample cap; 0 = none
    double lambda = 0.0;
    StepSchedule schedule;
    std::optional<double> ridge; // default 1e-6 * L
    SigmaMode sigma_mode = SigmaMode::induced;
    std::uint64_t seed = 0;
};

struct IterationRecord {
    int iteration = 0;
    Vec w;
    Policy greedy;
    long inner_steps = 0;
    bool inner_converged = false;
    std::string stop_reason;
};

struct PolicyIterationResult {
    std::vector<IterationRecord> iterations;
    // Reported iterate: the one whose greedy policy scores best under exact
    // evaluation on the training model (mean robust value over states; ties to
    // the earliest iterate).  Approximate policy iteration chatters among
    // near-optimal policies, so the last iterate has no special status; the
    // full sequence stays available in `iterations`.
    Policy policy;
    Vec w;
    int best_iteration = 0;
};

/// Greedy action argmax_a phi(s,a)'w over the rows of a tabulated
/// state-action matrix; ties resolve to the lowest action index.
int greedy_action(const Mat& phi_sa, int n_actions, const Vec& w, int s);

/// Greedy action for continuous observations.
int greedy_action(const StackedActionFeatures& f, const Vec& w, const Vec& obs);

Policy greedy_policy_from_weights(const Mat& phi_sa, int n_states, int n_actions,
                                  const Vec& w);

/// Approximate robust policy iteration on a tabular model: each outer
/// iteration collects n_trajectories x horizon on-policy samples from
/// uniformly random start states (eligibility trace reset per trajectory,
/// weights reset to zero per iteration), runs the online learner until the
/// weight change drops below eps0, the inner step cap is hit, or the
/// samples run out (the record says which), then switches to the greedy
/// policy of the learned Q-weights.  The eps0 stop is armed only after the
/// first trajectory completes; before that a single zero-reward sample on
/// zero weights would read as convergence.  The initial policy picks an
/// action uniformly at random at every step, so iteration 0 explores both
/// action blocks; later iterations follow the deterministic greedy policy.
PolicyIterationResult rlspi_run(const TabularRmdp& m, const StackedActionFeatures& features,
                                const PolicyIterationConfig& config);

/// Same loop with every uncertainty set replaced by Degenerate: classical
/// LSPI.  Byte-identical to rlspi_run on a model whose sets are already
/// Degenerate.
PolicyIterationResult lspi_run(const TabularRmdp& m, const StackedActionFeatures& features,
                               const PolicyIterationConfig& config);

struct RobustEval {
    Vec value;              // robust value of the policy under the bound sets
    double sup_gap = 0.0;   // ||V* - V_pi||_inf
    std::optional<double> d_gap; // d-weighted gap under the nominal chain of pi
};

/// Exact robust evaluation of a policy against the model's own sets.
RobustEval evaluate_policy_robust(const TabularRmdp& m, const Policy& pi,
                                  double tol = 1e-10);

struct McEval {
    double mean = 0.0;
    double stddev = 0.0; // population std over episodes
    int episodes = 0;
};

/// Monte Carlo return of a policy closure; discount 1.0 gives plain episodic
/// return.
McEval evaluate_policy_mc(Environment& env, const std::function<int(const Vec&)>& policy,
                          int episodes, int horizon, double discount, std::uint64_t seed);

/// weights CSV: header iteration,index,value; one row per entry of the
/// reported iterate's weight vector (per-iterate weights live in the JSONL
/// records).
void write_weights_csv(const std::string& path, const IterationRecord& record);

/// JSON lines, one IterationRecord per line.
void write_iteration_records(const std::string& path,
                             const std::vector<IterationRecord>& records);

} // namespace rrl
