#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rrl/rmdp.hpp"

namespace rrl {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Tabular environments
// ---------------------------------------------------------------------------

/// Two-action corridor: action 0 moves left, action 1 moves right, the move
/// flips direction with probability slip, positions clamp at both ends.
/// Reward 1 in the listed states (for either action), 0 elsewhere.
struct ChainSpec {
    int n_states = 10;
    double slip = 0.1;
    double discount = 0.9;
    std::vector<int> reward_states = {0, 9};
};

/// Chain model with Degenerate uncertainty bound to every (s,a).
TabularRmdp build_chain(const ChainSpec& spec);

/// Seeded random model: kernel rows put Dirichlet(1) mass on `branching`
/// distinct successors, rewards are U[0,1], and each (s,a) gets its own
/// FiniteVertices set of `vertices_per_set` feasible perturbations with L2
/// norm about vertex_scale (vertices_per_set = 0 binds Degenerate sets).
struct RandomRmdpSpec {
    int n_states = 5;
    int n_actions = 2;
    int branching = 3;
    double discount = 0.8;
    int vertices_per_set = 3;
    double vertex_scale = 0.05;
};

TabularRmdp random_tabular_rmdp(const RandomRmdpSpec& spec, std::uint64_t seed);

/// Perturbations u with sum(u) = 0, support inside the support of nominal,
/// and nominal + u still a probability vector.  Each draw starts at L2 norm
/// `scale` and is halved until feasible; 100 straight failures throw.
std::vector<Vec> feasible_vertices(const Vec& nominal, int n_vertices, double scale,
                                   Rng& rng);

/// Attach a fresh feasible FiniteVertices set to every (s,a).
void attach_random_finite_sets(TabularRmdp& m, int n_vertices, double scale,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Continuous control
// ---------------------------------------------------------------------------

/// Pole balancing, Euler integration.  Observation (x, x_dot, theta,
/// theta_dot); actions {0: push left, 1: push right}; reward +1 per step
/// until |x| > 2.4 or |theta| > 12 degrees.  action_noise is the probability
/// that the chosen action is replaced by a uniformly random one.
struct CartPoleSpec {
    double gravity = 9.8;
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double length = 0.5; // half pole length
    double force_mag = 10.0;
    double dt = 0.02;
    double action_noise = 0.0;
};

/// Under-powered car in a valley.  Observation (position, velocity); actions
/// {0,1,2} map to force {-1,0,+1} * power; reward -1 per step, 0 on reaching
/// the goal at position 0.5.
struct MountainCarSpec {
    double min_position = -1.2;
    double max_position = 0.6;
    double max_speed = 0.07;
    double power = 15e-4;
    double gravity = 0.0025;
    double goal_position = 0.5;
    double action_noise = 0.0;
};

/// Uniform rollout interface.  Tabular environments also expose the integer
/// state so callers can resolve per-(s,a) uncertainty sets and exact values.
class Environment {
public:
    virtual ~Environment() = default;
    virtual int action_count() const = 0;
    virtual Vec reset(Rng& rng) = 0;
    struct StepResult {
        Vec obs;
        double reward = 0.0;
        bool done = false;
    };
    virtual StepResult step(int action, Rng& rng) = 0;
    virtual std::optional<int> state_index() const { return std::nullopt; }
};

/// Rollouts start from a uniformly random state.
class TabularEnv final : public Environment {
public:
    explicit TabularEnv(TabularRmdp model);
    int action_count() const override;
    Vec reset(Rng& rng) override;
    StepResult step(int action, Rng& rng) override;
    std::optional<int> state_index() const override { return state_; }
    const TabularRmdp& model() const { return model_; }

private:
    TabularRmdp model_;
    int state_ = 0;
};

class CartPoleEnv final : public Environment {
public:
    explicit CartPoleEnv(const CartPoleSpec& spec);
    int action_count() const override { return 2; }
    Vec reset(Rng& rng) override;
    StepResult step(int action, Rng& rng) override;
    const CartPoleSpec& spec() const { return spec_; }

private:
    CartPoleSpec spec_;
    Vec state_;
    bool done_ = false;
};

class MountainCarEnv final : public Environment {
public:
    explicit MountainCarEnv(const MountainCarSpec& spec);
    int action_count() const override { return 3; }
    Vec reset(Rng& rng) override;
    StepResult step(int action, Rng& rng) override;
    const MountainCarSpec& spec() const { return spec_; }

private:
    MountainCarSpec spec_;
    Vec state_;
    bool done_ = false;
};

/// Copy of the spec with one named knob changed.  Unknown names throw
/// invalid_input listing the valid knobs for that environment.
ChainSpec perturb(const ChainSpec& spec, const std::string& knob, double value);
CartPoleSpec perturb(const CartPoleSpec& spec, const std::string& knob, double value);
MountainCarSpec perturb(const MountainCarSpec& spec, const std::string& knob, double value);

/// Draw from a categorical distribution given by a probability row.
int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng);

// ---------------------------------------------------------------------------
// Trajectory logging
// ---------------------------------------------------------------------------

struct TransitionRecord {
    long t = 0;
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    int set_id = 0;
};

/// Tabular rollout under a fixed policy from a given start state.
std::vector<TransitionRecord> rollout_tabular(const TabularRmdp& m, const Policy& pi,
                                              int horizon, int start_state, Rng& rng);

/// CSV with header t,s,a,r,s_next,set_id.
void write_transition_log(const std::string& path,
                          const std::vector<TransitionRecord>& log);

} // namespace rrl
