#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rrl/envs.hpp"
#include "rrl/features.hpp"
#include "rrl/learner.hpp"
#include "rrl/rlspi.hpp"

namespace rrl {

using EnvSpec = std::variant<ChainSpec, CartPoleSpec, MountainCarSpec>;

/// rlspi / lspi train the online learner; the exact variants run tabular
/// value iteration (with or without the configured uncertainty binding).
enum class Algorithm { rlspi, lspi, exact_robust_pi, exact_pi };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

enum class RadiusRule { absolute, frobenius_scaled };

/// Uncertainty binding applied to the training model.  radius 0 always maps
/// to Degenerate.  frobenius_scaled divides radius by ||Phi'Phi||_F of the
/// tabulated state-action features before binding.
struct UncertaintyConfig {
    std::string kind = "degenerate"; // degenerate | centered_sphere | simplex_sphere
    double radius = 0.0;
    RadiusRule radius_rule = RadiusRule::absolute;
};

struct SweepConfig {
    std::string knob;
    std::vector<double> values;
};

/// One experiment: an environment, a training algorithm, and a perturbation
/// sweep scored per replication.  Replication k trains with seed
/// base_seed + k.  episodes / eval_discount only matter for Monte Carlo
/// cells (continuous environments).
struct ExperimentConfig {
    EnvSpec environment;
    Algorithm algorithm = Algorithm::rlspi;
    StateFeatures features = TabularFeatures{0};
    UncertaintyConfig uncertainty;
    SigmaMode sigma_mode = SigmaMode::stacked_gram;
    double lambda = 0.0;
    double eps0 = 0.1;
    int outer_iterations = 20;
    int n_trajectories = 100;
    int horizon = 50;
    long inner_max_steps = 0; // 0 = no cap beyond n_trajectories * horizon
    StepSchedule schedule;
    std::optional<double> ridge;
    int episodes = 100;
    double eval_discount = 1.0;
    SweepConfig sweep;
    int replications = 20;
    std::uint64_t base_seed = 0;
    std::string output_dir = "out";
};

/// JSON schema (all scalar fields optional with the defaults above;
/// environment, algorithm and sweep are required):
///   {"environment": {"kind": "chain", "n_states": 10, "slip": 0.1, ...},
///    "algorithm": "rlspi",
///    "features": {"kind": "polynomial", "degree": 2},
///    "uncertainty": {"kind": "centered_sphere", "radius": 0.01,
///                    "radius_rule": "frobenius_scaled"},
///    "sweep": {"knob": "slip", "values": [0.1, 0.2]}, ...}
/// Throws invalid_input naming the offending field.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

/// The config with every default filled in, as a JSON document that parses
/// back to the same config.
std::string resolved_config_json(const ExperimentConfig& config);

/// Sphere radius after the radius rule is applied.
double effective_radius(const ExperimentConfig& config);

struct CellResult {
    std::string knob;
    double value = 0.0;
    std::uint64_t seed = 0;
    double metric = 0.0;
};

struct AggregateRow {
    std::string knob;
    double value = 0.0;
    double mean = 0.0;
    double std_dev = 0.0; // population std over replications
    long n = 0;
};

struct SweepResult {
    std::vector<CellResult> rows;         // sweep-value major, replication minor
    std::vector<AggregateRow> aggregates; // one row per sweep value
};

/// Trains one policy per replication, scores every (sweep value x
/// replication) cell, and writes results.csv, aggregate.csv, per-replication
/// weights_rep{k}.csv and records_rep{k}.jsonl (learner algorithms only),
/// and resolved_config.json under output_dir.  Chain cells score the trained
/// policy by its exact value on the perturbed nominal chain averaged over
/// states; training therefore requires the chain environment.  threads
/// parallelizes independent cells only, so outputs are identical for every
/// thread count.
SweepResult run_experiment(const ExperimentConfig& config, int threads = 1);

/// Recomputes the aggregate rows from raw cells (value-major input order).
std::vector<AggregateRow> aggregate_rows(const std::vector<CellResult>& rows);

/// Weight vector from a weights CSV (header iteration,index,value); the
/// file run_experiment writes holds the reported iterate's single block,
/// and in a multi-block file the last block wins.
Vec read_final_weights_csv(const std::string& path);

/// Sweep rows for a fixed weight vector: chain values exactly as
/// run_experiment scores them, continuous environments by the seeded Monte
/// Carlo return of the greedy policy (episodes, horizon, eval_discount from
/// the config).
std::vector<CellResult> evaluate_weights(const ExperimentConfig& config, const Vec& w,
                                         std::uint64_t seed);

/// results.csv layout: header knob,value,seed,metric.
void write_results_csv(const std::string& path, const std::vector<CellResult>& rows);

/// aggregate.csv layout: header knob,value,mean,std,n.
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);

} // namespace rrl
