#include "rrl/rlspi.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rrl/errors.hpp"
#include "rrl/format.hpp"
#include "rrl/linear_fa.hpp"

namespace rrl {

namespace {

void validate_config(const PolicyIterationConfig& c) {
    if (c.outer_iterations < 1) throw invalid_input("need outer_iterations >= 1");
    if (c.n_trajectories < 1) throw invalid_input("need n_trajectories >= 1");
    if (c.horizon < 1) throw invalid_input("need horizon >= 1");
    if (!(c.eps0 > 0.0)) throw invalid_input("eps0 must be positive");
    if (c.inner_max_steps < 0) throw invalid_input("inner_max_steps must be >= 0");
    if (!(c.lambda >= 0.0 && c.lambda < 1.0)) throw invalid_input("lambda must lie in [0,1)");
    validate_schedule(c.schedule);
}

// Shared closed-form sigma for stacked_gram mode; requires one shared
// CenteredSphere (or Degenerate) binding.
std::function<double(const Vec&)> shared_gram_sigma(const TabularRmdp& m,
                                                    const FeatureMatrix& phi_sa) {
    for (int idx : m.set_index) {
        if (idx != m.set_index.front()) {
            throw invalid_input("stacked_gram mode needs one shared uncertainty set");
        }
    }
    const UncertaintySet& set = m.set_pool[static_cast<std::size_t>(m.set_index.front())];
    if (std::holds_alternative<Degenerate>(set)) {
        return [](const Vec&) { return 0.0; };
    }
    if (const auto* sphere = std::get_if<CenteredSphere>(&set)) {
        return make_gram_sigma(phi_sa.gram, sphere->radius);
    }
    throw unsupported_variant("stacked_gram mode supports CenteredSphere or Degenerate sets");
}

/// phi_pi holds one row per state: the feature row of (s, pi(s)), or the
/// action average while the behavior policy is uniform.
SigmaOracle build_oracle(const TabularRmdp& m, const Mat& phi_pi, SigmaMode mode,
                         const std::function<double(const Vec&)>& shared) {
    SigmaOracle oracle;
    oracle.sigma_by_set.resize(m.set_pool.size());
    if (mode == SigmaMode::stacked_gram) {
        for (auto& slot : oracle.sigma_by_set) slot = shared;
        return oracle;
    }
    for (std::size_t i = 0; i < m.set_pool.size(); ++i) {
        const UncertaintySet& set = m.set_pool[i];
        if (const auto* sphere = std::get_if<CenteredSphere>(&set)) {
            oracle.sigma_by_set[i] = make_sphere_sigma(*sphere, phi_pi);
        } else {
            oracle.sigma_by_set[i] = make_general_sigma(set, phi_pi);
        }
    }
    return oracle;
}

} // namespace

int greedy_action(const Mat& phi_sa, int n_actions, const Vec& w, int s) {
    if (n_actions < 1) throw invalid_input("need n_actions >= 1");
    const long row0 = static_cast<long>(s) * n_actions;
    if (s < 0 || row0 + n_actions > phi_sa.rows()) {
        throw invalid_input("greedy_action state out of range");
    }
    if (w.size() != phi_sa.cols()) throw invalid_input("weight length mismatch");
    int best = 0;
    double best_q = phi_sa.row(row0).dot(w);
    for (int a = 1; a < n_actions; ++a) {
        const double q = phi_sa.row(row0 + a).dot(w);
        if (q > best_q) { // strict: ties keep the lowest action index
            best_q = q;
            best = a;
        }
    }
    return best;
}

int greedy_action(const StackedActionFeatures& f, const Vec& w, const Vec& obs) {
    if (f.n_actions < 1) throw invalid_input("need n_actions >= 1");
    int best = 0;
    double best_q = feature_eval(f, obs, 0).dot(w);
    for (int a = 1; a < f.n_actions; ++a) {
        const double q = feature_eval(f, obs, a).dot(w);
        if (q > best_q) {
            best_q = q;
            best = a;
        }
    }
    return best;
}

Policy greedy_policy_from_weights(const Mat& phi_sa, int n_states, int n_actions,
                                  const Vec& w) {
    Policy pi(static_cast<std::size_t>(n_states));
    for (int s = 0; s < n_states; ++s) {
        pi[static_cast<std::size_t>(s)] = greedy_action(phi_sa, n_actions, w, s);
    }
    return pi;
}

PolicyIterationResult rlspi_run(const TabularRmdp& m, const StackedActionFeatures& features,
                                const PolicyIterationConfig& config) {
    validate_rmdp(m);
    validate_config(config);
    if (features.n_actions != m.n_actions) {
        throw invalid_input("feature map and model disagree on the action count");
    }
    const FeatureMatrix phi_sa = tabulate_state_action_features(features, m.n_states);
    const long L = phi_sa.phi.cols();
    Rng rng(config.seed);

    std::function<double(const Vec&)> shared;
    if (config.sigma_mode == SigmaMode::stacked_gram) {
        shared = shared_gram_sigma(m, phi_sa);
    }

    std::uniform_int_distribution<int> pick_action(0, m.n_actions - 1);
    std::uniform_int_distribution<int> pick_state(0, m.n_states - 1);
    const long cap = config.inner_max_steps > 0 ? config.inner_max_steps
                                                : std::numeric_limits<long>::max();

    Policy pi; // empty while the behavior policy is still uniform random
    PolicyIterationResult result;
    for (int k = 0; k < config.outer_iterations; ++k) {
        const bool uniform_policy = pi.empty();
        Mat phi_pi(m.n_states, L);
        for (int s = 0; s < m.n_states; ++s) {
            if (uniform_policy) {
                phi_pi.row(s).setZero();
                for (int a = 0; a < m.n_actions; ++a) {
                    phi_pi.row(s) += phi_sa.phi.row(m.row(s, a));
                }
                phi_pi.row(s) /= static_cast<double>(m.n_actions);
            } else {
                phi_pi.row(s) = phi_sa.phi.row(m.row(s, pi[static_cast<std::size_t>(s)]));
            }
        }
        const SigmaOracle oracle = build_oracle(m, phi_pi, config.sigma_mode, shared);
        LearnerState learner = learner_init(static_cast<int>(L), m.discount, config.lambda,
                                            std::nullopt, config.schedule, config.ridge);
        IterationRecord rec;
        rec.iteration = k;
        rec.stop_reason = "samples exhausted";
        bool stop = false;
        for (int traj = 0; traj < config.n_trajectories && !stop; ++traj) {
            int s = pick_state(rng);
            int a = uniform_policy ? pick_action(rng) : pi[static_cast<std::size_t>(s)];
            reset_trace(learner);
            for (int step = 0; step < config.horizon; ++step) {
                const int row = m.row(s, a);
                TransitionSample sample;
                sample.phi_now = phi_sa.phi.row(row).transpose();
                sample.reward = m.reward(s, a);
                sample.set_id = m.set_index[static_cast<std::size_t>(row)];
                const int s_next = sample_categorical(m.kernel.row(row), rng);
                const int a_next =
                    uniform_policy ? pick_action(rng) : pi[static_cast<std::size_t>(s_next)];
                sample.phi_next = phi_sa.phi.row(m.row(s_next, a_next)).transpose();
                observe(learner, sample);
                const Vec w_prev = learner.w;
                learner_step(learner, oracle);
                rec.inner_steps += 1;
                // Armed only after the first trajectory: with w = 0 a single
                // zero-reward sample gives a zero step, which must not read
                // as convergence.
                if (traj > 0 && (learner.w - w_prev).norm() < config.eps0) {
                    rec.inner_converged = true;
                    rec.stop_reason = "weight change below eps0";
                    stop = true;
                    break;
                }
                if (rec.inner_steps >= cap) {
                    rec.stop_reason = "inner step cap reached";
                    stop = true;
                    break;
                }
                s = s_next;
                a = a_next;
            }
        }
        rec.w = learner.w;
        rec.greedy = greedy_policy_from_weights(phi_sa.phi, m.n_states, m.n_actions, learner.w);
        pi = rec.greedy;
        result.iterations.push_back(std::move(rec));
    }
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < result.iterations.size(); ++k) {
        const double score =
            robust_policy_evaluation_exact(m, result.iterations[k].greedy, 1e-10)
                .value.mean();
        if (score > best_score) {
            best_score = score;
            result.best_iteration = static_cast<int>(k);
        }
    }
    result.policy = result.iterations[result.best_iteration].greedy;
    result.w = result.iterations[result.best_iteration].w;
    return result;
}

PolicyIterationResult lspi_run(const TabularRmdp& m, const StackedActionFeatures& features,
                               const PolicyIterationConfig& config) {
    TabularRmdp plain = m;
    bind_shared_set(plain, Degenerate{m.n_states});
    return rlspi_run(plain, features, config);
}

RobustEval evaluate_policy_robust(const TabularRmdp& m, const Policy& pi, double tol) {
    RobustEval out;
    const Vec v_star = robust_value_iteration(m, tol).value;
    out.value = robust_policy_evaluation_exact(m, pi, tol).value;
    out.sup_gap = (v_star - out.value).lpNorm<Eigen::Infinity>();
    try {
        const SteadyDistribution d = steady_state(policy_kernel(m, pi));
        out.d_gap = weighted_norm(v_star - out.value, d.d);
    } catch (const non_ergodic&) {
        out.d_gap = std::nullopt;
    }
    return out;
}

McEval evaluate_policy_mc(Environment& env, const std::function<int(const Vec&)>& policy,
                          int episodes, int horizon, double discount, std::uint64_t seed) {
    if (episodes < 1 || horizon < 1) throw invalid_input("need episodes >= 1, horizon >= 1");
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw invalid_input("discount must lie in (0,1]");
    }
    Rng rng(seed);
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    for (int ep = 0; ep < episodes; ++ep) {
        Vec obs = env.reset(rng);
        double value = 0.0;
        double weight = 1.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = policy(obs);
            const Environment::StepResult step = env.step(a, rng);
            value += weight * step.reward;
            weight *= discount;
            obs = step.obs;
            if (step.done) break;
        }
        returns.push_back(value);
    }
    McEval out;
    out.episodes = episodes;
    for (double r : returns) out.mean += r;
    out.mean /= episodes;
    double var = 0.0;
    for (double r : returns) var += (r - out.mean) * (r - out.mean);
    out.stddev = std::sqrt(var / episodes);
    return out;
}

void write_weights_csv(const std::string& path, const IterationRecord& record) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open weights file \"" + path + "\"");
    file << "iteration,index,value\n";
    for (long i = 0; i < record.w.size(); ++i) {
        file << record.iteration << ',' << i << ',' << format_double(record.w(i)) << '\n';
    }
    if (!file.good()) throw invalid_input("failed writing weights file \"" + path + "\"");
}

void write_iteration_records(const std::string& path,
                             const std::vector<IterationRecord>& records) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open record file \"" + path + "\"");
    for (const IterationRecord& rec : records) {
        nlohmann::json j;
        j["iteration"] = rec.iteration;
        j["inner_steps"] = rec.inner_steps;
        j["inner_converged"] = rec.inner_converged;
        j["stop_reason"] = rec.stop_reason;
        j["w"] = std::vector<double>(rec.w.data(), rec.w.data() + rec.w.size());
        j["greedy"] = rec.greedy;
        file << j.dump() << '\n';
    }
    if (!file.good()) throw invalid_input("failed writing record file \"" + path + "\"");
}

} // namespace rrl
