#include "rrl/bench.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rrl/errors.hpp"
#include "rrl/format.hpp"
#include "rrl/rmdp.hpp"

namespace rrl {

namespace {

using nlohmann::json;

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
    throw invalid_input("config error at " + path + ": " + what);
}

const json& require_field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail_field(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail_field(path + "." + key, "missing required field");
    return *it;
}

template <typename T>
T get_as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        fail_field(path, e.what());
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& path) {
    if (!j.is_object()) fail_field(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return get_as<T>(*it, path + "." + key);
}

template <typename T>
T field(const json& j, const char* key, const std::string& path) {
    return get_as<T>(require_field(j, key, path), path + "." + key);
}

EnvSpec parse_environment(const json& j) {
    const std::string path = "environment";
    const auto kind = field<std::string>(j, "kind", path);
    if (kind == "chain") {
        ChainSpec s;
        s.n_states = field_or(j, "n_states", s.n_states, path);
        s.slip = field_or(j, "slip", s.slip, path);
        s.discount = field_or(j, "discount", s.discount, path);
        s.reward_states = field_or(j, "reward_states", s.reward_states, path);
        return s;
    }
    if (kind == "cartpole") {
        CartPoleSpec s;
        s.gravity = field_or(j, "gravity", s.gravity, path);
        s.cart_mass = field_or(j, "cart_mass", s.cart_mass, path);
        s.pole_mass = field_or(j, "pole_mass", s.pole_mass, path);
        s.length = field_or(j, "length", s.length, path);
        s.force_mag = field_or(j, "force_mag", s.force_mag, path);
        s.dt = field_or(j, "dt", s.dt, path);
        s.action_noise = field_or(j, "action_noise", s.action_noise, path);
        return s;
    }
    if (kind == "mountain_car") {
        MountainCarSpec s;
        s.min_position = field_or(j, "min_position", s.min_position, path);
        s.max_position = field_or(j, "max_position", s.max_position, path);
        s.max_speed = field_or(j, "max_speed", s.max_speed, path);
        s.power = field_or(j, "power", s.power, path);
        s.gravity = field_or(j, "gravity", s.gravity, path);
        s.goal_position = field_or(j, "goal_position", s.goal_position, path);
        s.action_noise = field_or(j, "action_noise", s.action_noise, path);
        return s;
    }
    fail_field(path + ".kind",
               "must be one of chain, cartpole, mountain_car (got \"" + kind + "\")");
}

json environment_json(const EnvSpec& env) {
    json j;
    if (const auto* c = std::get_if<ChainSpec>(&env)) {
        j["kind"] = "chain";
        j["n_states"] = c->n_states;
        j["slip"] = c->slip;
        j["discount"] = c->discount;
        j["reward_states"] = c->reward_states;
    } else if (const auto* p = std::get_if<CartPoleSpec>(&env)) {
        j["kind"] = "cartpole";
        j["gravity"] = p->gravity;
        j["cart_mass"] = p->cart_mass;
        j["pole_mass"] = p->pole_mass;
        j["length"] = p->length;
        j["force_mag"] = p->force_mag;
        j["dt"] = p->dt;
        j["action_noise"] = p->action_noise;
    } else {
        const auto& m = std::get<MountainCarSpec>(env);
        j["kind"] = "mountain_car";
        j["min_position"] = m.min_position;
        j["max_position"] = m.max_position;
        j["max_speed"] = m.max_speed;
        j["power"] = m.power;
        j["gravity"] = m.gravity;
        j["goal_position"] = m.goal_position;
        j["action_noise"] = m.action_noise;
    }
    return j;
}

/// 1-D observation box of the environment, used to default feature boxes.
/// Chain states live on [0, n-1]; continuous environments have no default
/// box (their callers must spell lows/highs out).
std::optional<std::pair<Vec, Vec>> default_box(const EnvSpec& env) {
    if (const auto* c = std::get_if<ChainSpec>(&env)) {
        Vec lo(1), hi(1);
        lo << 0.0;
        hi << static_cast<double>(c->n_states - 1);
        return std::make_pair(lo, hi);
    }
    return std::nullopt;
}

StateFeatures parse_features(const json& j, const EnvSpec& env) {
    const std::string path = "features";
    const auto kind = field<std::string>(j, "kind", path);
    const auto box = default_box(env);
    const auto resolve_box = [&](Vec& lows, Vec& highs) {
        const auto lo = field_or<std::vector<double>>(j, "lows", {}, path);
        const auto hi = field_or<std::vector<double>>(j, "highs", {}, path);
        if (lo.empty() != hi.empty()) {
            fail_field(path, "lows and highs must be given together");
        }
        if (lo.empty()) {
            if (!box) {
                fail_field(path,
                           "lows/highs are required for continuous environments");
            }
            lows = box->first;
            highs = box->second;
            return;
        }
        lows = Eigen::Map<const Vec>(lo.data(), static_cast<long>(lo.size()));
        highs = Eigen::Map<const Vec>(hi.data(), static_cast<long>(hi.size()));
    };
    if (kind == "tabular") {
        const auto* c = std::get_if<ChainSpec>(&env);
        if (!c) fail_field(path + ".kind", "tabular features need a tabular environment");
        return TabularFeatures{c->n_states};
    }
    if (kind == "polynomial") {
        PolynomialFeatures f;
        f.degree = field<int>(j, "degree", path);
        if (f.degree < 0) fail_field(path + ".degree", "must be >= 0");
        resolve_box(f.lows, f.highs);
        return f;
    }
    if (kind == "rbf") {
        RbfGridFeatures f;
        f.counts = field<std::vector<int>>(j, "counts", path);
        if (f.counts.empty()) fail_field(path + ".counts", "must be non-empty");
        resolve_box(f.lows, f.highs);
        const auto widths = field_or<std::vector<double>>(j, "widths", {}, path);
        if (!widths.empty()) {
            f.widths = Eigen::Map<const Vec>(widths.data(), static_cast<long>(widths.size()));
        }
        return f;
    }
    fail_field(path + ".kind",
               "must be one of tabular, polynomial, rbf (got \"" + kind + "\")");
}

json features_json(const StateFeatures& f) {
    json j;
    if (const auto* t = std::get_if<TabularFeatures>(&f)) {
        j["kind"] = "tabular";
        (void)t;
    } else if (const auto* p = std::get_if<PolynomialFeatures>(&f)) {
        j["kind"] = "polynomial";
        j["degree"] = p->degree;
        j["lows"] = std::vector<double>(p->lows.data(), p->lows.data() + p->lows.size());
        j["highs"] = std::vector<double>(p->highs.data(), p->highs.data() + p->highs.size());
    } else {
        const auto& r = std::get<RbfGridFeatures>(f);
        j["kind"] = "rbf";
        j["counts"] = r.counts;
        j["lows"] = std::vector<double>(r.lows.data(), r.lows.data() + r.lows.size());
        j["highs"] = std::vector<double>(r.highs.data(), r.highs.data() + r.highs.size());
        if (r.widths.size() > 0) {
            j["widths"] =
                std::vector<double>(r.widths.data(), r.widths.data() + r.widths.size());
        }
    }
    return j;
}

UncertaintyConfig parse_uncertainty(const json& j) {
    const std::string path = "uncertainty";
    UncertaintyConfig u;
    u.kind = field<std::string>(j, "kind", path);
    if (u.kind != "degenerate" && u.kind != "centered_sphere" &&
        u.kind != "simplex_sphere") {
        fail_field(path + ".kind",
                   "must be one of degenerate, centered_sphere, simplex_sphere (got \"" +
                       u.kind + "\")");
    }
    u.radius = field_or(j, "radius", 0.0, path);
    if (!(u.radius >= 0.0) || !std::isfinite(u.radius)) {
        fail_field(path + ".radius", "must be finite and >= 0");
    }
    const auto rule = field_or<std::string>(j, "radius_rule", "absolute", path);
    if (rule == "absolute") {
        u.radius_rule = RadiusRule::absolute;
    } else if (rule == "frobenius_scaled") {
        u.radius_rule = RadiusRule::frobenius_scaled;
    } else {
        fail_field(path + ".radius_rule",
                   "must be absolute or frobenius_scaled (got \"" + rule + "\")");
    }
    return u;
}

int env_action_count(const EnvSpec& env) {
    if (std::holds_alternative<MountainCarSpec>(env)) return 3;
    return 2;
}

void check_sweep_knob(const ExperimentConfig& cfg) {
    const double probe = cfg.sweep.values.front();
    std::visit([&](const auto& spec) { (void)perturb(spec, cfg.sweep.knob, probe); },
               cfg.environment);
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.sweep.knob.empty()) fail_field("sweep.knob", "must be non-empty");
    if (cfg.sweep.values.empty()) fail_field("sweep.values", "must be non-empty");
    if (cfg.replications < 1) fail_field("replications", "must be >= 1");
    if (!(cfg.lambda >= 0.0 && cfg.lambda < 1.0)) fail_field("lambda", "must lie in [0,1)");
    if (!(cfg.eps0 > 0.0)) fail_field("eps0", "must be positive");
    if (cfg.outer_iterations < 1) fail_field("outer_iterations", "must be >= 1");
    if (cfg.n_trajectories < 1) fail_field("n_trajectories", "must be >= 1");
    if (cfg.horizon < 1) fail_field("horizon", "must be >= 1");
    if (cfg.inner_max_steps < 0) fail_field("inner_max_steps", "must be >= 0");
    if (cfg.episodes < 1) fail_field("episodes", "must be >= 1");
    if (!(cfg.eval_discount > 0.0 && cfg.eval_discount <= 1.0)) {
        fail_field("eval_discount", "must lie in (0,1]");
    }
    if (cfg.ridge && !(*cfg.ridge > 0.0)) fail_field("ridge", "must be positive");
    try {
        validate_schedule(cfg.schedule);
    } catch (const invalid_input& e) {
        fail_field("schedule", e.what());
    }
    try {
        check_sweep_knob(cfg);
    } catch (const invalid_input& e) {
        fail_field("sweep.knob", e.what());
    }
    if (cfg.algorithm == Algorithm::rlspi && cfg.sigma_mode == SigmaMode::stacked_gram &&
        cfg.uncertainty.kind == "simplex_sphere") {
        fail_field("sigma_mode",
                   "stacked_gram needs a shared centered_sphere set; use induced for "
                   "simplex_sphere");
    }
}

const ChainSpec& require_chain(const ExperimentConfig& cfg, const char* who) {
    const auto* chain = std::get_if<ChainSpec>(&cfg.environment);
    if (!chain) {
        throw invalid_input(std::string(who) +
                            " needs the chain environment; continuous environments are "
                            "evaluation-only (eval subcommand)");
    }
    return *chain;
}

StackedActionFeatures stacked_features(const ExperimentConfig& cfg) {
    return StackedActionFeatures{cfg.features, env_action_count(cfg.environment)};
}

/// Chain model with the configured uncertainty binding.
TabularRmdp build_model(const ExperimentConfig& cfg) {
    const ChainSpec& chain = require_chain(cfg, "model construction");
    TabularRmdp m = build_chain(chain);
    const double radius = effective_radius(cfg);
    if (cfg.uncertainty.kind == "degenerate" || radius == 0.0) return m;
    if (cfg.uncertainty.kind == "centered_sphere") {
        bind_shared_set(m, CenteredSphere{radius, m.n_states, true});
        return m;
    }
    m.set_pool.clear();
    m.set_index.resize(static_cast<std::size_t>(m.n_states) * m.n_actions);
    for (int r = 0; r < m.n_states * m.n_actions; ++r) {
        m.set_pool.push_back(SimplexSphere{radius, m.kernel.row(r).transpose()});
        m.set_index[static_cast<std::size_t>(r)] = r;
    }
    return m;
}

/// Exact score of a tabular policy on the chain perturbed along the sweep
/// knob: mean over states of the policy's value under the perturbed nominal
/// kernel.  The knob only moves the evaluation model; the policy is fixed.
double chain_cell_metric(const ChainSpec& base, const std::string& knob, double value,
                         const Policy& pi) {
    const TabularRmdp shifted = build_chain(perturb(base, knob, value));
    return nonrobust_value(shifted, pi).mean();
}

double mc_cell_metric(const ExperimentConfig& cfg, double value, const Vec& w,
                      std::uint64_t seed) {
    const StackedActionFeatures stacked = stacked_features(cfg);
    const auto policy = [&](const Vec& obs) { return greedy_action(stacked, w, obs); };
    std::unique_ptr<Environment> env;
    if (const auto* p = std::get_if<CartPoleSpec>(&cfg.environment)) {
        env = std::make_unique<CartPoleEnv>(perturb(*p, cfg.sweep.knob, value));
    } else {
        const auto& m = std::get<MountainCarSpec>(cfg.environment);
        env = std::make_unique<MountainCarEnv>(perturb(m, cfg.sweep.knob, value));
    }
    return evaluate_policy_mc(*env, policy, cfg.episodes, cfg.horizon, cfg.eval_discount,
                              seed)
        .mean;
}

struct TrainedReplication {
    Policy policy;
    std::optional<PolicyIterationResult> learner;
};

TrainedReplication train_replication(const ExperimentConfig& cfg, const TabularRmdp& m,
                                     const StackedActionFeatures& stacked,
                                     std::uint64_t seed) {
    TrainedReplication out;
    switch (cfg.algorithm) {
    case Algorithm::rlspi:
    case Algorithm::lspi: {
        PolicyIterationConfig pic;
        pic.outer_iterations = cfg.outer_iterations;
        pic.n_trajectories = cfg.n_trajectories;
        pic.horizon = cfg.horizon;
        pic.inner_max_steps = cfg.inner_max_steps;
        pic.eps0 = cfg.eps0;
        pic.lambda = cfg.lambda;
        pic.schedule = cfg.schedule;
        pic.ridge = cfg.ridge;
        pic.sigma_mode = cfg.sigma_mode;
        pic.seed = seed;
        out.learner = cfg.algorithm == Algorithm::rlspi ? rlspi_run(m, stacked, pic)
                                                        : lspi_run(m, stacked, pic);
        out.policy = out.learner->policy;
        return out;
    }
    case Algorithm::exact_robust_pi: {
        out.policy = *robust_value_iteration(m, 1e-10).greedy;
        return out;
    }
    case Algorithm::exact_pi: {
        TabularRmdp plain = m;
        bind_shared_set(plain, Degenerate{m.n_states});
        out.policy = *robust_value_iteration(plain, 1e-10).greedy;
        return out;
    }
    }
    throw invalid_input("unknown algorithm");
}

/// Work queue over [0, count); each index is handled exactly once.  The
/// first exception wins and is rethrown after all workers drain.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    const int use = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (use == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(use));
    for (int i = 0; i < use; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

std::string algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::rlspi: return "rlspi";
    case Algorithm::lspi: return "lspi";
    case Algorithm::exact_robust_pi: return "exact-robust-pi";
    case Algorithm::exact_pi: return "exact-pi";
    }
    return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "rlspi") return Algorithm::rlspi;
    if (name == "lspi") return Algorithm::lspi;
    if (name == "exact-robust-pi") return Algorithm::exact_robust_pi;
    if (name == "exact-pi") return Algorithm::exact_pi;
    fail_field("algorithm",
               "must be one of rlspi, lspi, exact-robust-pi, exact-pi (got \"" + name +
                   "\")");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw invalid_input(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw invalid_input("config error at top level: expected an object");

    ExperimentConfig cfg;
    cfg.environment = parse_environment(require_field(j, "environment", "config"));
    cfg.algorithm = algorithm_from_name(field<std::string>(j, "algorithm", "config"));
    if (j.contains("features")) {
        cfg.features = parse_features(j.at("features"), cfg.environment);
    } else if (const auto* chain = std::get_if<ChainSpec>(&cfg.environment)) {
        cfg.features = TabularFeatures{chain->n_states};
    } else {
        fail_field("features", "required for continuous environments");
    }
    if (j.contains("uncertainty")) cfg.uncertainty = parse_uncertainty(j.at("uncertainty"));

    const auto mode = field_or<std::string>(j, "sigma_mode", "stacked_gram", "config");
    if (mode == "stacked_gram") {
        cfg.sigma_mode = SigmaMode::stacked_gram;
    } else if (mode == "induced") {
        cfg.sigma_mode = SigmaMode::induced;
    } else {
        fail_field("sigma_mode", "must be stacked_gram or induced (got \"" + mode + "\")");
    }

    cfg.lambda = field_or(j, "lambda", cfg.lambda, "config");
    cfg.eps0 = field_or(j, "eps0", cfg.eps0, "config");
    cfg.outer_iterations = field_or(j, "outer_iterations", cfg.outer_iterations, "config");
    cfg.n_trajectories = field_or(j, "n_trajectories", cfg.n_trajectories, "config");
    cfg.horizon = field_or(j, "horizon", cfg.horizon, "config");
    cfg.inner_max_steps = field_or(j, "inner_max_steps", cfg.inner_max_steps, "config");
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        cfg.schedule.gamma0 = field_or(s, "gamma0", cfg.schedule.gamma0, "schedule");
        cfg.schedule.t0 = field_or(s, "t0", cfg.schedule.t0, "schedule");
        cfg.schedule.kappa = field_or(s, "kappa", cfg.schedule.kappa, "schedule");
    }
    if (j.contains("ridge") && !j.at("ridge").is_null()) {
        cfg.ridge = get_as<double>(j.at("ridge"), "ridge");
    }
    cfg.episodes = field_or(j, "episodes", cfg.episodes, "config");
    cfg.eval_discount = field_or(j, "eval_discount", cfg.eval_discount, "config");

    const json& sweep = require_field(j, "sweep", "config");
    cfg.sweep.knob = field<std::string>(sweep, "knob", "sweep");
    cfg.sweep.values = field<std::vector<double>>(sweep, "values", "sweep");

    cfg.replications = field_or(j, "replications", cfg.replications, "config");
    cfg.base_seed = field_or<std::uint64_t>(j, "base_seed", cfg.base_seed, "config");
    cfg.output_dir = field_or<std::string>(j, "output_dir", cfg.output_dir, "config");

    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open config file \"" + path + "\"");
    std::ostringstream text;
    text << file.rdbuf();
    return parse_experiment_config(text.str());
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
    json j;
    j["environment"] = environment_json(cfg.environment);
    j["algorithm"] = algorithm_name(cfg.algorithm);
    j["features"] = features_json(cfg.features);
    json u;
    u["kind"] = cfg.uncertainty.kind;
    u["radius"] = cfg.uncertainty.radius;
    u["radius_rule"] = cfg.uncertainty.radius_rule == RadiusRule::absolute
                            ? "absolute"
                            : "frobenius_scaled";
    j["uncertainty"] = u;
    j["sigma_mode"] = cfg.sigma_mode == SigmaMode::stacked_gram ? "stacked_gram" : "induced";
    j["lambda"] = cfg.lambda;
    j["eps0"] = cfg.eps0;
    j["outer_iterations"] = cfg.outer_iterations;
    j["n_trajectories"] = cfg.n_trajectories;
    j["horizon"] = cfg.horizon;
    j["inner_max_steps"] = cfg.inner_max_steps;
    json sched;
    sched["gamma0"] = cfg.schedule.gamma0;
    sched["t0"] = cfg.schedule.t0;
    sched["kappa"] = cfg.schedule.kappa;
    j["schedule"] = sched;
    if (cfg.ridge) j["ridge"] = *cfg.ridge;
    j["episodes"] = cfg.episodes;
    j["eval_discount"] = cfg.eval_discount;
    json sweep;
    sweep["knob"] = cfg.sweep.knob;
    sweep["values"] = cfg.sweep.values;
    j["sweep"] = sweep;
    j["replications"] = cfg.replications;
    j["base_seed"] = cfg.base_seed;
    j["output_dir"] = cfg.output_dir;
    return j.dump(2) + "\n";
}

double effective_radius(const ExperimentConfig& cfg) {
    if (cfg.uncertainty.kind == "degenerate") return 0.0;
    if (cfg.uncertainty.radius_rule == RadiusRule::absolute) return cfg.uncertainty.radius;
    const ChainSpec& chain = require_chain(cfg, "the frobenius_scaled radius rule");
    const FeatureMatrix phi =
        tabulate_state_action_features(stacked_features(cfg), chain.n_states);
    return cfg.uncertainty.radius / phi.gram.norm();
}

std::vector<AggregateRow> aggregate_rows(const std::vector<CellResult>& rows) {
    std::vector<AggregateRow> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t k = i;
        while (k < rows.size() && rows[k].value == rows[i].value &&
               rows[k].knob == rows[i].knob) {
            ++k;
        }
        AggregateRow agg;
        agg.knob = rows[i].knob;
        agg.value = rows[i].value;
        agg.n = static_cast<long>(k - i);
        for (std::size_t r = i; r < k; ++r) agg.mean += rows[r].metric;
        agg.mean /= static_cast<double>(agg.n);
        for (std::size_t r = i; r < k; ++r) {
            const double diff = rows[r].metric - agg.mean;
            agg.std_dev += diff * diff;
        }
        agg.std_dev = std::sqrt(agg.std_dev / static_cast<double>(agg.n));
        out.push_back(std::move(agg));
        i = k;
    }
    return out;
}

void write_results_csv(const std::string& path, const std::vector<CellResult>& rows) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open results file \"" + path + "\"");
    file << "knob,value,seed,metric\n";
    for (const CellResult& row : rows) {
        file << row.knob << ',' << format_double(row.value) << ',' << row.seed << ','
             << format_double(row.metric) << '\n';
    }
    if (!file.good()) throw invalid_input("failed writing results file \"" + path + "\"");
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open aggregate file \"" + path + "\"");
    file << "knob,value,mean,std,n\n";
    for (const AggregateRow& row : rows) {
        file << row.knob << ',' << format_double(row.value) << ','
             << format_double(row.mean) << ',' << format_double(row.std_dev) << ','
             << row.n << '\n';
    }
    if (!file.good()) throw invalid_input("failed writing aggregate file \"" + path + "\"");
}

SweepResult run_experiment(const ExperimentConfig& cfg, int threads) {
    validate_config(cfg);
    const ChainSpec& chain = require_chain(cfg, "run_experiment");
    const StackedActionFeatures stacked = stacked_features(cfg);
    const TabularRmdp model = build_model(cfg);
    const std::size_t reps = static_cast<std::size_t>(cfg.replications);

    std::vector<TrainedReplication> trained(reps);
    parallel_for(reps, threads, [&](std::size_t k) {
        trained[k] = train_replication(cfg, model, stacked,
                                       cfg.base_seed + static_cast<std::uint64_t>(k));
    });

    SweepResult result;
    result.rows.resize(cfg.sweep.values.size() * reps);
    parallel_for(result.rows.size(), threads, [&](std::size_t cell) {
        const std::size_t vi = cell / reps;
        const std::size_t rep = cell % reps;
        CellResult& row = result.rows[cell];
        row.knob = cfg.sweep.knob;
        row.value = cfg.sweep.values[vi];
        row.seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
        row.metric = chain_cell_metric(chain, cfg.sweep.knob, row.value, trained[rep].policy);
    });
    result.aggregates = aggregate_rows(result.rows);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const auto under = [&](const std::string& name) {
        return (fs::path(cfg.output_dir) / name).string();
    };
    write_results_csv(under("results.csv"), result.rows);
    write_aggregate_csv(under("aggregate.csv"), result.aggregates);
    for (std::size_t k = 0; k < reps; ++k) {
        if (!trained[k].learner) continue;
        const std::string tag = "_rep" + std::to_string(k);
        write_weights_csv(under("weights" + tag + ".csv"),
                          trained[k].learner->iterations[trained[k].learner->best_iteration]);
        write_iteration_records(under("records" + tag + ".jsonl"),
                                trained[k].learner->iterations);
    }
    std::ofstream cfg_file(under("resolved_config.json"), std::ios::binary);
    if (!cfg_file) throw invalid_input("cannot write resolved_config.json");
    cfg_file << resolved_config_json(cfg);
    return result;
}

Vec read_final_weights_csv(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open weights file \"" + path + "\"");
    std::string line;
    if (!std::getline(file, line) || line != "iteration,index,value") {
        throw invalid_input("weights file \"" + path +
                            "\" must start with header iteration,index,value");
    }
    int last_iteration = -1;
    std::vector<double> values;
    long line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        int iteration = 0;
        long index = 0;
        double value = 0.0;
        char c1 = 0, c2 = 0;
        if (!(row >> iteration >> c1 >> index >> c2 >> value) || c1 != ',' || c2 != ',') {
            throw invalid_input("weights file \"" + path + "\": bad row at line " +
                                std::to_string(line_no));
        }
        if (iteration != last_iteration) {
            last_iteration = iteration;
            values.clear();
        }
        if (index != static_cast<long>(values.size())) {
            throw invalid_input("weights file \"" + path +
                                "\": indices must be contiguous from 0 (line " +
                                std::to_string(line_no) + ")");
        }
        values.push_back(value);
    }
    if (values.empty()) throw invalid_input("weights file \"" + path + "\" has no rows");
    return Eigen::Map<const Vec>(values.data(), static_cast<long>(values.size()));
}

std::vector<CellResult> evaluate_weights(const ExperimentConfig& cfg, const Vec& w,
                                         std::uint64_t seed) {
    validate_config(cfg);
    const StackedActionFeatures stacked = stacked_features(cfg);
    const long want = feature_dim(stacked);
    if (w.size() != want) {
        throw invalid_input("weight vector has " + std::to_string(w.size()) +
                            " entries; the feature map needs " + std::to_string(want));
    }
    std::vector<CellResult> rows;
    rows.reserve(cfg.sweep.values.size());
    const auto* chain = std::get_if<ChainSpec>(&cfg.environment);
    Policy pi;
    if (chain) {
        const FeatureMatrix phi = tabulate_state_action_features(stacked, chain->n_states);
        pi = greedy_policy_from_weights(phi.phi, chain->n_states, 2, w);
    }
    for (double value : cfg.sweep.values) {
        CellResult row;
        row.knob = cfg.sweep.knob;
        row.value = value;
        row.seed = seed;
        row.metric = chain ? chain_cell_metric(*chain, cfg.sweep.knob, value, pi)
                           : mc_cell_metric(cfg, value, w, seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace rrl
