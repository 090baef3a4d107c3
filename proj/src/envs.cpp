#include "rrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rrl/errors.hpp"
#include "rrl/format.hpp"

namespace rrl {

namespace {

int clamp_state(int s, int n) {
    return std::clamp(s, 0, n - 1);
}

int maybe_randomize_action(int action, int n_actions, double noise, Rng& rng) {
    if (noise <= 0.0) return action;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) >= noise) return action;
    std::uniform_int_distribution<int> pick(0, n_actions - 1);
    return pick(rng);
}

} // namespace

TabularRmdp build_chain(const ChainSpec& spec) {
    if (spec.n_states < 2) throw invalid_input("chain needs at least 2 states");
    if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) {
        throw invalid_input("chain slip must lie in [0,1]");
    }
    if (!(spec.discount > 0.0 && spec.discount < 1.0)) {
        throw invalid_input("chain discount must lie in (0,1)");
    }
    TabularRmdp m;
    m.n_states = spec.n_states;
    m.n_actions = 2;
    m.discount = spec.discount;
    m.reward = Mat::Zero(m.n_states, 2);
    for (int s : spec.reward_states) {
        if (s < 0 || s >= m.n_states) throw invalid_input("chain reward state out of range");
        m.reward.row(s).setOnes();
    }
    m.kernel = Mat::Zero(static_cast<long>(m.n_states) * 2, m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < 2; ++a) {
            const int dir = a == 0 ? -1 : 1;
            const int intended = clamp_state(s + dir, m.n_states);
            const int slipped = clamp_state(s - dir, m.n_states);
            m.kernel(m.row(s, a), intended) += 1.0 - spec.slip;
            m.kernel(m.row(s, a), slipped) += spec.slip;
        }
    }
    bind_shared_set(m, Degenerate{m.n_states});
    validate_rmdp(m);
    return m;
}

std::vector<Vec> feasible_vertices(const Vec& nominal, int n_vertices, double scale,
                                   Rng& rng) {
    if (n_vertices < 1) throw invalid_input("need n_vertices >= 1");
    if (!(scale > 0.0)) throw invalid_input("vertex scale must be positive");
    const long n = nominal.size();
    std::vector<long> support;
    for (long i = 0; i < n; ++i) {
        if (nominal(i) > 0.0) support.push_back(i);
    }
    std::vector<Vec> out;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < n_vertices; ++k) {
        if (support.size() < 2) {
            out.push_back(Vec::Zero(n)); // a single-successor row admits no perturbation
            continue;
        }
        Vec g = Vec::Zero(n);
        for (long i : support) g(i) = gauss(rng);
        double mean = 0.0;
        for (long i : support) mean += g(i);
        mean /= static_cast<double>(support.size());
        for (long i : support) g(i) -= mean; // sum-zero on the support
        const double norm = g.norm();
        if (norm < 1e-14) {
            out.push_back(Vec::Zero(n));
            continue;
        }
        Vec u = g * (scale / norm);
        bool ok = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
            const Vec candidate = nominal + u;
            if (candidate.minCoeff() >= 0.0 && candidate.maxCoeff() <= 1.0) {
                ok = true;
                break;
            }
            u *= 0.5;
        }
        if (!ok) {
            throw invalid_input(
                "could not build a feasible vertex near this nominal row in 100 retries");
        }
        out.push_back(std::move(u));
    }
    return out;
}

TabularRmdp random_tabular_rmdp(const RandomRmdpSpec& spec, std::uint64_t seed) {
    if (spec.n_states < 1 || spec.n_actions < 1) {
        throw invalid_input("random model needs n_states >= 1 and n_actions >= 1");
    }
    if (spec.branching < 1 || spec.branching > spec.n_states) {
        throw invalid_input("branching must lie in [1, n_states]");
    }
    if (!(spec.discount > 0.0 && spec.discount < 1.0)) {
        throw invalid_input("discount must lie in (0,1)");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    TabularRmdp m;
    m.n_states = spec.n_states;
    m.n_actions = spec.n_actions;
    m.discount = spec.discount;
    m.reward.resize(m.n_states, m.n_actions);
    m.kernel = Mat::Zero(static_cast<long>(m.n_states) * m.n_actions, m.n_states);
    std::vector<int> order(static_cast<std::size_t>(m.n_states));
    std::iota(order.begin(), order.end(), 0);
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
            m.reward(s, a) = unit(rng);
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0.0;
            std::vector<double> mass(static_cast<std::size_t>(spec.branching));
            for (double& w : mass) {
                w = expo(rng);
                total += w;
            }
            for (int b = 0; b < spec.branching; ++b) {
                m.kernel(m.row(s, a), order[static_cast<std::size_t>(b)]) =
                    mass[static_cast<std::size_t>(b)] / total;
            }
        }
    }
    if (spec.vertices_per_set < 1) {
        bind_shared_set(m, Degenerate{m.n_states});
    } else {
        for (int s = 0; s < m.n_states; ++s) {
            for (int a = 0; a < m.n_actions; ++a) {
                FiniteVertices fin;
                fin.vertices = feasible_vertices(m.kernel.row(m.row(s, a)).transpose(),
                                                 spec.vertices_per_set, spec.vertex_scale,
                                                 rng);
                m.set_pool.emplace_back(std::move(fin));
                m.set_index.push_back(static_cast<int>(m.set_pool.size()) - 1);
            }
        }
    }
    validate_rmdp(m);
    return m;
}

void attach_random_finite_sets(TabularRmdp& m, int n_vertices, double scale,
                               std::uint64_t seed) {
    Rng rng(seed);
    m.set_pool.clear();
    m.set_index.clear();
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
            FiniteVertices fin;
            fin.vertices = feasible_vertices(m.kernel.row(m.row(s, a)).transpose(),
                                             n_vertices, scale, rng);
            m.set_pool.emplace_back(std::move(fin));
            m.set_index.push_back(static_cast<int>(m.set_pool.size()) - 1);
        }
    }
    validate_rmdp(m);
}

// ---------------------------------------------------------------------------

TabularEnv::TabularEnv(TabularRmdp model) : model_(std::move(model)) {
    validate_rmdp(model_);
}

int TabularEnv::action_count() const {
    return model_.n_actions;
}

Vec TabularEnv::reset(Rng& rng) {
    std::uniform_int_distribution<int> pick(0, model_.n_states - 1);
    state_ = pick(rng);
    Vec obs(1);
    obs(0) = state_;
    return obs;
}

Environment::StepResult TabularEnv::step(int action, Rng& rng) {
    if (action < 0 || action >= model_.n_actions) {
        throw invalid_input("tabular action out of range");
    }
    StepResult out;
    out.reward = model_.reward(state_, action);
    state_ = sample_categorical(model_.kernel.row(model_.row(state_, action)), rng);
    out.obs.resize(1);
    out.obs(0) = state_;
    out.done = false;
    return out;
}

CartPoleEnv::CartPoleEnv(const CartPoleSpec& spec) : spec_(spec), state_(Vec::Zero(4)) {
    if (!(spec.dt > 0.0) || !(spec.cart_mass > 0.0) || !(spec.pole_mass > 0.0) ||
        !(spec.length > 0.0) || !(spec.action_noise >= 0.0 && spec.action_noise <= 1.0)) {
        throw invalid_input("bad cart-pole parameters");
    }
}

Vec CartPoleEnv::reset(Rng& rng) {
    std::uniform_real_distribution<double> init(-0.05, 0.05);
    for (int i = 0; i < 4; ++i) state_(i) = init(rng);
    done_ = false;
    return state_;
}

Environment::StepResult CartPoleEnv::step(int action, Rng& rng) {
    if (action < 0 || action > 1) throw invalid_input("cart-pole action out of range");
    StepResult out;
    if (done_) {
        out.obs = state_;
        out.done = true;
        return out;
    }
    const int applied = maybe_randomize_action(action, 2, spec_.action_noise, rng);
    const double force = applied == 1 ? spec_.force_mag : -spec_.force_mag;
    const double total_mass = spec_.cart_mass + spec_.pole_mass;
    const double pole_mass_length = spec_.pole_mass * spec_.length;
    double x = state_(0), x_dot = state_(1), theta = state_(2), theta_dot = state_(3);
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + pole_mass_length * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (spec_.gravity * sin_t - cos_t * temp) /
        (spec_.length * (4.0 / 3.0 - spec_.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
    x += spec_.dt * x_dot;
    x_dot += spec_.dt * x_acc;
    theta += spec_.dt * theta_dot;
    theta_dot += spec_.dt * theta_acc;
    state_ << x, x_dot, theta, theta_dot;
    done_ = std::abs(x) > 2.4 || std::abs(theta) > 12.0 * M_PI / 180.0;
    out.obs = state_;
    out.reward = 1.0;
    out.done = done_;
    return out;
}

MountainCarEnv::MountainCarEnv(const MountainCarSpec& spec)
    : spec_(spec), state_(Vec::Zero(2)) {
    if (!(spec.min_position < spec.max_position) || !(spec.max_speed > 0.0) ||
        !(spec.action_noise >= 0.0 && spec.action_noise <= 1.0)) {
        throw invalid_input("bad mountain-car parameters");
    }
}

Vec MountainCarEnv::reset(Rng& rng) {
    std::uniform_real_distribution<double> init(-0.6, -0.4);
    state_(0) = init(rng);
    state_(1) = 0.0;
    done_ = false;
    return state_;
}

Environment::StepResult MountainCarEnv::step(int action, Rng& rng) {
    if (action < 0 || action > 2) throw invalid_input("mountain-car action out of range");
    StepResult out;
    if (done_) {
        out.obs = state_;
        out.done = true;
        return out;
    }
    const int applied = maybe_randomize_action(action, 3, spec_.action_noise, rng);
    const double force = static_cast<double>(applied - 1);
    double position = state_(0), velocity = state_(1);
    velocity += force * spec_.power - spec_.gravity * std::cos(3.0 * position);
    velocity = std::clamp(velocity, -spec_.max_speed, spec_.max_speed);
    position += velocity;
    position = std::clamp(position, spec_.min_position, spec_.max_position);
    if (position <= spec_.min_position && velocity < 0.0) velocity = 0.0;
    state_ << position, velocity;
    done_ = position >= spec_.goal_position;
    out.obs = state_;
    out.reward = done_ ? 0.0 : -1.0;
    out.done = done_;
    return out;
}

namespace {

[[noreturn]] void unknown_knob(const std::string& knob, const char* env,
                               const char* valid) {
    std::ostringstream msg;
    msg << "unknown " << env << " knob \"" << knob << "\"; valid knobs: " << valid;
    throw invalid_input(msg.str());
}

} // namespace

ChainSpec perturb(const ChainSpec& spec, const std::string& knob, double value) {
    ChainSpec out = spec;
    if (knob == "slip") {
        out.slip = value;
    } else if (knob == "discount") {
        out.discount = value;
    } else {
        unknown_knob(knob, "chain", "slip, discount");
    }
    return out;
}

CartPoleSpec perturb(const CartPoleSpec& spec, const std::string& knob, double value) {
    CartPoleSpec out = spec;
    if (knob == "force_mag") {
        out.force_mag = value;
    } else if (knob == "gravity") {
        out.gravity = value;
    } else if (knob == "length") {
        out.length = value;
    } else if (knob == "pole_mass") {
        out.pole_mass = value;
    } else if (knob == "cart_mass") {
        out.cart_mass = value;
    } else if (knob == "action_noise") {
        out.action_noise = value;
    } else {
        unknown_knob(knob, "cart-pole",
                     "force_mag, gravity, length, pole_mass, cart_mass, action_noise");
    }
    return out;
}

MountainCarSpec perturb(const MountainCarSpec& spec, const std::string& knob, double value) {
    MountainCarSpec out = spec;
    if (knob == "power") {
        out.power = value;
    } else if (knob == "max_speed") {
        out.max_speed = value;
    } else if (knob == "gravity") {
        out.gravity = value;
    } else if (knob == "action_noise") {
        out.action_noise = value;
    } else {
        unknown_knob(knob, "mountain-car", "power, max_speed, gravity, action_noise");
    }
    return out;
}

int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    int last_positive = 0;
    for (int i = 0; i < probs.size(); ++i) {
        if (probs(i) <= 0.0) continue;
        last_positive = i;
        acc += probs(i);
        if (u < acc) return i;
    }
    return last_positive; // u landed in the round-off sliver at the top
}

std::vector<TransitionRecord> rollout_tabular(const TabularRmdp& m, const Policy& pi,
                                              int horizon, int start_state, Rng& rng) {
    validate_policy(m, pi);
    if (horizon < 1) throw invalid_input("horizon must be >= 1");
    if (start_state < 0 || start_state >= m.n_states) {
        throw invalid_input("start state out of range");
    }
    std::vector<TransitionRecord> out;
    out.reserve(static_cast<std::size_t>(horizon));
    int s = start_state;
    for (int t = 0; t < horizon; ++t) {
        const int a = pi[static_cast<std::size_t>(s)];
        TransitionRecord rec;
        rec.t = t;
        rec.state = s;
        rec.action = a;
        rec.reward = m.reward(s, a);
        rec.set_id = m.set_index[m.row(s, a)];
        s = sample_categorical(m.kernel.row(m.row(s, a)), rng);
        rec.next_state = s;
        out.push_back(rec);
    }
    return out;
}

void write_transition_log(const std::string& path,
                          const std::vector<TransitionRecord>& log) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open transition log \"" + path + "\"");
    file << "t,s,a,r,s_next,set_id\n";
    for (const TransitionRecord& rec : log) {
        file << rec.t << ',' << rec.state << ',' << rec.action << ','
             << format_double(rec.reward) << ',' << rec.next_state << ',' << rec.set_id
             << '\n';
    }
    if (!file.good()) throw invalid_input("failed writing transition log \"" + path + "\"");
}

} // namespace rrl
