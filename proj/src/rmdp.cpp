#include "rrl/rmdp.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rrl/errors.hpp"

namespace rrl {

namespace {

using nlohmann::json;

void check_dims(const TabularRmdp& m) {
    if (m.n_states < 1 || m.n_actions < 1) {
        throw invalid_input("model needs n_states >= 1 and n_actions >= 1");
    }
    if (m.reward.rows() != m.n_states || m.reward.cols() != m.n_actions) {
        throw invalid_input("reward must be n_states x n_actions");
    }
    const long rows = static_cast<long>(m.n_states) * m.n_actions;
    if (m.kernel.rows() != rows || m.kernel.cols() != m.n_states) {
        throw invalid_input("kernel must be (n_states*n_actions) x n_states");
    }
    if (static_cast<long>(m.set_index.size()) != rows) {
        throw invalid_input("every (s,a) needs exactly one uncertainty-set binding");
    }
}

json set_to_json(const UncertaintySet& set) {
    json j;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                j["kind"] = "degenerate";
            } else if constexpr (std::is_same_v<T, FiniteVertices>) {
                j["kind"] = "finite";
                json verts = json::array();
                for (const Vec& u : s.vertices) {
                    verts.push_back(std::vector<double>(u.data(), u.data() + u.size()));
                }
                j["vertices"] = std::move(verts);
            } else if constexpr (std::is_same_v<T, CenteredSphere>) {
                j["kind"] = "centered_sphere";
                j["radius"] = s.radius;
                j["sum_zero"] = s.sum_zero;
            } else {
                j["kind"] = "simplex_sphere";
                j["radius"] = s.radius;
                j["nominal"] =
                    std::vector<double>(s.nominal.data(), s.nominal.data() + s.nominal.size());
            }
        },
        set);
    return j;
}

UncertaintySet set_from_json(const json& j, int dim) {
    if (!j.contains("kind")) throw invalid_input("set descriptor is missing \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "degenerate") {
        return Degenerate{dim};
    }
    if (kind == "finite") {
        if (!j.contains("vertices")) throw invalid_input("finite set needs \"vertices\"");
        FiniteVertices fin;
        for (const auto& row : j.at("vertices")) {
            auto vals = row.get<std::vector<double>>();
            fin.vertices.push_back(Eigen::Map<const Vec>(vals.data(), vals.size()));
        }
        return fin;
    }
    if (kind == "centered_sphere") {
        if (!j.contains("radius")) throw invalid_input("centered_sphere needs \"radius\"");
        CenteredSphere ball;
        ball.radius = j.at("radius").get<double>();
        ball.dim = dim;
        ball.sum_zero = j.value("sum_zero", true);
        return ball;
    }
    if (kind == "simplex_sphere") {
        if (!j.contains("radius") || !j.contains("nominal")) {
            throw invalid_input("simplex_sphere needs \"radius\" and \"nominal\"");
        }
        SimplexSphere ss;
        ss.radius = j.at("radius").get<double>();
        auto vals = j.at("nominal").get<std::vector<double>>();
        ss.nominal = Eigen::Map<const Vec>(vals.data(), vals.size());
        return ss;
    }
    throw invalid_input("unknown uncertainty-set kind \"" + kind + "\"");
}

double sigma_at(const TabularRmdp& m, int s, int a, const Vec& v) {
    return support_inf(m.set_at(s, a), v).value;
}

} // namespace

void validate_rmdp(const TabularRmdp& m) {
    check_dims(m);
    if (!(m.discount > 0.0 && m.discount < 1.0)) {
        throw invalid_input("discount must lie in (0,1)");
    }
    if (!m.reward.allFinite()) throw invalid_input("rewards must be finite");
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
            const auto row = m.kernel.row(m.row(s, a));
            if (!row.allFinite() || row.minCoeff() < -1e-12 ||
                std::abs(row.sum() - 1.0) > 1e-12) {
                std::ostringstream msg;
                msg << "kernel row for (s=" << s << ", a=" << a
                    << ") is not a probability vector within 1e-12";
                throw invalid_input(msg.str());
            }
            const int idx = m.set_index[m.row(s, a)];
            if (idx < 0 || idx >= static_cast<int>(m.set_pool.size())) {
                std::ostringstream msg;
                msg << "(s=" << s << ", a=" << a << ") binds a missing uncertainty set";
                throw invalid_input(msg.str());
            }
        }
    }
    for (const UncertaintySet& set : m.set_pool) {
        validate_set(set);
        if (set_dimension(set) != m.n_states) {
            throw invalid_input("uncertainty set dimension must equal n_states");
        }
    }
}

void bind_shared_set(TabularRmdp& m, UncertaintySet set) {
    m.set_pool.assign(1, std::move(set));
    m.set_index.assign(static_cast<std::size_t>(m.n_states) * m.n_actions, 0);
}

std::string rmdp_to_json(const TabularRmdp& m) {
    json j;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["discount"] = m.discount;
    std::vector<double> reward;
    reward.reserve(static_cast<std::size_t>(m.n_states) * m.n_actions);
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) reward.push_back(m.reward(s, a));
    }
    j["reward"] = std::move(reward);
    std::vector<double> kernel;
    kernel.reserve(static_cast<std::size_t>(m.kernel.rows()) * m.kernel.cols());
    for (long r = 0; r < m.kernel.rows(); ++r) {
        for (long c = 0; c < m.kernel.cols(); ++c) kernel.push_back(m.kernel(r, c));
    }
    j["kernel"] = std::move(kernel);
    json sets = json::array();
    for (int idx : m.set_index) {
        sets.push_back(set_to_json(m.set_pool[static_cast<std::size_t>(idx)]));
    }
    j["sets"] = std::move(sets);
    return j.dump();
}

TabularRmdp rmdp_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw invalid_input(std::string("malformed model JSON: ") + e.what());
    }
    TabularRmdp m;
    try {
        m.n_states = j.at("n_states").get<int>();
        m.n_actions = j.at("n_actions").get<int>();
        m.discount = j.at("discount").get<double>();
        if (m.n_states < 1 || m.n_actions < 1) {
            throw invalid_input("model needs n_states >= 1 and n_actions >= 1");
        }
        const auto reward = j.at("reward").get<std::vector<double>>();
        if (reward.size() != static_cast<std::size_t>(m.n_states) * m.n_actions) {
            throw invalid_input("reward has the wrong number of entries");
        }
        m.reward.resize(m.n_states, m.n_actions);
        for (int s = 0; s < m.n_states; ++s) {
            for (int a = 0; a < m.n_actions; ++a) {
                m.reward(s, a) = reward[static_cast<std::size_t>(s) * m.n_actions + a];
            }
        }
        const auto kernel = j.at("kernel").get<std::vector<double>>();
        const long rows = static_cast<long>(m.n_states) * m.n_actions;
        if (kernel.size() != static_cast<std::size_t>(rows) * m.n_states) {
            throw invalid_input("kernel has the wrong number of entries");
        }
        m.kernel.resize(rows, m.n_states);
        for (long r = 0; r < rows; ++r) {
            for (int c = 0; c < m.n_states; ++c) {
                m.kernel(r, c) = kernel[static_cast<std::size_t>(r) * m.n_states + c];
            }
        }
        const auto& sets = j.at("sets");
        if (static_cast<long>(sets.size()) != rows) {
            throw invalid_input("sets must hold one descriptor per (s,a)");
        }
        std::map<std::string, int> pool_ids; // dedupe identical descriptors
        for (const auto& desc : sets) {
            const std::string key = desc.dump();
            auto [it, inserted] = pool_ids.emplace(key, static_cast<int>(m.set_pool.size()));
            if (inserted) {
                m.set_pool.push_back(set_from_json(desc, m.n_states));
            }
            m.set_index.push_back(it->second);
        }
    } catch (const json::exception& e) {
        throw invalid_input(std::string("malformed model JSON: ") + e.what());
    }
    validate_rmdp(m);
    return m;
}

void validate_policy(const TabularRmdp& m, const Policy& pi) {
    if (static_cast<int>(pi.size()) != m.n_states) {
        throw invalid_input("policy must pick one action per state");
    }
    for (int a : pi) {
        if (a < 0 || a >= m.n_actions) throw invalid_input("policy action out of range");
    }
}

Mat policy_kernel(const TabularRmdp& m, const Policy& pi) {
    validate_policy(m, pi);
    Mat p(m.n_states, m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        p.row(s) = m.kernel.row(m.row(s, pi[static_cast<std::size_t>(s)]));
    }
    return p;
}

Vec policy_reward(const TabularRmdp& m, const Policy& pi) {
    validate_policy(m, pi);
    Vec r(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        r(s) = m.reward(s, pi[static_cast<std::size_t>(s)]);
    }
    return r;
}

Vec nonrobust_value(const TabularRmdp& m, const Policy& pi) {
    const Mat p = policy_kernel(m, pi);
    const Vec r = policy_reward(m, pi);
    const Mat lhs = Mat::Identity(m.n_states, m.n_states) - m.discount * p;
    const Vec v = lhs.partialPivLu().solve(r);
    const double scale = std::max(1.0, r.lpNorm<Eigen::Infinity>());
    if (!v.allFinite() || (lhs * v - r).lpNorm<Eigen::Infinity>() > 1e-8 * scale) {
        throw solver_failure("linear solve for the policy value failed");
    }
    return v;
}

Vec robust_bellman_policy(const TabularRmdp& m, const Policy& pi, const Vec& v) {
    validate_policy(m, pi);
    if (v.size() != m.n_states) throw invalid_input("value vector has the wrong length");
    Vec out(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        const int a = pi[static_cast<std::size_t>(s)];
        const double exp_next = m.kernel.row(m.row(s, a)).dot(v);
        out(s) = m.reward(s, a) + m.discount * (exp_next + sigma_at(m, s, a, v));
    }
    return out;
}

OptimalBackup robust_bellman_optimal(const TabularRmdp& m, const Vec& v) {
    if (v.size() != m.n_states) throw invalid_input("value vector has the wrong length");
    OptimalBackup out;
    out.value.resize(m.n_states);
    out.greedy.assign(static_cast<std::size_t>(m.n_states), 0);
    for (int s = 0; s < m.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < m.n_actions; ++a) {
            const double exp_next = m.kernel.row(m.row(s, a)).dot(v);
            const double q = m.reward(s, a) + m.discount * (exp_next + sigma_at(m, s, a, v));
            if (q > best) { // strict: ties keep the lowest action index
                best = q;
                best_a = a;
            }
        }
        out.value(s) = best;
        out.greedy[static_cast<std::size_t>(s)] = best_a;
    }
    return out;
}

namespace {

template <typename Backup>
FixedPointResult iterate_to_fixed_point(const TabularRmdp& m, double tol, int max_iters,
                                        Backup&& backup) {
    if (!(tol > 0.0)) throw invalid_input("tolerance must be positive");
    FixedPointResult out;
    out.value = Vec::Zero(m.n_states);
    for (int it = 1; it <= max_iters; ++it) {
        Vec next = backup(out.value);
        out.residual = (next - out.value).lpNorm<Eigen::Infinity>();
        out.value = std::move(next);
        out.iterations = it;
        if (out.residual <= tol) return out;
    }
    std::ostringstream msg;
    msg << "fixed-point iteration did not reach tol " << tol << " in " << max_iters
        << " sweeps (last residual " << out.residual << ")";
    throw no_convergence(msg.str(), out.residual);
}

} // namespace

FixedPointResult robust_value_iteration(const TabularRmdp& m, double tol, int max_iters) {
    FixedPointResult out = iterate_to_fixed_point(
        m, tol, max_iters, [&](const Vec& v) { return robust_bellman_optimal(m, v).value; });
    out.greedy = robust_bellman_optimal(m, out.value).greedy;
    return out;
}

FixedPointResult robust_policy_evaluation_exact(const TabularRmdp& m, const Policy& pi,
                                                double tol, int max_iters) {
    validate_policy(m, pi);
    return iterate_to_fixed_point(
        m, tol, max_iters, [&](const Vec& v) { return robust_bellman_policy(m, pi, v); });
}

Vec robust_td_lambda_apply(const TabularRmdp& m, const Policy& pi, const Vec& v,
                           double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw invalid_input("lambda must lie in [0,1)");
    }
    if (lambda == 0.0) return robust_bellman_policy(m, pi, v);
    const double r_max = m.reward.cwiseAbs().maxCoeff();
    const double tail_scale =
        2.0 * v.lpNorm<Eigen::Infinity>() + r_max / (1.0 - m.discount);
    Vec term = v;
    Vec acc = Vec::Zero(m.n_states);
    double weight = 1.0 - lambda; // (1 - lambda) lambda^m
    double tail = lambda;         // lambda^{m+1}
    for (long iter_guard = 0; iter_guard < 10000000; ++iter_guard) {
        term = robust_bellman_policy(m, pi, term); // T_pi^{m+1}(V)
        acc += weight * term;
        if (tail * tail_scale < 1e-12) return acc;
        weight *= lambda;
        tail *= lambda;
    }
    throw no_convergence("lambda-averaged backup series failed to truncate", tail);
}

} // namespace rrl
