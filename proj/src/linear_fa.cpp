#include "rrl/linear_fa.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "rrl/errors.hpp"

namespace rrl {

namespace {

constexpr double kEdgeEps = 1e-15;

void check_stochastic(const Mat& p) {
    if (p.rows() != p.cols() || p.rows() < 1) {
        throw invalid_input("transition matrix must be square and non-empty");
    }
    for (long s = 0; s < p.rows(); ++s) {
        if (!p.row(s).allFinite() || p.row(s).minCoeff() < -1e-12 ||
            std::abs(p.row(s).sum() - 1.0) > 1e-9) {
            std::ostringstream msg;
            msg << "row " << s << " of the transition matrix is not a probability vector";
            throw invalid_input(msg.str());
        }
    }
}

// Reachable set from `start` along edges p(i,j) > 0 (transpose = false) or
// p(j,i) > 0 (transpose = true).
std::vector<bool> reachable(const Mat& p, int start, bool transpose) {
    const int n = static_cast<int>(p.rows());
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<int> stack{start};
    seen[static_cast<std::size_t>(start)] = true;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < n; ++j) {
            const double w = transpose ? p(j, i) : p(i, j);
            if (w > kEdgeEps && !seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = true;
                stack.push_back(j);
            }
        }
    }
    return seen;
}

std::vector<Vec> vertex_list_or_throw(const UncertaintySet& set, int dim,
                                      const char* caller) {
    if (const auto* fin = std::get_if<FiniteVertices>(&set)) {
        return fin->vertices;
    }
    if (std::holds_alternative<Degenerate>(set)) {
        return {Vec::Zero(dim)};
    }
    throw unsupported_variant(std::string(caller) +
                              " needs finite vertex lists (FiniteVertices or Degenerate)");
}

void check_positive_weights(const Vec& d, long expected) {
    if (d.size() != expected || !d.allFinite() || d.minCoeff() <= 0.0) {
        throw invalid_input("row weights must be strictly positive with one entry per row");
    }
}

} // namespace

SteadyDistribution steady_state(const Mat& p) {
    check_stochastic(p);
    const int n = static_cast<int>(p.rows());
    const std::vector<bool> fwd = reachable(p, 0, false);
    const std::vector<bool> bwd = reachable(p, 0, true);
    for (int s = 0; s < n; ++s) {
        if (!fwd[static_cast<std::size_t>(s)] || !bwd[static_cast<std::size_t>(s)]) {
            std::ostringstream msg;
            msg << "chain is not ergodic: state " << s
                << " does not communicate with state 0";
            throw non_ergodic(msg.str());
        }
    }
    Vec d = Vec::Constant(n, 1.0 / n);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 0; it < 1000000; ++it) {
        const Vec next = p.transpose() * d;
        residual = (next - d).lpNorm<1>();
        d = 0.5 * d + 0.5 * next; // lazy damping kills periodicity
        d /= d.sum();
        if (residual <= 1e-12) {
            for (int s = 0; s < n; ++s) {
                if (d(s) <= 1e-9) {
                    std::ostringstream msg;
                    msg << "chain is effectively non-ergodic: stationary mass of state "
                        << s << " is " << d(s);
                    throw non_ergodic(msg.str());
                }
            }
            return {d, d.minCoeff()};
        }
    }
    throw no_convergence("stationary-distribution power iteration did not reach 1e-12",
                         residual);
}

double weighted_norm(const Vec& v, const Vec& d) {
    if (v.size() != d.size()) throw invalid_input("weighted_norm dimension mismatch");
    return std::sqrt((v.array().square() * d.array()).sum());
}

Vec project(const FeatureMatrix& phi, const Vec& d, const Vec& v) {
    check_positive_weights(d, phi.phi.rows());
    if (v.size() != phi.phi.rows()) throw invalid_input("project: value length mismatch");
    const Mat weighted = d.asDiagonal() * phi.phi;
    const Mat gram = phi.phi.transpose() * weighted;
    const Vec rhs = weighted.transpose() * v;
    Eigen::LDLT<Mat> ldlt(gram);
    const Vec w = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !w.allFinite() ||
        (gram * w - rhs).lpNorm<Eigen::Infinity>() >
            1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
        throw rank_error("weighted feature gram is singular");
    }
    return phi.phi * w;
}

namespace {

void check_pool_binding(const TabularRmdp& m, const std::vector<UncertaintySet>& pool,
                        const std::vector<int>& index) {
    if (static_cast<long>(index.size()) !=
        static_cast<long>(m.n_states) * m.n_actions) {
        throw invalid_input("approximation sets need one binding per (s,a)");
    }
    for (int idx : index) {
        if (idx < 0 || idx >= static_cast<int>(pool.size())) {
            throw invalid_input("approximation-set binding out of range");
        }
    }
    for (const UncertaintySet& set : pool) {
        validate_set(set);
        if (set_dimension(set) != m.n_states) {
            throw invalid_input("approximation set dimension must equal n_states");
        }
    }
}

Vec sigma_vector(const TabularRmdp& m, const Policy& pi,
                 const std::vector<UncertaintySet>& pool, const std::vector<int>& index,
                 const Vec& v) {
    Vec out(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        const int row = m.row(s, pi[static_cast<std::size_t>(s)]);
        out(s) = support_inf(pool[static_cast<std::size_t>(index[row])], v).value;
    }
    return out;
}

} // namespace

Vec approx_robust_td_apply(const TabularRmdp& m, const Policy& pi,
                           const std::vector<UncertaintySet>& approx_pool,
                           const std::vector<int>& approx_index, const Vec& v,
                           double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw invalid_input("lambda must lie in [0,1)");
    if (v.size() != m.n_states) throw invalid_input("value vector has the wrong length");
    check_pool_binding(m, approx_pool, approx_index);
    const Mat p = policy_kernel(m, pi);
    const Vec r = policy_reward(m, pi);
    const double a = m.discount;
    const Vec sig = sigma_vector(m, pi, approx_pool, approx_index, v);
    const Mat lhs = Mat::Identity(m.n_states, m.n_states) - (a * lambda) * p;
    Eigen::PartialPivLU<Mat> lu(lhs);
    const Vec x1 = lu.solve(r + a * sig);
    const Vec x2 = lu.solve(v);
    Vec out = x1 + (a * (1.0 - lambda)) * (p * x2);
    if (!out.allFinite()) throw solver_failure("lambda-averaged backup solve failed");
    return out;
}

ProjectedFixedPoint exact_projected_fixed_point(const ProjectedProblem& problem,
                                                const FixedPointOptions& opts) {
    const long rows = problem.p.rows();
    check_stochastic(problem.p);
    if (problem.r.size() != rows || problem.phi.rows() != rows) {
        throw invalid_input("projected problem rows disagree");
    }
    check_positive_weights(problem.d, rows);
    if (!(problem.discount > 0.0 && problem.discount < 1.0)) {
        throw invalid_input("discount must lie in (0,1)");
    }
    if (!(problem.lambda >= 0.0 && problem.lambda < 1.0)) {
        throw invalid_input("lambda must lie in [0,1)");
    }
    if (!problem.sigma) throw invalid_input("projected problem needs a sigma callback");
    {
        Eigen::ColPivHouseholderQR<Mat> qr(problem.phi);
        qr.setThreshold(1e-10);
        if (qr.rank() < problem.phi.cols()) {
            throw rank_error("projected problem features are rank deficient");
        }
    }
    if (opts.contraction_check && !opts.force) {
        const ContractionCoefficient c = contraction_coefficient(*opts.contraction_check);
        if (!c.is_contraction) {
            std::ostringstream msg;
            msg << "contraction coefficient " << c.value
                << " >= 1; pass force to iterate anyway";
            throw invalid_input(msg.str());
        }
    }

    const double a = problem.discount;
    const double l = problem.lambda;
    const long L = problem.phi.cols();
    const Mat lhs = Mat::Identity(rows, rows) - (a * l) * problem.p;
    Eigen::PartialPivLU<Mat> lu(lhs);
    const Mat weighted_phi_t = problem.phi.transpose() * problem.d.asDiagonal(); // L x R
    const Mat x = lu.solve(problem.phi);                                         // (I-alP)^-1 phi
    const Mat big_a = weighted_phi_t * (a * (problem.p * x) - x);
    const Mat big_b = weighted_phi_t * problem.phi;
    const Vec small_b = weighted_phi_t * lu.solve(problem.r);
    Eigen::LDLT<Mat> bsolve(big_b);
    if (bsolve.info() != Eigen::Success) {
        throw solver_failure("weighted gram factorization failed");
    }

    double step = 1.0;
    Vec w = Vec::Zero(L);
    ProjectedFixedPoint out;
    for (int it = 1; it <= opts.max_iters; ++it) {
        const Vec value = problem.phi * w;
        Vec sig = problem.sigma(value);
        if (sig.size() != rows) {
            throw invalid_input("sigma callback returned the wrong number of rows");
        }
        const Vec c_term = a * (weighted_phi_t * lu.solve(sig));
        const Vec delta = bsolve.solve(big_a * w + c_term + small_b);
        const Vec w_next = w + step * delta;
        out.iterations = it;
        if (!w_next.allFinite() || w_next.norm() > 1e12) {
            step *= 0.5;
            w.setZero();
            if (step < 1.0 / 1024.0) {
                throw no_convergence(
                    "projected fixed-point iteration diverged; the operator is likely "
                    "not a contraction for these sets",
                    w_next.allFinite() ? w_next.norm() : std::numeric_limits<double>::infinity());
            }
            continue;
        }
        out.residual = weighted_norm(problem.phi * (w_next - w), problem.d);
        w = w_next;
        if (out.residual <= opts.tol) {
            out.w = w;
            return out;
        }
    }
    throw no_convergence("projected fixed-point iteration did not converge", out.residual);
}

ProjectedFixedPoint exact_projected_fixed_point(
    const TabularRmdp& m, const Policy& pi, const std::vector<UncertaintySet>& approx_pool,
    const std::vector<int>& approx_index, const FeatureMatrix& phi, const Vec& d,
    double lambda, const FixedPointOptions& opts) {
    check_pool_binding(m, approx_pool, approx_index);
    ProjectedProblem problem;
    problem.p = policy_kernel(m, pi);
    problem.r = policy_reward(m, pi);
    problem.phi = phi.phi;
    problem.d = d;
    problem.discount = m.discount;
    problem.lambda = lambda;
    problem.sigma = [&](const Vec& value) {
        return sigma_vector(m, pi, approx_pool, approx_index, value);
    };
    return exact_projected_fixed_point(problem, opts);
}

ExplorationCheck verify_exploration_assumption(const TabularRmdp& m, const Policy& pi,
                                               const Policy& pi_explore) {
    validate_policy(m, pi);
    validate_policy(m, pi_explore);
    const double a = m.discount;
    ExplorationCheck out;
    out.beta_min = 0.0;
    for (int s = 0; s < m.n_states; ++s) {
        const auto nominal = m.kernel.row(m.row(s, pi[static_cast<std::size_t>(s)]));
        const auto explore = m.kernel.row(m.row(s, pi_explore[static_cast<std::size_t>(s)]));
        const std::vector<Vec> vertices = vertex_list_or_throw(
            m.set_at(s, pi[static_cast<std::size_t>(s)]), m.n_states,
            "verify_exploration_assumption");
        for (const Vec& u : vertices) {
            for (int next = 0; next < m.n_states; ++next) {
                const double num = a * (nominal(next) + u(next));
                if (num <= kEdgeEps) continue;
                const double den = explore(next);
                if (den <= kEdgeEps) {
                    out.beta_min = std::numeric_limits<double>::infinity();
                    out.feasible = false;
                    return out;
                }
                out.beta_min = std::max(out.beta_min, num / den);
            }
        }
    }
    out.feasible = out.beta_min < 1.0;
    return out;
}

} // namespace rrl
