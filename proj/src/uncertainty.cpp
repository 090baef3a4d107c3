#include "rrl/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rrl/errors.hpp"

namespace rrl {

namespace {

constexpr double kTiny = 1e-15;

void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) {
        throw invalid_input(std::string(what) + " contains non-finite entries");
    }
}

void require_dim(const UncertaintySet& set, const Vec& v) {
    const int n = set_dimension(set);
    if (n != static_cast<int>(v.size())) {
        std::ostringstream msg;
        msg << "dimension mismatch: set lives in R^" << n << ", vector has "
            << v.size() << " entries";
        throw invalid_input(msg.str());
    }
}

Vec project_ball(const Vec& x, double radius) {
    const double n = x.norm();
    if (n <= radius) return x;
    return x * (radius / n);
}

Vec project_sum_zero(const Vec& x) {
    return x.array() - x.mean();
}

Vec project_box(const Vec& x, const Vec& lo, const Vec& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// Dykstra-corrected cyclic projections onto ball /\ {sum = 0} /\ box.
// Plain cyclic projection converges to a point of the intersection but not
// to the nearest one; the correction terms restore that.
Vec project_intersection(Vec x, double radius, const Vec& lo, const Vec& hi) {
    Vec p = Vec::Zero(x.size());
    Vec q = Vec::Zero(x.size());
    Vec s = Vec::Zero(x.size());
    for (int round = 0; round < 4000; ++round) {
        const Vec x_prev = x;
        Vec y = project_ball(x + p, radius);
        p = x + p - y;
        Vec z = project_sum_zero(y + q);
        q = y + q - z;
        x = project_box(z + s, lo, hi);
        s = z + s - x;
        if ((x - x_prev).lpNorm<Eigen::Infinity>() < 1e-13) break;
    }
    return x;
}

SupportResult support_degenerate(const Degenerate& set) {
    return {0.0, Vec::Zero(set.dim)};
}

SupportResult support_finite(const FiniteVertices& set, const Vec& v) {
    if (set.vertices.empty()) {
        throw invalid_input("FiniteVertices set has no vertices");
    }
    std::size_t best = 0;
    double best_val = set.vertices[0].dot(v);
    for (std::size_t i = 1; i < set.vertices.size(); ++i) {
        const double val = set.vertices[i].dot(v);
        if (val < best_val) { // strict: ties keep the earliest vertex
            best_val = val;
            best = i;
        }
    }
    return {best_val, set.vertices[best]};
}

SupportResult support_sphere(const CenteredSphere& set, const Vec& v) {
    const Vec dir = set.sum_zero ? Vec(project_sum_zero(v)) : v;
    const double n = dir.norm();
    if (n < kTiny) {
        return {0.0, Vec::Zero(v.size())};
    }
    Vec minimizer = dir * (-set.radius / n);
    return {-set.radius * n, std::move(minimizer)};
}

SupportResult support_simplex_sphere(const SimplexSphere& set, const Vec& v) {
    const int n = static_cast<int>(v.size());
    const Vec lo = -set.nominal;
    const Vec hi = Vec::Ones(n) - set.nominal;
    // sum(u) = 0 makes the constant component of v irrelevant; dropping it
    // improves conditioning of the line search.
    const Vec vc = project_sum_zero(v);
    const double vnorm = vc.norm();
    if (vnorm < kTiny) {
        return {0.0, Vec::Zero(n)};
    }
    double step = set.radius / vnorm;
    Vec x = Vec::Zero(n); // feasible: 0 is in every constraint set
    double fx = 0.0;
    for (int it = 0; it < 10000; ++it) {
        const Vec cand = project_intersection(x - step * vc, set.radius, lo, hi);
        const double fc = cand.dot(vc);
        if (fc <= fx) {
            const double move = (cand - x).norm();
            x = cand;
            fx = fc;
            if (move < 1e-12) break;
        } else {
            step *= 0.5;
            if (step * vnorm < 1e-14 * set.radius) break;
        }
    }
    return {x.dot(v), x};
}

double weighted_norm(const Vec& z, const Vec& d) {
    return std::sqrt((z.array().square() * d.array()).sum());
}

const std::vector<Vec>& as_vertex_list(const UncertaintySet& set,
                                       std::vector<Vec>& degenerate_storage,
                                       int dim_hint) {
    if (const auto* fin = std::get_if<FiniteVertices>(&set)) {
        return fin->vertices;
    }
    if (std::holds_alternative<Degenerate>(set)) {
        degenerate_storage.assign(1, Vec::Zero(dim_hint));
        return degenerate_storage;
    }
    throw unsupported_variant(
        "set_distance_rho needs finite vertex lists (FiniteVertices or Degenerate)");
}

bool same_vertex(const Vec& a, const Vec& b) {
    return (a - b).lpNorm<Eigen::Infinity>() <= 1e-12;
}

// max_{x in xs} max_{y in ys \ exclude} ||x - y||_d; 0 when the difference
// set is empty.
double difference_term(const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                       const std::vector<Vec>& exclude, const Vec& d) {
    double worst = 0.0;
    for (const Vec& y : ys) {
        const bool in_exclude = std::any_of(
            exclude.begin(), exclude.end(),
            [&](const Vec& e) { return same_vertex(e, y); });
        if (in_exclude) continue;
        for (const Vec& x : xs) {
            worst = std::max(worst, weighted_norm(x - y, d));
        }
    }
    return worst;
}

} // namespace

int set_dimension(const UncertaintySet& set) {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return s.dim;
            } else if constexpr (std::is_same_v<T, FiniteVertices>) {
                return s.vertices.empty() ? 0 : static_cast<int>(s.vertices[0].size());
            } else if constexpr (std::is_same_v<T, CenteredSphere>) {
                return s.dim;
            } else {
                return static_cast<int>(s.nominal.size());
            }
        },
        set);
}

void validate_set(const UncertaintySet& set) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                if (s.dim < 1) throw invalid_input("Degenerate set needs dim >= 1");
            } else if constexpr (std::is_same_v<T, FiniteVertices>) {
                if (s.vertices.empty()) {
                    throw invalid_input("FiniteVertices set has no vertices");
                }
                const auto dim = s.vertices[0].size();
                if (dim < 1) throw invalid_input("FiniteVertices vertices are empty");
                for (const Vec& u : s.vertices) {
                    if (u.size() != dim) {
                        throw invalid_input("FiniteVertices vertices disagree on dimension");
                    }
                    require_finite(u, "vertex");
                    if (std::abs(u.sum()) > 1e-12) {
                        throw invalid_input("vertex entries must sum to zero (1e-12)");
                    }
                }
            } else if constexpr (std::is_same_v<T, CenteredSphere>) {
                if (!(s.radius > 0.0) || !std::isfinite(s.radius)) {
                    throw invalid_input("CenteredSphere needs a positive finite radius");
                }
                if (s.dim < 1) throw invalid_input("CenteredSphere needs dim >= 1");
            } else {
                if (!(s.radius > 0.0) || !std::isfinite(s.radius)) {
                    throw invalid_input("SimplexSphere needs a positive finite radius");
                }
                if (s.nominal.size() < 1) {
                    throw invalid_input("SimplexSphere needs a nominal row");
                }
                require_finite(s.nominal, "nominal");
                if (s.nominal.minCoeff() < -1e-12 ||
                    std::abs(s.nominal.sum() - 1.0) > 1e-12) {
                    throw invalid_input("SimplexSphere nominal must be a probability vector");
                }
            }
        },
        set);
}

SupportResult support_inf(const UncertaintySet& set, const Vec& v) {
    require_finite(v, "support_inf argument");
    require_dim(set, v);
    return std::visit(
        [&](const auto& s) -> SupportResult {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return support_degenerate(s);
            } else if constexpr (std::is_same_v<T, FiniteVertices>) {
                return support_finite(s, v);
            } else if constexpr (std::is_same_v<T, CenteredSphere>) {
                return support_sphere(s, v);
            } else {
                return support_simplex_sphere(s, v);
            }
        },
        set);
}

double support_inf_gram(const Mat& gram, const Vec& w, double radius_param,
                        bool strict_compat) {
    if (gram.rows() != gram.cols()) {
        throw invalid_input("gram matrix must be square");
    }
    if (gram.rows() != w.size()) {
        throw invalid_input("gram/weight dimension mismatch");
    }
    if (!(radius_param >= 0.0) || !std::isfinite(radius_param)) {
        throw invalid_input("radius_param must be finite and >= 0");
    }
    require_finite(w, "weights");
    double quad = w.dot(gram * w);
    if (quad < 0.0) {
        // a true gram matrix is PSD; tolerate round-off only
        const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff() * w.squaredNorm());
        if (quad < -1e-12 * scale) {
            throw invalid_input("gram matrix is not positive semidefinite");
        }
        quad = 0.0;
    }
    const double value = std::sqrt(radius_param * quad);
    return strict_compat ? value : -value;
}

double set_distance_rho(const UncertaintySet& exact, const UncertaintySet& approx,
                        const Vec& d) {
    require_finite(d, "weight vector");
    if (d.size() < 1 || d.minCoeff() <= 0.0) {
        throw invalid_input("set_distance_rho needs strictly positive weights");
    }
    const int dim = static_cast<int>(d.size());
    std::vector<Vec> store_exact, store_approx;
    const std::vector<Vec>& ex = as_vertex_list(exact, store_exact, dim);
    const std::vector<Vec>& ap = as_vertex_list(approx, store_approx, dim);
    for (const Vec& u : ex) {
        if (u.size() != dim) throw invalid_input("exact-set vertex dimension mismatch");
    }
    for (const Vec& u : ap) {
        if (u.size() != dim) throw invalid_input("approx-set vertex dimension mismatch");
    }
    const double term_missing = difference_term(ap, ex, ap, d); // exact \ approx
    const double term_extra = difference_term(ex, ap, ex, d);   // approx \ exact
    return std::max(term_missing, term_extra) / d.minCoeff();
}

ContractionCoefficient contraction_coefficient(const ContractionInputs& in) {
    if (!(in.alpha > 0.0 && in.alpha < 1.0)) {
        throw invalid_input("alpha must lie in (0,1)");
    }
    if (!(in.beta > 0.0 && in.beta < 1.0)) {
        throw invalid_input("beta must lie in (0,1)");
    }
    if (!(in.rho >= 0.0) || !std::isfinite(in.rho)) {
        throw invalid_input("rho must be finite and >= 0");
    }
    if (!(in.lambda >= 0.0 && in.lambda < 1.0)) {
        throw invalid_input("lambda must lie in [0,1)");
    }
    ContractionCoefficient out;
    out.value = (in.beta * (2.0 - in.lambda) + in.rho * in.alpha) / (1.0 - in.beta * in.lambda);
    out.is_contraction = out.value < 1.0;
    return out;
}

} // namespace rrl
