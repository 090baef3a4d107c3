#include "rrl/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rrl/errors.hpp"

namespace rrl {

namespace {

long binomial(int n, int k) {
    long out = 1;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

void check_box(const Vec& lows, const Vec& highs) {
    if (lows.size() < 1 || lows.size() != highs.size()) {
        throw invalid_input("feature box needs matching non-empty lows/highs");
    }
    for (int d = 0; d < lows.size(); ++d) {
        if (!(lows(d) < highs(d))) {
            throw invalid_input("feature box needs lows < highs in every dimension");
        }
    }
}

void check_in_box(const Vec& x, const Vec& lows, const Vec& highs) {
    if (x.size() != lows.size()) {
        throw invalid_input("feature input dimension mismatch");
    }
    for (int d = 0; d < x.size(); ++d) {
        const double slack = 1e-9 * std::max(1.0, highs(d) - lows(d));
        if (!(x(d) >= lows(d) - slack) || !(x(d) <= highs(d) + slack)) {
            std::ostringstream msg;
            msg << "feature input coordinate " << d << " = " << x(d)
                << " is outside [" << lows(d) << ", " << highs(d) << "]";
            throw invalid_input(msg.str());
        }
    }
}

// Exponent tuples with total degree <= degree, lexicographic in dimension
// order; 1-D yields exponents 0, 1, ..., degree.
void enumerate_monomials(int dims, int degree, int d, std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
    if (d == dims) {
        out.push_back(current);
        return;
    }
    for (int e = 0; e <= degree; ++e) {
        current[static_cast<std::size_t>(d)] = e;
        enumerate_monomials(dims, degree - e, d + 1, current, out);
    }
    current[static_cast<std::size_t>(d)] = 0;
}

Vec poly_eval(const PolynomialFeatures& f, const Vec& x) {
    check_box(f.lows, f.highs);
    if (f.degree < 0) throw invalid_input("polynomial degree must be >= 0");
    check_in_box(x, f.lows, f.highs);
    Vec t(x.size());
    for (int d = 0; d < x.size(); ++d) {
        const double u = 2.0 * (x(d) - f.lows(d)) / (f.highs(d) - f.lows(d)) - 1.0;
        t(d) = std::clamp(u, -1.0, 1.0);
    }
    std::vector<std::vector<int>> mono;
    std::vector<int> current(static_cast<std::size_t>(x.size()), 0);
    enumerate_monomials(static_cast<int>(x.size()), f.degree, 0, current, mono);
    Vec out(static_cast<long>(mono.size()));
    for (std::size_t i = 0; i < mono.size(); ++i) {
        double v = 1.0;
        for (int d = 0; d < x.size(); ++d) {
            for (int e = 0; e < mono[i][static_cast<std::size_t>(d)]; ++e) v *= t(d);
        }
        out(static_cast<long>(i)) = v;
    }
    return out;
}

std::vector<double> rbf_centers(double low, double high, int count) {
    std::vector<double> c(static_cast<std::size_t>(count));
    if (count == 1) {
        c[0] = 0.5 * (low + high);
    } else {
        for (int i = 0; i < count; ++i) {
            c[static_cast<std::size_t>(i)] = low + i * (high - low) / (count - 1);
        }
    }
    return c;
}

Vec rbf_widths(const RbfGridFeatures& f) {
    if (f.widths.size() != 0) {
        if (f.widths.size() != f.lows.size() || f.widths.minCoeff() <= 0.0) {
            throw invalid_input("RBF widths must be positive, one per dimension");
        }
        return f.widths;
    }
    Vec w(f.lows.size());
    for (int d = 0; d < f.lows.size(); ++d) {
        w(d) = rbf_default_width(f.lows(d), f.highs(d), f.counts[static_cast<std::size_t>(d)]);
    }
    return w;
}

Vec rbf_eval(const RbfGridFeatures& f, const Vec& x) {
    check_box(f.lows, f.highs);
    if (f.counts.size() != static_cast<std::size_t>(f.lows.size())) {
        throw invalid_input("RBF counts must list one entry per dimension");
    }
    for (int c : f.counts) {
        if (c < 1) throw invalid_input("RBF counts must be >= 1");
    }
    check_in_box(x, f.lows, f.highs);
    const Vec widths = rbf_widths(f);
    const int dims = static_cast<int>(f.lows.size());
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(dims));
    long total = 1;
    for (int d = 0; d < dims; ++d) {
        centers[static_cast<std::size_t>(d)] =
            rbf_centers(f.lows(d), f.highs(d), f.counts[static_cast<std::size_t>(d)]);
        total *= f.counts[static_cast<std::size_t>(d)];
    }
    Vec out(total);
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    for (long j = 0; j < total; ++j) {
        double expo = 0.0;
        for (int d = 0; d < dims; ++d) {
            const double diff =
                x(d) - centers[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
            expo += diff * diff / widths(d);
        }
        out(j) = std::exp(-expo);
        for (int d = dims - 1; d >= 0; --d) { // odometer, last dimension fastest
            if (++idx[static_cast<std::size_t>(d)] < f.counts[static_cast<std::size_t>(d)]) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    return out;
}

} // namespace

int feature_dim(const StateFeatures& f) {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TabularFeatures>) {
                return s.n;
            } else if constexpr (std::is_same_v<T, PolynomialFeatures>) {
                return static_cast<int>(
                    binomial(s.degree + static_cast<int>(s.lows.size()),
                             static_cast<int>(s.lows.size())));
            } else {
                long total = 1;
                for (int c : s.counts) total *= c;
                return static_cast<int>(total);
            }
        },
        f);
}

int feature_dim(const StackedActionFeatures& f) {
    return feature_dim(f.base) * f.n_actions;
}

Vec feature_eval(const StateFeatures& f, const Vec& x) {
    return std::visit(
        [&](const auto& s) -> Vec {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TabularFeatures>) {
                if (x.size() != 1 || x(0) != std::floor(x(0))) {
                    throw invalid_input("tabular features need an integer state");
                }
                return feature_eval(f, static_cast<int>(x(0)));
            } else if constexpr (std::is_same_v<T, PolynomialFeatures>) {
                return poly_eval(s, x);
            } else {
                return rbf_eval(s, x);
            }
        },
        f);
}

Vec feature_eval(const StateFeatures& f, int s) {
    return std::visit(
        [&](const auto& m) -> Vec {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, TabularFeatures>) {
                if (m.n < 1) throw invalid_input("tabular features need n >= 1");
                if (s < 0 || s >= m.n) {
                    std::ostringstream msg;
                    msg << "state " << s << " is outside [0, " << m.n << ")";
                    throw invalid_input(msg.str());
                }
                Vec out = Vec::Zero(m.n);
                out(s) = 1.0;
                return out;
            } else {
                if (m.lows.size() != 1) {
                    throw invalid_input("integer-state evaluation needs a 1-D feature box");
                }
                Vec x(1);
                x(0) = static_cast<double>(s);
                return feature_eval(f, x);
            }
        },
        f);
}

namespace {

Vec stack_blocks(const Vec& psi, int n_actions, int action) {
    if (n_actions < 1) throw invalid_input("stacked features need n_actions >= 1");
    if (action < 0 || action >= n_actions) {
        throw invalid_input("stacked-feature action out of range");
    }
    Vec out = Vec::Zero(psi.size() * n_actions);
    out.segment(static_cast<long>(action) * psi.size(), psi.size()) = psi;
    return out;
}

} // namespace

Vec feature_eval(const StackedActionFeatures& f, const Vec& x, int action) {
    return stack_blocks(feature_eval(f.base, x), f.n_actions, action);
}

Vec feature_eval(const StackedActionFeatures& f, int s, int action) {
    return stack_blocks(feature_eval(f.base, s), f.n_actions, action);
}

FeatureMatrix make_feature_matrix(Mat phi) {
    if (phi.rows() < 1 || phi.cols() < 1) {
        throw invalid_input("feature matrix must be non-empty");
    }
    if (!phi.allFinite()) throw invalid_input("feature matrix must be finite");
    Eigen::ColPivHouseholderQR<Mat> qr(phi);
    qr.setThreshold(1e-10);
    if (qr.rank() < phi.cols()) {
        std::ostringstream msg;
        msg << "feature matrix is rank deficient: rank " << qr.rank() << " < "
            << phi.cols() << " columns";
        throw rank_error(msg.str());
    }
    FeatureMatrix out;
    out.gram = phi.transpose() * phi;
    out.phi = std::move(phi);
    return out;
}

FeatureMatrix tabulate_state_features(const StateFeatures& f, int n_states) {
    if (n_states < 1) throw invalid_input("n_states must be >= 1");
    const int L = feature_dim(f);
    Mat phi(n_states, L);
    for (int s = 0; s < n_states; ++s) {
        phi.row(s) = feature_eval(f, s).transpose();
    }
    return make_feature_matrix(std::move(phi));
}

FeatureMatrix tabulate_state_action_features(const StackedActionFeatures& f, int n_states) {
    if (n_states < 1) throw invalid_input("n_states must be >= 1");
    const int L = feature_dim(f);
    Mat phi(static_cast<long>(n_states) * f.n_actions, L);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < f.n_actions; ++a) {
            phi.row(static_cast<long>(s) * f.n_actions + a) = feature_eval(f, s, a).transpose();
        }
    }
    return make_feature_matrix(std::move(phi));
}

double rbf_default_width(double low, double high, int count) {
    if (!(low < high) || count < 1) {
        throw invalid_input("RBF width needs low < high and count >= 1");
    }
    return (high - low) * (high - low) / (static_cast<double>(count) * count * count);
}

double rbf_overlap_percent(double low, double high, int count, double width,
                           int n_points) {
    if (!(low < high) || count < 2 || !(width > 0.0) || n_points < 2) {
        throw invalid_input("overlap needs low < high, count >= 2, width > 0, n_points >= 2");
    }
    const double c0 = low;
    const double c1 = low + (high - low) / (count - 1);
    double area = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const double x = low + i * (high - low) / (n_points - 1);
        const double p0 = std::exp(-(x - c0) * (x - c0) / width);
        const double p1 = std::exp(-(x - c1) * (x - c1) / width);
        area += std::min(p0, p1);
    }
    return 100.0 * area / n_points;
}

} // namespace rrl
