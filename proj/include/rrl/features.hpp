#pragma once

#include <variant>
#include <vector>

#include "rrl/uncertainty.hpp"

namespace rrl {

/// One-hot encoding of a finite state space.
struct TabularFeatures {
    int n = 0;
};

/// All monomials of total degree <= degree over the input rescaled
/// coordinatewise from [lows, highs] to [-1, 1].  Inputs outside the box
/// (beyond a 1e-9 relative slack) are an error.
struct PolynomialFeatures {
    int degree = 0;
    Vec lows, highs;
};

/// Cartesian grid of Gaussian bumps psi(x) = exp(-sum_d (x_d - mu_d)^2 / w_d).
/// Centers are uniformly spaced per dimension including both endpoints
/// (a single center sits at the midpoint).  Widths default to
/// (high_d - low_d)^2 / counts_d^3 when the widths vector is empty.
struct RbfGridFeatures {
    Vec lows, highs;
    std::vector<int> counts;
    Vec widths;
};

using StateFeatures = std::variant<TabularFeatures, PolynomialFeatures, RbfGridFeatures>;

/// phi(s, a) = (1(a=0) psi(s), ..., 1(a=A-1) psi(s)); the usual per-action
/// copy of a state feature map.
struct StackedActionFeatures {
    StateFeatures base;
    int n_actions = 0;
};

int feature_dim(const StateFeatures& f);
int feature_dim(const StackedActionFeatures& f);

/// Continuous-input evaluation.  Tabular maps reject Vec input unless it is
/// a single integral coordinate.
Vec feature_eval(const StateFeatures& f, const Vec& x);

/// Integer-state evaluation: one-hot for tabular maps; polynomial/RBF maps
/// treat s as the one-dimensional coordinate (their box must be 1-D).
Vec feature_eval(const StateFeatures& f, int s);

Vec feature_eval(const StackedActionFeatures& f, const Vec& x, int action);
Vec feature_eval(const StackedActionFeatures& f, int s, int action);

/// Feature matrix with one row per state (or per state-action pair) plus its
/// gram.  Construction rejects rank-deficient matrices.
struct FeatureMatrix {
    Mat phi;  // R x L, full column rank
    Mat gram; // phi' phi
};

/// Wraps a raw matrix; throws rank_error unless rank(phi) == cols under a
/// 1e-10 relative pivot threshold.
FeatureMatrix make_feature_matrix(Mat phi);

FeatureMatrix tabulate_state_features(const StateFeatures& f, int n_states);
FeatureMatrix tabulate_state_action_features(const StackedActionFeatures& f, int n_states);

/// Default RBF width (high - low)^2 / count^3 for one dimension.
double rbf_default_width(double low, double high, int count);

/// Diagnostic used to pick RBF spacing: share (in percent) of the plotted
/// axis box [low, high] x [0, 1] covered by the overlap of two adjacent
/// RBFs, i.e. the discretized area under min(psi_i, psi_{i+1}) divided by
/// the box area.  n_points grid points, count >= 2 centers.
double rbf_overlap_percent(double low, double high, int count, double width,
                           int n_points = 10000);

} // namespace rrl
