#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rrl/errors.hpp"
#include "rrl/features.hpp"

using namespace rrl;

namespace {

Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<long>(xs.size()));
    long i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Vec box_point(std::mt19937_64& rng, const Vec& lows, const Vec& highs) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x(lows.size());
    for (long d = 0; d < x.size(); ++d) x(d) = lows(d) + u(rng) * (highs(d) - lows(d));
    return x;
}

} // namespace

TEST_CASE("tabular features are one-hot") {
    const StateFeatures f = TabularFeatures{3};
    CHECK(feature_dim(f) == 3);
    for (int s = 0; s < 3; ++s) {
        const Vec phi = feature_eval(f, s);
        REQUIRE(phi.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK(phi(i) == (i == s ? 1.0 : 0.0));
    }
    CHECK(feature_eval(f, 1)(1) == 1.0);
}

TEST_CASE("tabular features reject out-of-range and fractional input") {
    const StateFeatures f = TabularFeatures{3};
    CHECK_THROWS_AS(feature_eval(f, -1), invalid_input);
    CHECK_THROWS_WITH_AS(feature_eval(f, 3), doctest::Contains("outside"), invalid_input);
    CHECK_THROWS_AS(feature_eval(f, make_vec({1.5})), invalid_input);
    CHECK_THROWS_AS(feature_eval(f, make_vec({0.0, 1.0})), invalid_input);
    CHECK(feature_eval(f, make_vec({2.0}))(2) == 1.0);
    CHECK_THROWS_AS(feature_eval(StateFeatures{TabularFeatures{0}}, 0), invalid_input);
}

TEST_CASE("1-D polynomial features list monomials by increasing exponent") {
    const StateFeatures f =
        PolynomialFeatures{2, make_vec({-1.0}), make_vec({1.0})};
    CHECK(feature_dim(f) == 3);
    // Box is already [-1, 1], so the rescaled coordinate equals the input.
    const Vec phi = feature_eval(f, make_vec({0.5}));
    REQUIRE(phi.size() == 3);
    CHECK(phi(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(phi(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(phi(2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("polynomial features rescale the box to [-1, 1]") {
    const StateFeatures f =
        PolynomialFeatures{2, make_vec({2.0}), make_vec({6.0})};
    const Vec mid = feature_eval(f, make_vec({4.0}));
    CHECK(mid(0) == 1.0);
    CHECK(mid(1) == 0.0);
    CHECK(mid(2) == 0.0);
    const Vec hi = feature_eval(f, make_vec({6.0}));
    CHECK(hi(1) == 1.0);
    CHECK(hi(2) == 1.0);
    const Vec lo = feature_eval(f, make_vec({2.0}));
    CHECK(lo(1) == -1.0);
    CHECK(lo(2) == 1.0);
}

TEST_CASE("2-D polynomial features enumerate exponents lexicographically") {
    const StateFeatures f =
        PolynomialFeatures{2, make_vec({0.0, 0.0}), make_vec({2.0, 4.0})};
    // dim = C(degree + dims, dims) = C(4, 2)
    CHECK(feature_dim(f) == 6);
    // x = (1.5, 3) rescales to t = (0.5, 0.5); exponent tuples in order
    // (0,0), (0,1), (0,2), (1,0), (1,1), (2,0).
    const Vec phi = feature_eval(f, make_vec({1.5, 3.0}));
    REQUIRE(phi.size() == 6);
    const double expected[] = {1.0, 0.5, 0.25, 0.5, 0.25, 0.25};
    for (int i = 0; i < 6; ++i) CHECK(phi(i) == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("degree-0 polynomial is the constant feature") {
    const StateFeatures f =
        PolynomialFeatures{0, make_vec({-3.0}), make_vec({3.0})};
    CHECK(feature_dim(f) == 1);
    CHECK(feature_eval(f, make_vec({1.7}))(0) == 1.0);
}

TEST_CASE("polynomial features reject inputs outside the box beyond slack") {
    const StateFeatures f =
        PolynomialFeatures{2, make_vec({2.0}), make_vec({6.0})};
    CHECK_THROWS_WITH_AS(feature_eval(f, make_vec({6.0 + 1e-7})),
                         doctest::Contains("outside"), invalid_input);
    CHECK_THROWS_AS(feature_eval(f, make_vec({2.0 - 1e-7})), invalid_input);
    // Within the relative slack the input is accepted and clamped to the edge.
    const Vec phi = feature_eval(f, make_vec({6.0 + 1e-10}));
    CHECK(phi(1) == 1.0);
    CHECK(phi(2) == 1.0);
}

TEST_CASE("polynomial feature magnitudes never exceed one inside the box") {
    std::mt19937_64 rng(7);
    const Vec lows = make_vec({-2.0, 0.0, 10.0});
    const Vec highs = make_vec({5.0, 1.0, 11.0});
    const StateFeatures f = PolynomialFeatures{3, lows, highs};
    const int L = feature_dim(f);
    CHECK(L == 20);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec phi = feature_eval(f, box_point(rng, lows, highs));
        REQUIRE(phi.size() == L);
        CHECK(phi(0) == 1.0);
        CHECK(phi.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-12);
    }
}

TEST_CASE("polynomial features reject malformed descriptors") {
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{PolynomialFeatures{-1, make_vec({0.0}), make_vec({1.0})}},
                     make_vec({0.5})),
        invalid_input);
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{PolynomialFeatures{2, make_vec({1.0}), make_vec({1.0})}},
                     make_vec({1.0})),
        invalid_input);
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{PolynomialFeatures{2, make_vec({0.0, 0.0}), make_vec({1.0})}},
                     make_vec({0.5})),
        invalid_input);
}

TEST_CASE("RBF feature equals one exactly at its own center") {
    const StateFeatures f =
        RbfGridFeatures{make_vec({-1.0}), make_vec({1.0}), {3}, Vec()};
    CHECK(feature_dim(f) == 3);
    // Centers sit at -1, 0, 1; default width (2)^2 / 3^3 = 4/27.
    const Vec phi = feature_eval(f, make_vec({0.0}));
    REQUIRE(phi.size() == 3);
    CHECK(phi(1) == 1.0);
    const double tail = std::exp(-1.0 / (4.0 / 27.0));
    CHECK(phi(0) == doctest::Approx(tail).epsilon(1e-14));
    CHECK(phi(2) == doctest::Approx(tail).epsilon(1e-14));
}

TEST_CASE("single RBF center sits at the box midpoint") {
    const StateFeatures f =
        RbfGridFeatures{make_vec({2.0}), make_vec({6.0}), {1}, Vec()};
    CHECK(feature_dim(f) == 1);
    CHECK(feature_eval(f, make_vec({4.0}))(0) == 1.0);
    CHECK(feature_eval(f, make_vec({5.0}))(0) < 1.0);
}

TEST_CASE("default RBF width follows (high-low)^2 / count^3") {
    CHECK(rbf_default_width(-0.5, 0.5, 2) == 0.125);
    CHECK(rbf_default_width(-1.0, 1.0, 3) == doctest::Approx(4.0 / 27.0).epsilon(1e-15));
    CHECK(rbf_default_width(0.0, 10.0, 1) == 100.0);
    CHECK_THROWS_AS(rbf_default_width(1.0, 1.0, 2), invalid_input);
    CHECK_THROWS_AS(rbf_default_width(0.0, 1.0, 0), invalid_input);
}

TEST_CASE("two default-width RBFs on a unit box overlap by about 2.88 percent") {
    const double pct = rbf_overlap_percent(-0.5, 0.5, 2, rbf_default_width(-0.5, 0.5, 2));
    CHECK(std::abs(pct - 2.88) <= 0.05);
    CHECK_THROWS_AS(rbf_overlap_percent(-0.5, 0.5, 1, 0.125), invalid_input);
    CHECK_THROWS_AS(rbf_overlap_percent(-0.5, 0.5, 2, 0.0), invalid_input);
    CHECK_THROWS_AS(rbf_overlap_percent(0.5, -0.5, 2, 0.125), invalid_input);
}

TEST_CASE("RBF grids enumerate centers with the last dimension fastest") {
    const StateFeatures f = RbfGridFeatures{make_vec({0.0, 0.0}),
                                            make_vec({1.0, 10.0}),
                                            {2, 3},
                                            make_vec({0.01, 0.1})};
    CHECK(feature_dim(f) == 6);
    // x at the grid corner (0, 10) coincides with center (0, 2) -> flat index 2.
    const Vec phi = feature_eval(f, make_vec({0.0, 10.0}));
    REQUIRE(phi.size() == 6);
    CHECK(phi(2) == 1.0);
    for (int i = 0; i < 6; ++i) {
        if (i != 2) CHECK(phi(i) < 1e-6);
    }
    // And the opposite corner (1, 0) is center (1, 0) -> flat index 3.
    CHECK(feature_eval(f, make_vec({1.0, 0.0}))(3) == 1.0);
}

TEST_CASE("RBF values stay in (0, 1] inside the box") {
    std::mt19937_64 rng(11);
    const Vec lows = make_vec({-2.0, 1.0});
    const Vec highs = make_vec({2.0, 3.0});
    const StateFeatures f = RbfGridFeatures{lows, highs, {3, 2}, Vec()};
    for (int trial = 0; trial < 200; ++trial) {
        const Vec phi = feature_eval(f, box_point(rng, lows, highs));
        CHECK(phi.minCoeff() > 0.0);
        CHECK(phi.maxCoeff() <= 1.0);
    }
}

TEST_CASE("RBF descriptors are validated") {
    const Vec lo = make_vec({0.0});
    const Vec hi = make_vec({1.0});
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{RbfGridFeatures{lo, hi, {0}, Vec()}}, make_vec({0.5})),
        invalid_input);
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{RbfGridFeatures{lo, hi, {2, 2}, Vec()}}, make_vec({0.5})),
        invalid_input);
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{RbfGridFeatures{lo, hi, {2}, make_vec({-0.1})}},
                     make_vec({0.5})),
        invalid_input);
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{RbfGridFeatures{lo, hi, {2}, make_vec({0.1, 0.1})}},
                     make_vec({0.5})),
        invalid_input);
    CHECK_THROWS_AS(
        feature_eval(StateFeatures{RbfGridFeatures{lo, hi, {2}, Vec()}}, make_vec({1.5})),
        invalid_input);
}

TEST_CASE("stacked action features place the state block by action") {
    const StackedActionFeatures f{TabularFeatures{3}, 2};
    CHECK(feature_dim(f) == 6);
    const Vec phi = feature_eval(f, 2, 1);
    REQUIRE(phi.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(phi(i) == (i == 5 ? 1.0 : 0.0));
    const Vec phi0 = feature_eval(f, 0, 0);
    CHECK(phi0(0) == 1.0);
    CHECK(phi0.tail(5).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("stacked features compose with continuous bases") {
    const StackedActionFeatures f{
        PolynomialFeatures{1, make_vec({0.0}), make_vec({1.0})}, 3};
    CHECK(feature_dim(f) == 6);
    const Vec phi = feature_eval(f, make_vec({0.75}), 1);
    CHECK(phi.head(2).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(phi(2) == 1.0);
    CHECK(phi(3) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(phi.tail(2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("stacked features validate the action index") {
    const StackedActionFeatures f{TabularFeatures{2}, 2};
    CHECK_THROWS_AS(feature_eval(f, 0, -1), invalid_input);
    CHECK_THROWS_AS(feature_eval(f, 0, 2), invalid_input);
    CHECK_THROWS_AS(feature_eval(StackedActionFeatures{TabularFeatures{2}, 0}, 0, 0),
                    invalid_input);
}

TEST_CASE("feature matrix construction rejects rank-deficient inputs") {
    Mat dup(4, 3);
    dup.col(0) = Vec::LinSpaced(4, 0.0, 3.0);
    dup.col(1) = Vec::Ones(4);
    dup.col(2) = 2.0 * dup.col(0); // linearly dependent
    CHECK_THROWS_WITH_AS(make_feature_matrix(dup), doctest::Contains("rank deficient"),
                         rank_error);
    Mat bad(2, 2);
    bad << 1.0, 0.0, 0.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_feature_matrix(bad), invalid_input);
    CHECK_THROWS_AS(make_feature_matrix(Mat()), invalid_input);
    // Wide matrices cannot have full column rank.
    CHECK_THROWS_AS(make_feature_matrix(Mat::Ones(1, 2)), rank_error);
}

TEST_CASE("feature matrix stores the gram of its rows") {
    Mat phi(3, 2);
    phi << 1.0, 2.0, 0.0, 1.0, 1.0, -1.0;
    const FeatureMatrix fm = make_feature_matrix(phi);
    CHECK(fm.phi == phi);
    CHECK((fm.gram - phi.transpose() * phi).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("tabulated one-hot features give identity matrices") {
    const FeatureMatrix fm = tabulate_state_features(TabularFeatures{4}, 4);
    CHECK((fm.phi - Mat::Identity(4, 4)).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((fm.gram - Mat::Identity(4, 4)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("tabulated state-action features lay rows out as s * A + a") {
    const StackedActionFeatures f{
        PolynomialFeatures{1, make_vec({0.0}), make_vec({9.0})}, 2};
    const FeatureMatrix fm = tabulate_state_action_features(f, 10);
    REQUIRE(fm.phi.rows() == 20);
    REQUIRE(fm.phi.cols() == 4);
    for (int s = 0; s < 10; ++s) {
        for (int a = 0; a < 2; ++a) {
            const Vec expect = feature_eval(f, s, a);
            CHECK((fm.phi.row(2 * s + a).transpose() - expect).lpNorm<Eigen::Infinity>() == 0.0);
        }
    }
    CHECK((fm.gram - fm.phi.transpose() * fm.phi).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("tabulating a rank-deficient map fails fast") {
    // Tabulating more monomials than distinct states leaves dependent columns.
    const StateFeatures f =
        PolynomialFeatures{3, make_vec({0.0}), make_vec({1.0})};
    CHECK_THROWS_AS(tabulate_state_features(f, 2), rank_error);
    CHECK_THROWS_AS(tabulate_state_features(TabularFeatures{3}, 0), invalid_input);
}

TEST_CASE("integer-state evaluation requires a 1-D box for continuous maps") {
    const StateFeatures poly2d =
        PolynomialFeatures{1, make_vec({0.0, 0.0}), make_vec({1.0, 1.0})};
    CHECK_THROWS_WITH_AS(feature_eval(poly2d, 0), doctest::Contains("1-D"), invalid_input);
    const StateFeatures rbf =
        RbfGridFeatures{make_vec({0.0}), make_vec({9.0}), {2}, Vec()};
    const Vec via_int = feature_eval(rbf, 3);
    const Vec via_vec = feature_eval(rbf, make_vec({3.0}));
    CHECK((via_int - via_vec).lpNorm<Eigen::Infinity>() == 0.0);
}
