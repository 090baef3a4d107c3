#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace rrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Uncertainty sets
//
// Each set lives in R^n (n = number of states) and describes additive kernel
// perturbations u with sum(u) = 0, so that p0 + u stays a probability row.
// ---------------------------------------------------------------------------

/// The singleton {0}: no uncertainty.  Support function is identically zero.
struct Degenerate {
    int dim = 0;
};

/// A finite list of perturbation vectors.  The support function is the exact
/// minimum over the list; feasibility of p0 + u is the builder's business.
struct FiniteVertices {
    std::vector<Vec> vertices;
};

/// {x : ||x||_2 <= radius, sum(x) = 0}.  With sum_zero = false the sum
/// constraint is dropped and the set is the plain L2 ball.  This is the
/// model-free approximation set: it needs no knowledge of the nominal row.
struct CenteredSphere {
    double radius = 0.0;
    int dim = 0;
    bool sum_zero = true;
};

/// {x : ||x||_2 <= radius, sum(x) = 0, -p0 <= x <= 1 - p0}: the sphere
/// intersected with the constraints keeping p0 + x a probability vector.
struct SimplexSphere {
    double radius = 0.0;
    Vec nominal; // p0, a probability row
};

using UncertaintySet = std::variant<Degenerate, FiniteVertices, CenteredSphere, SimplexSphere>;

/// Ambient dimension of the set, or 0 when it cannot be determined
/// (FiniteVertices with an empty list never validates anyway).
int set_dimension(const UncertaintySet& set);

/// Throws invalid_input unless the set's own invariants hold: vertices sum to
/// zero (1e-12) and share a dimension; radii are positive and finite;
/// SimplexSphere nominals are probability vectors (1e-12).
void validate_set(const UncertaintySet& set);

struct SupportResult {
    double value = 0.0;
    Vec minimizer;
};

/// Support-function infimum sigma_U(v) = inf_{u in U} u'v together with a
/// feasible minimizer.
///
/// Degenerate: (0, 0).  FiniteVertices: exact enumeration, first vertex wins
/// ties.  CenteredSphere: closed form -radius * ||v - mean(v) 1||_2 (without
/// the sum-zero flag, -radius * ||v||_2).  SimplexSphere: projected gradient
/// with Dykstra projections onto ball/hyperplane/box; the returned minimizer
/// satisfies every membership constraint within 1e-9.
///
/// Throws invalid_input on dimension mismatch or non-finite v.
SupportResult support_inf(const UncertaintySet& set, const Vec& v);

/// Closed-form sphere support value for linearly parameterized values
/// v = Phi w, using a precomputed gram = Phi'Phi: returns
/// -sqrt(radius_param * w' gram w).  Pass strict_compat = true to get the
/// unsigned +sqrt value some conventions print; nothing in this library
/// consumes that form.
///
/// Throws invalid_input if gram is not square, dimensions mismatch,
/// radius_param < 0, or w' gram w is negative beyond round-off.
double support_inf_gram(const Mat& gram, const Vec& w, double radius_param,
                        bool strict_compat = false);

/// Weighted Hausdorff-style distance between an exact set and its
/// approximation:
///
///   rho = max( max_{x in approx} max_{y in exact \ approx} ||x - y||_d,
///              max_{x in exact}  max_{y in approx \ exact} ||x - y||_d ) / d_min
///
/// with ||z||_d = sqrt(sum_i d_i z_i^2) and d_min = min_i d_i.  Set
/// differences compare vertices exactly (componentwise within 1e-12); an
/// empty difference contributes 0, so identical sets give rho = 0.
///
/// Both sets must be FiniteVertices or Degenerate (treated as {0});
/// continuous variants throw unsupported_variant.  d must be strictly
/// positive.
double set_distance_rho(const UncertaintySet& exact, const UncertaintySet& approx,
                        const Vec& d);

struct ContractionInputs {
    double alpha = 0.0;  // discount
    double beta = 0.0;   // exploration-domination constant
    double rho = 0.0;    // set distance
    double lambda = 0.0; // trace decay
};

struct ContractionCoefficient {
    double value = 0.0;
    bool is_contraction = false; // value < 1
};

/// c(alpha, beta, rho, lambda) = (beta (2 - lambda) + rho alpha) / (1 - beta lambda).
/// Throws invalid_input unless alpha in (0,1), beta in (0,1), rho >= 0,
/// lambda in [0,1).
ContractionCoefficient contraction_coefficient(const ContractionInputs& in);

} // namespace rrl
