#include "rrl/learner.hpp"

#include <cmath>
#include <sstream>

#include "rrl/errors.hpp"

namespace rrl {

void validate_schedule(const StepSchedule& s) {
    if (!(s.gamma0 > 0.0) || !std::isfinite(s.gamma0)) {
        throw invalid_input("schedule needs gamma0 > 0");
    }
    if (!(s.t0 >= 0.0) || !std::isfinite(s.t0)) {
        throw invalid_input("schedule needs t0 >= 0");
    }
    if (!(s.kappa > 0.5 && s.kappa <= 1.0)) {
        throw invalid_input("schedule needs kappa in (0.5, 1]");
    }
}

double step_size(const StepSchedule& s, long t) {
    validate_schedule(s);
    if (t < 0) throw invalid_input("step index must be >= 0");
    return s.gamma0 / std::pow(s.t0 + static_cast<double>(t), s.kappa);
}

std::function<double(const Vec&)> make_gram_sigma(Mat gram_eff, double radius_param) {
    if (!(radius_param >= 0.0) || !std::isfinite(radius_param)) {
        throw invalid_input("radius_param must be finite and >= 0");
    }
    return [gram = std::move(gram_eff), radius_param](const Vec& w) {
        return support_inf_gram(gram, w, radius_param);
    };
}

std::function<double(const Vec&)> make_sphere_sigma(const CenteredSphere& sphere,
                                                    const Mat& phi) {
    validate_set(UncertaintySet{sphere});
    if (phi.rows() != sphere.dim) {
        throw invalid_input("sphere dimension must match the feature matrix rows");
    }
    Mat effective = phi;
    if (sphere.sum_zero) {
        effective.rowwise() -= phi.colwise().mean(); // J phi
    }
    return make_gram_sigma(effective.transpose() * effective, sphere.radius * sphere.radius);
}

std::function<double(const Vec&)> make_general_sigma(UncertaintySet set, Mat phi) {
    validate_set(set);
    if (set_dimension(set) != phi.rows()) {
        throw invalid_input("set dimension must match the feature matrix rows");
    }
    return [set = std::move(set), phi = std::move(phi)](const Vec& w) {
        return support_inf(set, phi * w).value;
    };
}

LearnerState learner_init(int n_features, double discount, double lambda,
                          std::optional<Vec> w0, const StepSchedule& schedule,
                          std::optional<double> ridge) {
    if (n_features < 1) throw invalid_input("learner needs n_features >= 1");
    if (!(discount > 0.0 && discount < 1.0)) throw invalid_input("discount must lie in (0,1)");
    if (!(lambda >= 0.0 && lambda < 1.0)) throw invalid_input("lambda must lie in [0,1)");
    validate_schedule(schedule);
    LearnerState st;
    st.discount = discount;
    st.lambda = lambda;
    st.schedule = schedule;
    st.ridge = ridge.value_or(1e-6 * n_features);
    if (!(st.ridge >= 0.0)) throw invalid_input("ridge must be >= 0");
    if (w0) {
        if (w0->size() != n_features) throw invalid_input("w0 has the wrong length");
        st.w = *std::move(w0);
    } else {
        st.w = Vec::Zero(n_features);
    }
    st.z = Vec::Zero(n_features);
    st.a_acc = Mat::Zero(n_features, n_features);
    st.b_acc = Mat::Zero(n_features, n_features);
    st.r_acc = Vec::Zero(n_features);
    return st;
}

void reset_trace(LearnerState& st) {
    st.z.setZero();
}

void observe(LearnerState& st, const TransitionSample& sample) {
    const long L = st.w.size();
    if (sample.phi_now.size() != L || sample.phi_next.size() != L) {
        throw invalid_input("sample feature length disagrees with the learner");
    }
    if (!sample.phi_now.allFinite() || !sample.phi_next.allFinite() ||
        !std::isfinite(sample.reward)) {
        throw invalid_input("sample contains non-finite entries");
    }
    if (sample.set_id < 0) throw invalid_input("set_id must be >= 0");
    st.z = (st.discount * st.lambda) * st.z + sample.phi_now;
    st.a_acc += st.z * (st.discount * sample.phi_next - sample.phi_now).transpose();
    st.b_acc += sample.phi_now * sample.phi_now.transpose();
    st.r_acc += st.z * sample.reward;
    auto [it, inserted] = st.trace_by_set.try_emplace(sample.set_id, Vec::Zero(L));
    it->second += st.z;
    st.t += 1;
}

Vec robust_correction(const LearnerState& st, const Vec& w, const SigmaOracle& sigma) {
    if (st.t < 1) throw invalid_input("robust_correction needs at least one sample");
    if (w.size() != st.w.size()) throw invalid_input("weight length mismatch");
    Vec c = Vec::Zero(st.w.size());
    for (const auto& [set_id, trace_sum] : st.trace_by_set) {
        if (set_id >= static_cast<int>(sigma.sigma_by_set.size()) ||
            !sigma.sigma_by_set[static_cast<std::size_t>(set_id)]) {
            std::ostringstream msg;
            msg << "no sigma evaluator for set id " << set_id;
            throw invalid_input(msg.str());
        }
        c += trace_sum * sigma.sigma_by_set[static_cast<std::size_t>(set_id)](w);
    }
    return (st.discount / static_cast<double>(st.t)) * c;
}

const Vec& learner_step(LearnerState& st, const SigmaOracle& sigma) {
    if (st.t < 1) throw invalid_input("learner_step needs at least one sample");
    const double inv_t = 1.0 / static_cast<double>(st.t);
    const long L = st.w.size();
    const Mat b_t = inv_t * st.b_acc + st.ridge * Mat::Identity(L, L);
    const Vec drive = inv_t * (st.a_acc * st.w) + inv_t * st.r_acc +
                      robust_correction(st, st.w, sigma);
    Eigen::LDLT<Mat> solve(b_t);
    const Vec delta = solve.solve(drive);
    if (solve.info() != Eigen::Success || !delta.allFinite()) {
        throw solver_failure("learner step solve failed");
    }
    st.w += step_size(st.schedule, st.t) * delta;
    return st.w;
}

LearnerRun run_to_convergence(LearnerState& st, const SampleStream& stream, double eps0,
                              long max_steps, const SigmaOracle& sigma) {
    if (!(eps0 > 0.0)) throw invalid_input("eps0 must be positive");
    if (max_steps < 1) throw invalid_input("max_steps must be >= 1");
    if (!stream) throw invalid_input("run_to_convergence needs a sample stream");
    LearnerRun out;
    while (out.steps < max_steps) {
        std::optional<TransitionSample> sample = stream();
        if (!sample) {
            out.stop_reason = "stream exhausted";
            out.w = st.w;
            return out;
        }
        observe(st, *sample);
        const Vec w_prev = st.w;
        learner_step(st, sigma);
        out.steps += 1;
        out.last_delta = (st.w - w_prev).norm();
        if (out.last_delta < eps0) {
            out.converged = true;
            out.stop_reason = "weight change below eps0";
            out.w = st.w;
            return out;
        }
    }
    out.stop_reason = "max steps reached";
    out.w = st.w;
    return out;
}

} // namespace rrl
