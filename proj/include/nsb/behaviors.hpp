#pragma once

#include "nsb/core.hpp"

#include <array>
#include <cmath>

namespace nsb {

/**
 * @brief Fixed-time terminal sliding function parameters shared by the
 * behaviors and the tracking surface.
 *
 * The polynomial patch coefficients wp1, wp2 are derived so that the patch
 * meets the power branch in value at |x| = phi_s.
 */
struct FttsmParams {
    double beta1 = 0.6;
    double beta2 = 0.6;
    double c0 = 1.0;
    double phi_s = 0.01;
    double r0 = 0.9;
    double r1 = 1.2;
    double r2 = 0.6;
    double eps_sigma = 1e-9;

    double wp1() const {
        return (2.0 - r0) * std::pow(beta1 * std::pow(phi_s, (r1 * r0 - 1.0) / r0) +
                                         beta2 * std::pow(phi_s, (r2 * r0 - 1.0) / r0),
                                     r0);
    }
    double wp2() const {
        return (r0 - 1.0) * std::pow(beta1 * std::pow(phi_s, (r1 * r0 - 2.0) / r0) +
                                         beta2 * std::pow(phi_s, (r2 * r0 - 2.0) / r0),
                                     r0);
    }

    void validate() const {
        if (!(beta1 > 0 && beta2 > 0 && c0 > 0 && phi_s > 0 && r0 > 0 && r1 > 0 && r2 > 0))
            throw ConfigError("fttsm: beta1, beta2, c0, phi_s, r0, r1, r2 must be positive");
        if (!(r0 > 0.5 && r0 < 1.0)) throw ConfigError("fttsm: r0 must lie in (1/2, 1)");
        if (!(r1 * r0 > 1.0)) throw ConfigError("fttsm: r1*r0 must exceed 1");
        if (!(r2 * r0 < 1.0)) throw ConfigError("fttsm: r2*r0 must be below 1");
        if (!(eps_sigma >= 0.0)) throw ConfigError("fttsm: eps_sigma must be nonnegative");
    }
};

/// (beta1 x^[r1] + beta2 x^[r2])^[r0]
inline double fttsm_power(double x, const FttsmParams& p) {
    return signed_pow(p.beta1 * signed_pow(x, p.r1) + p.beta2 * signed_pow(x, p.r2), p.r0);
}

inline double fttsm_poly(double x, const FttsmParams& p) {
    return p.wp1() * x + p.wp2() * signed_pow(x, 2.0);
}

/// Derivative of the power branch with respect to x; unbounded at x = 0.
inline double fttsm_power_slope(double x, const FttsmParams& p) {
    const double ax = std::abs(x);
    if (ax == 0.0) return HUGE_VAL;
    const double g = p.beta1 * std::pow(ax, p.r1) + p.beta2 * std::pow(ax, p.r2);
    const double dg = p.beta1 * p.r1 * std::pow(ax, p.r1 - 1.0) + p.beta2 * p.r2 * std::pow(ax, p.r2 - 1.0);
    return p.r0 * std::pow(g, p.r0 - 1.0) * dg;
}

inline double fttsm_poly_slope(double x, const FttsmParams& p) {
    return p.wp1() + 2.0 * p.wp2() * std::abs(x);
}

struct AlphaEval {
    double value = 0.0;
    double slope = 0.0;  // d alpha / d x on the active branch
    double sigma1 = 0.0;
    bool poly_branch = false;
};

/// Polynomial branch is active when |sigma1| > eps_sigma and |x| <= phi_s.
inline bool fttsm_poly_active(double sigma1, double x, const FttsmParams& p) {
    return std::abs(sigma1) > p.eps_sigma && std::abs(x) <= p.phi_s;
}

/**
 * @brief Task-space FTTSM shaping function.
 * @param rt task error
 * @param rt_dot its time derivative, used only by the branch test
 */
inline AlphaEval fttsm_alpha_eval(double rt, double rt_dot, const FttsmParams& p) {
    AlphaEval out;
    out.sigma1 = rt_dot + p.c0 * fttsm_power(rt, p);
    out.poly_branch = fttsm_poly_active(out.sigma1, rt, p);
    if (out.poly_branch) {
        out.value = fttsm_poly(rt, p);
        out.slope = fttsm_poly_slope(rt, p);
    } else {
        out.value = fttsm_power(rt, p);
        out.slope = fttsm_power_slope(rt, p);
    }
    return out;
}

inline double fttsm_alpha(double rt, double rt_dot, const FttsmParams& p) {
    return fttsm_alpha_eval(rt, rt_dot, p).value;
}

// ---------------------------------------------------------------------------

inline constexpr double kPinvFloor = 1e-6;

struct RowPinv {
    Vec3 pinv = Vec3::Zero();
    bool damped = false;
};

/// Pseudoinverse of a 1x3 row; damped by eps^2 once the row norm drops below eps.
inline RowPinv row_pinv(const Vec3& j, double eps = kPinvFloor) {
    const double n2 = j.squaredNorm();
    RowPinv out;
    out.damped = n2 <= eps * eps;
    out.pinv = out.damped ? Vec3(j / (n2 + eps * eps)) : Vec3(j / n2);
    return out;
}

/// Scalar behavior evaluation: task value, error, Jacobian row, pseudoinverse and velocity.
struct BehaviorOutput {
    double rho = 0.0;
    double rho_tilde = 0.0;
    Vec3 jacobian = Vec3::Zero();
    Vec3 jacobian_pinv = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    AlphaEval alpha;
    bool damped = false;
};

struct CoabOutput : BehaviorOutput {
    bool active = false;
};

/**
 * Collision avoidance: keep the agent outside the repulsive ball of radius d
 * around the object at xo moving with velocity vo.
 */
inline CoabOutput coab_evaluate(const Vec3& x, const Vec3& xo, const Vec3& vo, double d, double lambda_io,
                                const FttsmParams& p, double rt_dot = 0.0) {
    if (!(d > 0.0)) throw PreconditionError("coab: d must be positive");
    if (!(lambda_io > 0.0)) throw PreconditionError("coab: lambda_io must be positive");
    CoabOutput out;
    const Vec3 r = x - xo;
    out.rho = 0.5 * r.squaredNorm();
    out.rho_tilde = 0.5 * d * d - out.rho;
    out.jacobian = r;
    const auto pi = row_pinv(r);
    out.jacobian_pinv = pi.pinv;
    out.damped = pi.damped;
    out.active = r.norm() <= d;
    if (!out.active) return out;
    out.alpha = fttsm_alpha_eval(out.rho_tilde, rt_dot, p);
    // J_i^o = -J_io, so -J_i^o vo = +J_io vo.
    out.velocity = out.jacobian_pinv * (lambda_io * out.alpha.value + r.dot(vo));
    return out;
}

struct CtbTask {
    enum class Mode { FlexibleDistance, FixedRelativePosition };
    Mode mode = Mode::FlexibleDistance;
    double d_i0 = 3.0;
    Vec3 offset = Vec3::Zero();
    double lambda_f = 1.0;

    void validate(const FttsmParams& p) const {
        if (!(lambda_f > 0.0)) throw ConfigError("ctb: lambda_f must be positive");
        if (mode == Mode::FlexibleDistance) {
            if (!(d_i0 > 0.0)) throw ConfigError("ctb: d_i0 must be positive");
            if (!(p.phi_s <= 0.5 * d_i0 * d_i0)) throw ConfigError("ctb: phi_s must not exceed d_i0^2/2");
        }
        if (!offset.allFinite()) throw ConfigError("ctb: offset must be finite");
    }
};

/**
 * Cooperative tracking toward the local leader estimate xh moving with xh_dot.
 * Flexible mode regulates the distance to d_i0; fixed mode regulates the
 * relative position to the task offset.
 */
inline BehaviorOutput ctb_evaluate(const Vec3& x, const Vec3& xh, const Vec3& xh_dot, const CtbTask& task,
                                   const FttsmParams& p, double rt_dot = 0.0) {
    BehaviorOutput out;
    Vec3 r = x - xh;
    if (task.mode == CtbTask::Mode::FixedRelativePosition) {
        r -= task.offset;
        out.rho = 0.5 * r.squaredNorm();
        out.rho_tilde = -out.rho;
    } else {
        out.rho = 0.5 * r.squaredNorm();
        out.rho_tilde = 0.5 * task.d_i0 * task.d_i0 - out.rho;
    }
    out.jacobian = r;
    const auto pi = row_pinv(r);
    out.jacobian_pinv = pi.pinv;
    out.damped = pi.damped;
    out.alpha = fttsm_alpha_eval(out.rho_tilde, rt_dot, p);
    // The estimate Jacobian is -J_if.
    out.velocity = out.jacobian_pinv * (task.lambda_f * out.alpha.value + r.dot(xh_dot));
    return out;
}

/// Six-agent triangle formation offsets with edge scale d.
inline std::array<Vec3, 6> triangle_offsets(double d) {
    if (!(d > 0.0)) throw PreconditionError("triangle_offsets: d must be positive");
    const double s3 = std::sqrt(3.0);
    return {Vec3(0.0, d, 0.0),
            Vec3(-s3 * d / 4.0, d / 4.0, 0.0),
            Vec3(s3 * d / 4.0, d / 4.0, 0.0),
            Vec3(-s3 * d / 2.0, -d / 2.0, 0.0),
            Vec3(0.0, -d / 2.0, 0.0),
            Vec3(s3 * d / 2.0, -d / 2.0, 0.0)};
}

}  // namespace nsb
