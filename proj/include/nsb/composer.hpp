#pragma once

#include "nsb/behaviors.hpp"
#include "nsb/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace nsb {

/// N = I - J^+ J for a 1x3 row J; identity for a zero row.
inline Mat3 nullspace_projector(const Vec3& j) {
    if (j.squaredNorm() == 0.0) return Mat3::Identity();
    const Vec3 jp = row_pinv(j).pinv;
    return Mat3::Identity() - jp * j.transpose();
}

struct EscapeConfig {
    enum class AnglePolicy { RandomSeeded, Fixed };
    double delta_d = 0.05;
    double eps_lm = 1e-4;
    double hold_s = 1.0;
    AnglePolicy policy = AnglePolicy::RandomSeeded;
    double theta_x = 0.0, theta_y = 0.0, theta_z = 1.5707963267948966;

    void validate() const {
        if (!(delta_d > 0.0)) throw ConfigError("escape: delta_d must be positive");
        if (!(eps_lm > 0.0)) throw ConfigError("escape: eps_lm must be positive");
        if (!(hold_s > 0.0)) throw ConfigError("escape: hold_s must be positive");
        if (policy == AnglePolicy::Fixed) {
            constexpr double half_pi = 1.5707963267948966;
            if (theta_x * theta_x + theta_y * theta_y + theta_z * theta_z == 0.0)
                throw ConfigError("escape: fixed angles must not all be zero");
            for (double t : {theta_x, theta_y, theta_z})
                if (!(std::abs(t) <= half_pi)) throw ConfigError("escape: fixed angles must lie in [-pi/2, pi/2]");
        }
    }
};

/// Deterministic stream; uniform draws built from raw 64-bit output so results do not depend on the standard library.
class EscapeRng {
public:
    explicit EscapeRng(std::uint64_t seed = 0) : eng_(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::mt19937_64 eng_;
};

struct EscapeState {
    bool holding = false;
    double until = 0.0;
    Vec3 direction = Vec3::Zero();
    int triggers = 0;
};

struct MergedVelocity {
    Vec3 velocity = Vec3::Zero();
    bool escape_active = false;
    bool escape_triggered = false;
    double lambda_io = 0.0;
};

/**
 * @brief Prioritized merge: CoAB velocity plus the CTB velocity projected into
 * the CoAB null space, with a rotated escape term near local minima.
 */
inline MergedVelocity merge(const Vec3& v_io, const Vec3& v_if, const Vec3& j_io, bool coab_active,
                            const EscapeConfig& esc, EscapeState& state, EscapeRng& rng, double t, const Vec3& x,
                            const Vec3& xo) {
    MergedVelocity out;
    if (state.holding && t >= state.until) state.holding = false;
    if (!coab_active) {
        out.velocity = v_if;
        return out;
    }
    out.velocity = v_io + nullspace_projector(j_io) * v_if;
    if (!state.holding && (v_io + v_if).norm() <= esc.eps_lm) {
        const Vec3 r = x - xo;
        const double rn = r.norm();
        if (rn > 0.0) {
            double tx = esc.theta_x, ty = esc.theta_y, tz = esc.theta_z;
            if (esc.policy == EscapeConfig::AnglePolicy::RandomSeeded) {
                constexpr double half_pi = 1.5707963267948966;
                do {
                    tx = rng.uniform(-half_pi, half_pi);
                    ty = rng.uniform(-half_pi, half_pi);
                    tz = rng.uniform(-half_pi, half_pi);
                } while (tx * tx + ty * ty + tz * tz == 0.0);
            }
            state.direction = rotate_unit(r / rn, tx, ty, tz);
            state.holding = true;
            state.until = t + esc.hold_s;
            ++state.triggers;
            out.escape_triggered = true;
        }
    }
    if (state.holding) {
        out.velocity += esc.delta_d * state.direction;
        out.escape_active = true;
    }
    return out;
}

struct LambdaStar {
    double lambda = 0.0;
    double ups1 = 0.0, ups2 = 0.0, ups3 = 0.0;
    bool floored = false;
};

/**
 * Smallest CoAB gain for which the velocity error dominates the sliding
 * surface position terms.
 * @param pinv_norm ||J_io^+||
 * @param alpha_io CoAB shaping value
 * @param xdot agent velocity
 * @param xt1 position tracking error
 * @param alpha_s tracking shaping vector alpha(xt1)
 */
inline LambdaStar lambda_star(double pinv_norm, double alpha_io, const Vec3& xdot, const Vec3& xt1,
                              const Vec3& alpha_s, double c1, double c2, double lambda_min = 0.0,
                              double ups1_floor = 1e-18) {
    LambdaStar out;
    const double a = xdot.norm(), b = xt1.norm(), c = alpha_s.norm();
    out.ups1 = pinv_norm * pinv_norm * alpha_io * alpha_io;
    out.ups2 = -2.0 * pinv_norm * std::abs(alpha_io) * (a + c1 * b + c2 * c);
    out.ups3 = -(a * a + c1 * c1 * b * b + c2 * c2 * c * c + 2.0 * c1 * a * b + 2.0 * c2 * a * c +
                 2.0 * c1 * c2 * b * c);
    if (out.ups1 < ups1_floor) {
        out.lambda = lambda_min;
        out.floored = true;
        return out;
    }
    const double disc = std::max(0.0, out.ups2 * out.ups2 - 4.0 * out.ups1 * out.ups3);
    out.lambda = (-out.ups2 + std::sqrt(disc)) / (2.0 * out.ups1);
    return out;
}

struct OfflineBoundInputs {
    double gamma_io = 0.0;  // 0 selects the smallest admissible weight plus gamma_eps
    double gamma_f = 1.0;
    double gamma_eps = 0.1;
    double lambda_iv = 0.1;
    double lambda_f = 1.0;
    double L0 = 4.5;
    double L_obs = 0.0;    // sup of object speed
    double L_xhat = 0.0;   // estimate-rate bound
    double delta_d = 0.0;
    double d = 2.0;
    double d_i0 = 3.0;
    FttsmParams fttsm;
};

struct OfflineBounds {
    double L_iof = 0, L_ifo = 0, L_io = 0, L_if = 0;
    double phi_s_star = 0, L0_star = 0;
    double gamma_io = 0;
    double lambda1 = 0, lambda2 = 0, lambda3 = 0, lambda4 = 0;
    double max() const { return std::max({lambda1, lambda2, lambda3, lambda4}); }
};

/// Weight condition on gamma_io as used inside the merged-task proof.
inline double gamma_io_min_proof(const OfflineBoundInputs& in) {
    const double ps = in.fttsm.phi_s;
    return in.gamma_f * in.L0 * std::sqrt(in.d_i0 * in.d_i0 + 2.0 * in.L0) / (ps * std::sqrt(in.d * in.d - 2.0 * ps)) +
           in.gamma_eps;
}

/// Weight condition on gamma_io as stated with the merged Lyapunov function.
inline double gamma_io_min_statement(const OfflineBoundInputs& in) {
    return in.d_i0 * in.gamma_f * in.L0 / (in.d * in.fttsm.phi_s) + in.gamma_eps;
}

inline OfflineBounds lambda_offline_bounds(const OfflineBoundInputs& in) {
    const auto& p = in.fttsm;
    const double ps = p.phi_s;
    if (!(in.d_i0 * in.d_i0 > 2.0 * ps)) throw ConfigError("offline bounds: d_i0^2 must exceed 2 phi_s");
    if (!(in.d * in.d > 2.0 * ps)) throw ConfigError("offline bounds: d^2 must exceed 2 phi_s");
    if (!(ps < in.L0)) throw ConfigError("offline bounds: phi_s must be below L0");
    if (!(in.gamma_eps > 0 && in.gamma_f > 0 && in.lambda_iv > 0 && in.lambda_f > 0))
        throw ConfigError("offline bounds: weights must be positive");
    OfflineBounds b;
    b.L_iof = std::sqrt((in.d * in.d + 2.0 * in.L0) / (in.d_i0 * in.d_i0 - 2.0 * ps));
    b.L_ifo = std::sqrt((in.d_i0 * in.d_i0 + 2.0 * in.L0) / (in.d * in.d - 2.0 * ps));
    b.L_io = std::sqrt(in.d * in.d + 2.0 * in.L0);
    b.L_if = std::sqrt(in.d_i0 * in.d_i0 + 2.0 * in.L0);
    b.phi_s_star = std::pow(p.beta1 * std::pow(ps, p.r1) + p.beta2 * std::pow(ps, p.r2), p.r0);
    b.L0_star = std::pow(p.beta1 * std::pow(in.L0, p.r1) + p.beta2 * std::pow(in.L0, p.r2), p.r0);
    b.gamma_io = in.gamma_io > 0.0 ? in.gamma_io : gamma_io_min_proof(in);

    const double go = b.gamma_io, gf = in.gamma_f, ge = in.gamma_eps, pss = b.phi_s_star;
    const double lx = in.L_xhat, lo = in.L_obs, dd = in.delta_d;
    b.lambda1 = go * in.lambda_f * b.L_iof / ge + go * b.L_io * lx / (pss * ge) + gf * b.L_if * (lx + lo) / (pss * ge) +
                go * in.lambda_iv / ge;
    b.lambda2 = go * in.lambda_f * b.L_iof * b.L0_star / (ge * pss) + go * b.L_io * lx / (pss * ge) +
                gf * b.L_if * (lx + lo) * in.L0 / (pss * ps * ge) + go * in.lambda_iv / ge;
    b.lambda3 = go * in.lambda_f * b.L_iof / ge + go * b.L_io * (lx + dd) / (pss * ge) +
                gf * b.L_if * (lx + lo + dd) / (pss * ge) + go * in.lambda_iv / ge;
    b.lambda4 = go * in.lambda_f * b.L_iof * b.L0_star / (ge * pss) + go * b.L_io * (lx + dd) / (pss * ge) +
                gf * b.L_if * (lx + lo + dd) * in.L0 / (pss * ps * ge) + go * in.lambda_iv / ge;
    return b;
}

}  // namespace nsb
