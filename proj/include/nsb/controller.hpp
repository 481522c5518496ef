#pragma once

#include "nsb/behaviors.hpp"
#include "nsb/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace nsb {

struct SlidingParams {
    double c1 = 2.0;
    double c2 = 0.2;
    double varrho = 100.0;
    FttsmParams fttsm;

    void validate() const {
        fttsm.validate();
        if (!(c1 > 0 && c2 > 0)) throw ConfigError("sliding: c1, c2 must be positive");
        if (!(varrho > 0)) throw ConfigError("sliding: varrho must be positive");
    }
};

struct SurfaceEval {
    Vec3 S = Vec3::Zero();
    Vec3 sigma1 = Vec3::Zero();
    Vec3 sigma2 = Vec3::Zero();
    Vec3 alpha = Vec3::Zero();      // shaping term on the active branch
    Vec3 alpha_dot = Vec3::Zero();  // analytic time derivative along xt1_dot
    bool poly[3] = {false, false, false};
};

/**
 * @brief Componentwise terminal sliding surface.
 *
 * The shaping term alpha follows the same branch as S: the polynomial patch
 * when |sigma1| > eps and |xt1| <= phi_s.
 */
inline SurfaceEval sliding_surface(const Vec3& xt1, const Vec3& xt2, const Vec3& xt1_dot, const SlidingParams& sp) {
    const auto& p = sp.fttsm;
    SurfaceEval out;
    for (int k = 0; k < 3; ++k) {
        const double e = xt1(k);
        const double pw = fttsm_power(e, p);
        const double pl = fttsm_poly(e, p);
        out.sigma1(k) = xt2(k) + sp.c1 * e + sp.c2 * pw;
        out.sigma2(k) = xt2(k) + sp.c1 * e + sp.c2 * pl;
        out.poly[k] = fttsm_poly_active(out.sigma1(k), e, p);
        out.S(k) = sp.varrho * (out.poly[k] ? out.sigma2(k) : out.sigma1(k));
        out.alpha(k) = out.poly[k] ? pl : pw;
        const double slope = out.poly[k] ? fttsm_poly_slope(e, p) : fttsm_power_slope(e, p);
        out.alpha_dot(k) = (xt1_dot(k) == 0.0 || !std::isfinite(slope)) ? 0.0 : slope * xt1_dot(k);
    }
    return out;
}

inline SurfaceEval sliding_surface(const Vec3& xt1, const Vec3& xt2, const SlidingParams& sp) {
    return sliding_surface(xt1, xt2, xt2, sp);
}

/// Shaping vector alpha(xt1) on the branch selected by the surface.
inline Vec3 tracking_alpha(const Vec3& xt1, const Vec3& xt2, const SlidingParams& sp) {
    return sliding_surface(xt1, xt2, sp).alpha;
}

// ---------------------------------------------------------------------------

struct GainSegment {
    double kM = 100.0;
    double c = 0.01;
    double T0 = 0.0;
    int zeta = 1;
    int zeta0 = 0;  // 0 raises the gain toward kM, 1 lowers it
};

/**
 * @brief Sum of logistic steps,
 * k(t) = k0 + sum_j (-1)^zeta0_j zeta_j (kM_j - k0) / (exp(-c_j (t - T_j0)) + 1).
 */
struct GainSchedule {
    double k0 = 0.1;
    std::vector<GainSegment> segments;

    static GainSchedule simple(double k0, double kM, double c, double T0) { return {k0, {{kM, c, T0, 1, 0}}}; }

    double operator()(double t) const {
        double k = k0;
        for (const auto& s : segments) {
            const double sign = (s.zeta0 % 2 == 0) ? 1.0 : -1.0;
            k += sign * s.zeta * (s.kM - k0) / (std::exp(-s.c * (t - s.T0)) + 1.0);
        }
        return k;
    }

    /// Value at t = 0, the lower end of the declared range for raising schedules.
    double initial() const { return (*this)(0.0); }

    double upper() const {
        double m = k0;
        for (const auto& s : segments) m = std::max(m, s.kM);
        return m;
    }

    void validate(double horizon_s = 0.0) const {
        if (!(k0 > 0.0)) throw ConfigError("gain schedule: k0 must be positive");
        if (segments.empty()) throw ConfigError("gain schedule: at least one segment is required");
        double prev_T = -HUGE_VAL, prev_kM = k0;
        for (const auto& s : segments) {
            if (!(s.c > 0.0)) throw ConfigError("gain schedule: slopes must be positive");
            if (!(s.T0 >= 0.0)) throw ConfigError("gain schedule: centres must be nonnegative");
            if (!(s.T0 > prev_T)) throw ConfigError("gain schedule: centres must be strictly increasing");
            if ((s.zeta != 0 && s.zeta != 1) || (s.zeta0 != 0 && s.zeta0 != 1))
                throw ConfigError("gain schedule: zeta and zeta0 must be binary");
            if (s.zeta0 == 1 && !(s.kM < 2.0 * k0))
                throw ConfigError("gain schedule: a lowering segment needs kM < 2 k0");
            if (s.zeta0 == 0 && s.zeta == 1) {
                if (!(s.kM > prev_kM)) throw ConfigError("gain schedule: raising segments need kM increasing above k0");
                prev_kM = s.kM;
            }
            prev_T = s.T0;
        }
        const double end = std::max(horizon_s, 10.0 * prev_T);
        for (int k = 0; k <= 1000; ++k)
            if (!((*this)(end * k / 1000.0) > 0.0)) throw ConfigError("gain schedule: gain is not positive");
    }
};

inline double reaching_gain(double t, const GainSchedule& s) { return s(t); }

// ---------------------------------------------------------------------------

struct RbfNetwork {
    std::vector<VecX> centers;
    std::vector<double> widths;

    std::size_t size() const { return centers.size(); }

    /// h neurons whose centres have every component equal to (k - offset) * spacing.
    static RbfNetwork uniform_diagonal(std::size_t h, std::size_t dim, double offset, double spacing, double width) {
        RbfNetwork net;
        for (std::size_t k = 1; k <= h; ++k) {
            net.centers.push_back(VecX::Constant(static_cast<Eigen::Index>(dim),
                                                 (static_cast<double>(k) - offset) * spacing));
            net.widths.push_back(width);
        }
        return net;
    }
};

inline VecX rbf_features(const VecX& z, const RbfNetwork& net) {
    VecX phi(static_cast<Eigen::Index>(net.size()));
    for (std::size_t k = 0; k < net.size(); ++k) {
        if (net.centers[k].size() != z.size()) throw PreconditionError("rbf: feature dimension mismatch");
        const double w = net.widths[k];
        phi(static_cast<Eigen::Index>(k)) = std::exp(-(z - net.centers[k]).squaredNorm() / (w * w));
    }
    return phi;
}

/// Feature vector [x1; x2; xd_ddot; xt1_dot; alpha_dot].
inline VecX feature_vector(const Vec3& x1, const Vec3& x2, const Vec3& xdd, const Vec3& xt1_dot, const Vec3& alpha_dot) {
    VecX z(15);
    z << x1, x2, xdd, xt1_dot, alpha_dot;
    return z;
}

struct AdaptiveState {
    MatX W;             // h x 3
    double delta_hat = 0.0;
    MatX Gamma;         // h x h
    double gamma3 = 1.0;

    static AdaptiveState make(std::size_t h, double delta0, double gamma_scale, double gamma3) {
        const auto hh = static_cast<Eigen::Index>(h);
        return {MatX::Zero(hh, 3), delta0, gamma_scale * MatX::Identity(hh, hh), gamma3};
    }
};

struct ControlOutput {
    Vec3 u = Vec3::Zero();
    Vec3 u_reach = Vec3::Zero();
    Vec3 u_nn = Vec3::Zero();
    Vec3 u_comp = Vec3::Zero();
    double k1 = 0.0, k2 = 0.0;
};

struct ControlLaw {
    GainSchedule k1, k2;
    double gamma1 = 1.1;
    double gamma2 = 0.5;
    double boundary_layer = 0.0;  // > 0 replaces sgn(S) by tanh(S / width)
    double layer_per_delta = 0.0;  // widens the layer to layer_per_delta * delta_hat when larger

    double layer_width(double delta_hat) const { return std::max(boundary_layer, layer_per_delta * delta_hat); }

    void validate(double horizon_s = 0.0) const {
        k1.validate(horizon_s);
        k2.validate(horizon_s);
        if (!(gamma1 > 1.0)) throw ConfigError("control: gamma1 must exceed 1");
        if (!(gamma2 > 0.0 && gamma2 < 1.0)) throw ConfigError("control: gamma2 must lie in (0,1)");
        if (!(boundary_layer >= 0.0)) throw ConfigError("control: boundary layer must be nonnegative");
        if (!(layer_per_delta >= 0.0)) throw ConfigError("control: layer_per_delta must be nonnegative");
    }
};

/**
 * @brief Reaching law plus neural and disturbance compensation; adaptive
 * states are advanced by one explicit Euler step after u is formed.
 */
inline ControlOutput control_step(const Vec3& S, const VecX& phi, double t, AdaptiveState& st, const ControlLaw& law,
                                  double dt) {
    if (!S.allFinite()) throw DomainError("control_step: non-finite sliding variable");
    ControlOutput out;
    out.k1 = law.k1(t);
    out.k2 = law.k2(t);
    out.u_reach = -out.k1 * signed_pow(S, law.gamma1) - out.k2 * signed_pow(S, law.gamma2);
    out.u_nn = -(st.W.transpose() * phi);
    const double w = law.layer_width(st.delta_hat);
    const Vec3 sw = w > 0.0 ? Vec3((S / w).array().tanh()) : sgn(S);
    out.u_comp = -st.delta_hat * sw;
    out.u = out.u_reach + out.u_nn + out.u_comp;
    st.W += dt * (st.Gamma * phi) * S.transpose();
    st.delta_hat += dt * st.gamma3 * S.lpNorm<1>();
    return out;
}

struct Lemma7Bounds {
    double ds0 = 0.0, ds1 = 0.0, ds2 = 0.0;
    double position(double phi_s) const { return std::max(phi_s, ds1); }
    double velocity() const { return std::max(ds0, ds2); }
};

inline Lemma7Bounds lemma7_bounds(double delta_s, const SlidingParams& sp, double c1t, double c2t, double b1t,
                                  double b2t) {
    const auto& p = sp.fttsm;
    if (!(c1t > 0 && c2t > 0 && b1t > 0 && b2t > 0)) throw PreconditionError("lemma7: tilde coefficients must be positive");
    if (c1t > sp.c1 || c2t > sp.c2 || b1t > p.beta1 || b2t > p.beta2)
        throw PreconditionError("lemma7: tilde coefficients must not exceed their nominal values");
    Lemma7Bounds b;
    const double v = sp.varrho;
    b.ds0 = delta_s / v + sp.c1 * p.phi_s +
            sp.c2 * std::pow(p.beta1 * std::pow(p.phi_s, p.r1) + p.beta2 * std::pow(p.phi_s, p.r2), p.r0);
    const double q = delta_s / (v * c2t);
    b.ds1 = std::min({delta_s / (v * c1t), std::pow(q, 1.0 / (p.r0 * p.r1)) / std::pow(b1t, 1.0 / p.r1),
                      std::pow(q, 1.0 / (p.r0 * p.r2)) / std::pow(b2t, 1.0 / p.r2)});
    b.ds2 = delta_s / v + sp.c1 * b.ds1 +
            sp.c2 * signed_pow(p.beta1 * signed_pow(b.ds1, p.r1) + p.beta2 * signed_pow(b.ds1, p.r2), p.r0);
    return b;
}

}  // namespace nsb
