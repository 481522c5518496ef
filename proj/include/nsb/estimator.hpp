#pragma once

#include "nsb/core.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsb {

struct LocalityError : std::logic_error {
    using std::logic_error::logic_error;
};

struct EstimatorConfig {
    double K1 = 0.4, K2 = 0.6, K3 = 1.0;
    double r3 = 6.0, r4 = 5.0, r5 = 3.0, r6 = 5.0;

    double p_fast() const { return r3 / r4; }
    double p_slow() const { return r5 / r6; }

    void validate() const {
        if (!(K1 > 0 && K2 > 0 && K3 > 0)) throw ConfigError("estimator: K1, K2, K3 must be positive");
        if (!(r3 > 0 && r4 > 0 && r5 > 0 && r6 > 0)) throw ConfigError("estimator: r3..r6 must be positive");
        if (!(p_fast() > 1.0)) throw ConfigError("estimator: r3/r4 must exceed 1");
        if (!(p_slow() < 1.0)) throw ConfigError("estimator: r5/r6 must be below 1");
    }
};

/// Records every estimate and leader read made on behalf of one agent.
struct AccessLog {
    std::vector<std::size_t> estimates;
    int leader_reads = 0;
    void clear() {
        estimates.clear();
        leader_reads = 0;
    }
};

/**
 * @brief What agent i is allowed to see: its own estimate, estimates of graph
 * neighbours, and the leader position only when b_i > 0.
 */
class LocalView {
public:
    LocalView(const CommGraph& g, std::size_t self, std::span<const Vec3> estimates, const Vec3* leader,
              AccessLog* log = nullptr)
        : g_(g), self_(self), est_(estimates), leader_(leader), log_(log) {}

    std::size_t self() const { return self_; }
    const CommGraph& graph() const { return g_; }

    const Vec3& estimate(std::size_t j) const {
        if (j != self_ && !(g_.a(self_, j) > 0.0))
            throw LocalityError("estimator: agent read a non-neighbour estimate");
        if (log_) log_->estimates.push_back(j);
        return est_[j];
    }

    const Vec3& leader() const {
        if (!(g_.b(self_) > 0.0)) throw LocalityError("estimator: agent without leader access read the leader");
        if (!leader_) throw LocalityError("estimator: leader state not supplied");
        if (log_) ++log_->leader_reads;
        return *leader_;
    }

private:
    const CommGraph& g_;
    std::size_t self_;
    std::span<const Vec3> est_;
    const Vec3* leader_;
    AccessLog* log_;
};

/// Local consensus error sum_j a_ij (xh_i - xh_j) + b_i (xh_i - x_o).
inline Vec3 estimator_error(const LocalView& view) {
    const auto i = view.self();
    const auto& g = view.graph();
    const Vec3 xi = view.estimate(i);
    Vec3 e = Vec3::Zero();
    for (std::size_t j : g.neighbors(i)) e += g.a(i, j) * (xi - view.estimate(j));
    if (g.b(i) > 0.0) e += g.b(i) * (xi - view.leader());
    return e;
}

inline Vec3 estimator_derivative(const LocalView& view, const EstimatorConfig& cfg) {
    const Vec3 e = estimator_error(view);
    return -cfg.K1 * signed_pow(e, cfg.p_fast()) - cfg.K2 * signed_pow(e, cfg.p_slow()) - cfg.K3 * sgn(e);
}

struct EstimatorBound {
    double lambda_min = 0.0, lambda_max = 0.0;
    double r1t = 0.0, r2t = 0.0;
    double K1t = 0.0, K2t = 0.0;
    double T_e = 0.0;
};

inline EstimatorBound estimator_settling_bound(const CommGraph& g, const EstimatorConfig& cfg) {
    cfg.validate();
    const auto spec = build_h_matrix(g);
    EstimatorBound b;
    b.lambda_min = spec.lambda_min;
    b.lambda_max = spec.lambda_max;
    b.r1t = (cfg.r3 + cfg.r4) / (2.0 * cfg.r4);
    b.r2t = (cfg.r5 + cfg.r6) / (2.0 * cfg.r6);
    const double n = static_cast<double>(g.size());
    const double ratio = 2.0 * spec.lambda_min * spec.lambda_min / spec.lambda_max;
    b.K1t = cfg.K1 * std::pow(3.0 * n, 1.0 - b.r1t) * std::pow(ratio, 1.0 / b.r1t);
    b.K2t = cfg.K2 * std::pow(ratio, 1.0 / b.r2t);
    b.T_e = 1.0 / (b.K1t * (b.r1t - 1.0)) + 1.0 / (b.K2t * (1.0 - b.r2t));
    return b;
}

/// V_e = 1/2 xbar^T (H (x) I3) xbar with xbar_i = xh_i - x_o.
inline double estimator_lyapunov(const MatX& h, std::span<const Vec3> estimates, const Vec3& leader) {
    double v = 0.0;
    const auto n = static_cast<std::size_t>(h.rows());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            v += h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                 (estimates[i] - leader).dot(estimates[j] - leader);
    return 0.5 * v;
}

/// Norm bound on the initial estimate rate, K1 |eta1| + K2 |eta2| + sqrt(3) K3.
inline double estimate_rate_bound(const CommGraph& g, const EstimatorConfig& cfg, std::span<const Vec3> estimates,
                                  const Vec3& leader, std::size_t i) {
    Vec3 eta1 = Vec3::Zero(), eta2 = Vec3::Zero();
    const auto bar = [&](std::size_t k) { return Vec3(estimates[k] - leader); };
    for (std::size_t j : g.neighbors(i)) {
        eta1 += g.a(i, j) * (signed_pow(bar(i), cfg.p_fast()) - signed_pow(bar(j), cfg.p_fast()));
        eta2 += g.a(i, j) * (signed_pow(bar(i), cfg.p_slow()) - signed_pow(bar(j), cfg.p_slow()));
    }
    eta1 += g.b(i) * signed_pow(bar(i), cfg.p_fast());
    eta2 += g.b(i) * signed_pow(bar(i), cfg.p_slow());
    return cfg.K1 * eta1.norm() + cfg.K2 * eta2.norm() + std::sqrt(3.0) * cfg.K3;
}

}  // namespace nsb
