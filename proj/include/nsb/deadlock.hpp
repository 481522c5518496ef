#pragma once

#include "nsb/scenario.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace nsb {

/// Geometry of the antipodal deadlock: static leader at the origin, static obstacle on the +x axis, agent behind it.
struct DeadlockGeometry {
    double obstacle_x_m = 5.5;
    double d_m = 2.0;
    double d_i0_m = 3.0;
    double lambda_min = 1.0;
    double duration_s = 40.0;
};

/// Signed x component of v_io + v_if for the agent at rest on the axis at obstacle_x + s.
inline double deadlock_residual(double s, const DeadlockGeometry& g, const ScenarioConfig& c) {
    const Vec3 x(g.obstacle_x_m + s, 0.0, 0.0);
    const Vec3 xo(g.obstacle_x_m, 0.0, 0.0);
    const Vec3 zero = Vec3::Zero();
    auto coab = coab_evaluate(x, xo, zero, g.d_m, 1.0, c.fttsm);
    const auto ls = lambda_star(coab.jacobian_pinv.norm(), coab.alpha.value, zero, zero, zero, c.sliding.c1,
                                c.sliding.c2, c.lambda_min);
    const double lambda = std::max(ls.lambda + c.lambda_robust, c.lambda_min);
    coab = coab_evaluate(x, xo, zero, g.d_m, lambda, c.fttsm);
    const auto ctb = ctb_evaluate(x, zero, zero, c.task(0), c.fttsm);
    return coab.velocity.x() + ctb.velocity.x();
}

/**
 * @brief Single-agent scenario starting exactly where the CoAB and CTB
 * velocities cancel: the obstacle sits between the agent and its target sphere.
 */
inline json antipodal_deadlock_json(std::uint64_t seed, const DeadlockGeometry& g = {}) {
    json j = {
        {"name", "antipodal_deadlock"},
        {"seed", seed},
        {"dt_s", 1e-3},
        {"duration_s", g.duration_s},
        {"sample_every", 10},
        {"agents", json::array({{{"x0_m", {g.obstacle_x_m + 1.0, 0.0, 0.0}},
                                 {"v0_mps", {0.0, 0.0, 0.0}},
                                 {"estimate0_m", {0.0, 0.0, 0.0}},
                                 {"dynamics", "none"}}})},
        {"graph", {{"kind", "edges"}, {"edges", json::array()}, {"leader_access", {1}}}},
        {"leader", {{"base_m", {0.0, 0.0, 0.0}}}},
        {"obstacles", json::array({{{"base_m", {g.obstacle_x_m, 0.0, 0.0}}}})},
        {"coab",
         {{"d_m", g.d_m}, {"sensing_range_m", 10.0}, {"lambda_robust", 0.01}, {"lambda_min", g.lambda_min}}},
        {"task", {{"mode", "flexible_distance"}, {"d_i0_m", g.d_i0_m}, {"lambda_f", 1.0}}},
        {"estimator", {{"K1", 0.4}, {"K2", 0.6}, {"K3", 1.0}, {"r3", 6}, {"r4", 5}, {"r5", 3}, {"r6", 5}}},
        {"control",
         {{"k1", {{"k0", 0.1}, {"kM", 100.0}, {"c_per_s", 0.01}, {"T0_s", 330.0}}},
          {"k2", {{"k0", 0.1}, {"kM", 100.0}, {"c_per_s", 0.01}, {"T0_s", 330.0}}},
          {"gamma1", 1.1},
          {"gamma2", 0.5},
          {"boundary_layer", 0.5},
          {"layer_per_delta", 0.3}}},
        {"clik", {{"K", 1.0}, {"filter_bandwidth_radps", 50.0}}},
        {"escape", {{"delta_d_mps", 0.05}, {"eps_lm_mps", 1e-4}, {"hold_s", 1.0}, {"policy", "random"}}},
    };
    const auto cfg = parse_scenario(j);
    double lo = 1e-6, hi = g.d_m * (1.0 - 1e-9);
    if (!(deadlock_residual(lo, g, cfg) > 0.0 && deadlock_residual(hi, g, cfg) < 0.0))
        throw ConfigError("deadlock: velocities do not cancel inside the repulsive zone");
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (deadlock_residual(mid, g, cfg) > 0.0 ? lo : hi) = mid;
    }
    j["agents"][0]["x0_m"] = {g.obstacle_x_m + 0.5 * (lo + hi), 0.0, 0.0};
    return j;
}

struct EscapeLiveness {
    std::optional<double> trigger_t;
    std::optional<double> exit_t;       // first sample after the trigger with ||v_io + v_if|| > eps_lm
    std::optional<double> leave_zone_t;  // first sample outside the repulsive zone
    double min_distance_after_leave = HUGE_VAL;
    double final_task_error = HUGE_VAL;  // max | ||x - xh|| - d_i0 | over the trailing window
    bool exited_in_time = false;
    bool coab_ok = false;
    bool ctb_ok = false;
    bool pass() const { return exited_in_time && coab_ok && ctb_ok; }
};

inline EscapeLiveness escape_liveness(const std::vector<SampleRow>& rows, const ScenarioConfig& cfg,
                                      double exit_window_s = 2.0, double trailing_s = 2.0) {
    EscapeLiveness out;
    const double end = rows.empty() ? 0.0 : rows.back().t;
    const double d_safe = cfg.d_tilde() - 0.02;
    for (const auto& r : rows) {
        if (!out.trigger_t && r.escape_active) out.trigger_t = r.t;
        if (out.trigger_t && !out.exit_t && r.lm_gap > cfg.escape.eps_lm) out.exit_t = r.t;
        if (!out.leave_zone_t && r.nearest > cfg.d_m) out.leave_zone_t = r.t;
        if (out.leave_zone_t) out.min_distance_after_leave = std::min(out.min_distance_after_leave, r.nearest);
        if (r.t >= end - trailing_s) {
            const double e = std::abs((r.pos - r.est).norm() - cfg.d_i0_m);
            out.final_task_error = out.final_task_error == HUGE_VAL ? e : std::max(out.final_task_error, e);
        }
    }
    out.exited_in_time = out.trigger_t && out.exit_t && *out.exit_t - *out.trigger_t <= exit_window_s;
    out.coab_ok = out.leave_zone_t && out.min_distance_after_leave >= d_safe;
    out.ctb_ok = out.final_task_error <= cfg.verify.settle_threshold_m;
    return out;
}

}  // namespace nsb
