#pragma once

#include "nsb/behaviors.hpp"
#include "nsb/composer.hpp"
#include "nsb/controller.hpp"
#include "nsb/core.hpp"
#include "nsb/estimator.hpp"
#include "nsb/plant.hpp"
#include "nsb/scenario_config.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nsb {

/// Distributed estimator bank advanced by explicit Euler substeps.
class EstimatorBank {
public:
    EstimatorBank(const CommGraph& g, const EstimatorConfig& cfg, const Trajectory& leader, std::vector<Vec3> est0)
        : g_(g), cfg_(cfg), leader_(leader), est_(std::move(est0)), rate_(est_.size(), Vec3::Zero()) {}

    const std::vector<Vec3>& estimates() const { return est_; }

    /// Derivatives at time t from purely local reads.
    std::vector<Vec3> derivatives(double t) const {
        const Vec3 xo = leader_.position(t);
        std::vector<Vec3> d(est_.size());
        for (std::size_t i = 0; i < est_.size(); ++i)
            d[i] = estimator_derivative(LocalView(g_, i, est_, &xo), cfg_);
        return d;
    }

    /// Advances over [t, t+dt] in `substeps` pieces; returns the mean rate over the interval.
    const std::vector<Vec3>& advance(double t, double dt, int substeps) {
        const double h = dt / substeps;
        const std::vector<Vec3> start = est_;
        for (int s = 0; s < substeps; ++s) {
            const auto d = derivatives(t + s * h);
            for (std::size_t i = 0; i < est_.size(); ++i) est_[i] += h * d[i];
        }
        for (std::size_t i = 0; i < est_.size(); ++i) rate_[i] = (est_[i] - start[i]) / dt;
        return rate_;
    }

    double max_error(double t) const {
        const Vec3 xo = leader_.position(t);
        double m = 0.0;
        for (const auto& e : est_) m = std::max(m, (e - xo).norm());
        return m;
    }

private:
    CommGraph g_;
    EstimatorConfig cfg_;
    Trajectory leader_;
    std::vector<Vec3> est_;
    std::vector<Vec3> rate_;
};

/// One logged sample for one agent.
struct SampleRow {
    double t = 0.0;
    std::size_t agent = 0;  // 1-based
    Vec3 pos, vel, est, xd;
    double s_norm = 0.0;
    Vec3 u;
    double nearest = std::numeric_limits<double>::infinity();
    bool coab_active = false;
    bool escape_active = false;
    Vec3 vref, S, leader;
    double rho_tilde_io = 0.0, rho_tilde_if = 0.0;
    double lambda_io = 0.0, lambda_star = 0.0;
    double delta_hat = 0.0;
    bool coab_poly = false, ctb_poly = false, surface_poly = false;
    int nearest_kind = -1;  // -1 none, 0 obstacle, 1 agent
    int nearest_index = -1;
    double lm_gap = std::numeric_limits<double>::infinity();  // ||v_io + v_if|| while CoAB is active
};

struct AgentRuntime {
    AgentState state;
    Vec3 xd = Vec3::Zero();
    Vec3 vref_prev = Vec3::Zero();
    bool has_prev = false;
    AdaptiveState adaptive;
    EscapeState escape;
    EscapeRng rng;
    Vec3 alpha_s = Vec3::Zero();
    ReferenceFilter filter;
};

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg),
          bank_(cfg.graph, cfg.estimator, cfg.leader, initial_estimates(cfg)),
          steps_(static_cast<long long>(std::llround(cfg.duration_s / cfg.dt_s))) {
        for (std::size_t i = 0; i < cfg.n(); ++i) {
            AgentRuntime a;
            a.state = {cfg.agents[i].x0, cfg.agents[i].v0};
            a.xd = cfg.agents[i].x0 + cfg.agents[i].xd_offset;
            a.adaptive = AdaptiveState::make(cfg.rbf.size(), cfg.delta_hat0, cfg.gamma_scale, cfg.gamma3);
            a.rng = EscapeRng(cfg.seed * 0x9E3779B97F4A7C15ull + i);
            a.filter = {cfg.reference_bandwidth, cfg.agents[i].v0};
            agents_.push_back(std::move(a));
            dyn_.push_back(cfg.agents[i].dyn);
        }
    }

    long long total_steps() const { return steps_; }
    long long step_index() const { return k_; }
    double time() const { return static_cast<double>(k_) * cfg_.dt_s; }
    bool done() const { return k_ > steps_ || steps_ == 0; }
    const std::vector<AgentRuntime>& agents() const { return agents_; }
    const EstimatorBank& estimator() const { return bank_; }
    const std::vector<SampleRow>& last_rows() const { return rows_; }
    int escape_triggers() const {
        int n = 0;
        for (const auto& a : agents_) n += a.escape.triggers;
        return n;
    }

    /// Evaluates the loop at the current time and, unless this is the final sample, integrates one step.
    void step() {
        const double t = time();
        const double dt = cfg_.dt_s;
        const std::size_t n = cfg_.n();
        const Vec3 xo = cfg_.leader.position(t);
        const std::vector<Vec3> est = bank_.estimates();
        const bool last = k_ == steps_;

        rows_.assign(n, SampleRow{});
        if (cfg_.estimator_only) {
            for (std::size_t i = 0; i < n; ++i) fill_passive(rows_[i], i, t, est[i], xo);
            if (!last) bank_.advance(t, dt, cfg_.estimator_substeps);
            ++k_;
            return;
        }

        const std::vector<Vec3> est_rate = bank_.advance(t, dt, cfg_.estimator_substeps);

        std::vector<Vec3> pos(n), vel(n);
        for (std::size_t i = 0; i < n; ++i) {
            pos[i] = agents_[i].state.x1;
            vel[i] = agents_[i].state.x2;
        }
        std::vector<Vec3> opos, ovel;
        for (const auto& o : cfg_.obstacles) {
            opos.push_back(o.position(t));
            ovel.push_back(o.velocity(t));
        }

        std::vector<Vec3> controls(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& a = agents_[i];
            auto& row = rows_[i];
            const Vec3 x = a.state.x1, v = a.state.x2;
            const auto& p = cfg_.fttsm;

            const auto task = cfg_.task(i);
            Vec3 r_f = x - est[i];
            if (task.mode == CtbTask::Mode::FixedRelativePosition) r_f -= task.offset;
            const double rtf_dot = -r_f.dot(v - est_rate[i]);
            const auto ctb = ctb_evaluate(x, est[i], est_rate[i], task, p, rtf_dot);

            const auto near = nearest_object(i, pos, vel, opos, ovel, cfg_.sensing_range_m);
            MergedVelocity merged;
            merged.velocity = ctb.velocity;
            CoabOutput coab;
            LambdaStar ls;
            if (near) {
                const Vec3 r_o = x - near->position;
                const double rto_dot = -r_o.dot(v - near->velocity);
                coab = coab_evaluate(x, near->position, near->velocity, cfg_.d_m, 1.0, p, rto_dot);
                double lambda = cfg_.lambda_min;
                if (coab.active) {
                    ls = lambda_star(coab.jacobian_pinv.norm(), coab.alpha.value, v, x - a.xd, a.alpha_s,
                                     cfg_.sliding.c1, cfg_.sliding.c2, cfg_.lambda_min);
                    lambda = std::max(ls.lambda + cfg_.lambda_robust, cfg_.lambda_min);
                    if (cfg_.enforce_offline_bounds) lambda = std::max(lambda, offline_lambda_);
                    coab = coab_evaluate(x, near->position, near->velocity, cfg_.d_m, lambda, p, rto_dot);
                }
                merged = merge(coab.velocity, ctb.velocity, coab.jacobian, coab.active, cfg_.escape, a.escape, a.rng, t,
                               x, near->position);
                merged.lambda_io = coab.active ? lambda : 0.0;
                row.nearest = near->distance;
                row.nearest_kind = near->kind == NearestObject::Kind::Obstacle ? 0 : 1;
                row.nearest_index = static_cast<int>(near->index) + 1;
            } else if (a.escape.holding && t >= a.escape.until) {
                a.escape.holding = false;
            }

            const Vec3 vref = clik_rate(a.xd, a.filter.output(merged.velocity), x, cfg_.k_clik);
            const Vec3 xt1 = x - a.xd;
            const Vec3 xt2 = v - vref;
            const auto surf = sliding_surface(xt1, xt2, xt2, cfg_.sliding);
            Vec3 xdd = Vec3::Zero();
            if (a.filter.bandwidth > 0.0) {
                xdd = a.filter.rate(merged.velocity) + cfg_.k_clik * xt2;
            } else if (a.has_prev) {
                xdd = (vref - a.vref_prev) / dt;
            }
            const VecX phi = rbf_features(feature_vector(x, v, xdd, xt2, surf.alpha_dot), cfg_.rbf);
            const double delta_hat = a.adaptive.delta_hat;
            const auto ctl = control_step(surf.S, phi, t, a.adaptive, cfg_.law, last ? 0.0 : dt);
            controls[i] = ctl.u;

            row.t = t;
            row.agent = i + 1;
            row.pos = x;
            row.vel = v;
            row.est = est[i];
            row.xd = a.xd;
            row.s_norm = surf.S.norm();
            row.u = ctl.u;
            row.coab_active = near && coab.active;
            row.escape_active = merged.escape_active;
            row.vref = vref;
            row.S = surf.S;
            row.leader = xo;
            row.rho_tilde_io = near ? coab.rho_tilde : 0.0;
            row.rho_tilde_if = ctb.rho_tilde;
            row.lambda_io = merged.lambda_io;
            row.lambda_star = row.coab_active ? ls.lambda : 0.0;
            row.delta_hat = delta_hat;
            row.coab_poly = row.coab_active && coab.alpha.poly_branch;
            row.ctb_poly = ctb.alpha.poly_branch;
            row.surface_poly = surf.poly[0] || surf.poly[1] || surf.poly[2];
            if (row.coab_active) row.lm_gap = (coab.velocity + ctb.velocity).norm();

            a.alpha_s = surf.alpha;
            a.vref_prev = vref;
            a.has_prev = true;
            if (!last) {
                a.xd = a.xd + dt * vref;
                a.filter.advance(merged.velocity, dt);
            }
        }

        if (!last) {
            std::vector<AgentState> states(n);
            for (std::size_t i = 0; i < n; ++i) states[i] = agents_[i].state;
            const auto next = integrate_step(states, controls, dyn_, t, dt);
            for (std::size_t i = 0; i < n; ++i) agents_[i].state = next[i];
        }
        ++k_;
    }

    void set_offline_lambda(double l) { offline_lambda_ = l; }

private:
    static std::vector<Vec3> initial_estimates(const ScenarioConfig& c) {
        std::vector<Vec3> e;
        for (const auto& a : c.agents) e.push_back(a.est0);
        return e;
    }

    void fill_passive(SampleRow& row, std::size_t i, double t, const Vec3& est, const Vec3& xo) const {
        row.t = t;
        row.agent = i + 1;
        row.pos = agents_[i].state.x1;
        row.vel = agents_[i].state.x2;
        row.est = est;
        row.xd = agents_[i].xd;
        row.leader = xo;
        row.delta_hat = agents_[i].adaptive.delta_hat;
    }

    ScenarioConfig cfg_;
    EstimatorBank bank_;
    long long steps_ = 0;
    long long k_ = 0;
    std::vector<AgentRuntime> agents_;
    std::vector<AgentDynamics> dyn_;
    std::vector<SampleRow> rows_;
    double offline_lambda_ = 0.0;
};

}  // namespace nsb
