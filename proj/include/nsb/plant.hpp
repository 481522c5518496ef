#pragma once

#include "nsb/core.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nsb {

enum class Wave { Sin, Cos, Tanh };

inline double apply_wave(Wave w, double x) {
    switch (w) {
        case Wave::Sin: return std::sin(x);
        case Wave::Cos: return std::cos(x);
        case Wave::Tanh: return std::tanh(x);
    }
    return 0.0;
}

inline Vec3 apply_wave(Wave w, const Vec3& v) { return {apply_wave(w, v.x()), apply_wave(w, v.y()), apply_wave(w, v.z())}; }

/// f = gain * ||scaled state|| * wave(argument state), componentwise in the argument.
struct UncertaintySpec {
    enum class Source { Position, Velocity };
    double gain = 0.0;
    Source norm_of = Source::Position;
    Source argument = Source::Velocity;
    Wave wave = Wave::Sin;

    Vec3 operator()(const Vec3& x1, const Vec3& x2) const {
        const Vec3& n = norm_of == Source::Position ? x1 : x2;
        const Vec3& a = argument == Source::Position ? x1 : x2;
        return gain * n.norm() * apply_wave(wave, a);
    }
};

/// d = gain * ||scale * x1|| * [w1(f1 t), w2(f2 t), w3(f3 t)].
struct DisturbanceSpec {
    double gain = 0.0;
    double scale = 0.0;
    std::array<Wave, 3> waves{Wave::Sin, Wave::Sin, Wave::Cos};
    std::array<double, 3> freqs{0.5, 0.7, 0.5};

    Vec3 operator()(const Vec3& x1, double t) const {
        const double m = gain * (scale * x1).norm();
        return {m * apply_wave(waves[0], freqs[0] * t), m * apply_wave(waves[1], freqs[1] * t),
                m * apply_wave(waves[2], freqs[2] * t)};
    }
};

struct AgentDynamics {
    UncertaintySpec f;
    DisturbanceSpec d;
};

struct StateRate {
    Vec3 dx1 = Vec3::Zero();
    Vec3 dx2 = Vec3::Zero();
};

inline StateRate dynamics_rhs(const Vec3& x1, const Vec3& x2, const Vec3& u, double t, const AgentDynamics& dyn) {
    return {x2, u + dyn.f(x1, x2) + dyn.d(x1, t)};
}

/// Uncertainty and disturbance catalog of the six-agent experiments (agent index 0..5).
inline AgentDynamics catalog_dynamics(std::size_t i) {
    using S = UncertaintySpec::Source;
    static const std::array<UncertaintySpec, 6> f{{
        {0.1, S::Position, S::Velocity, Wave::Sin},
        {0.1, S::Position, S::Velocity, Wave::Tanh},
        {0.1, S::Velocity, S::Position, Wave::Sin},
        {0.1, S::Velocity, S::Position, Wave::Tanh},
        {0.1, S::Position, S::Velocity, Wave::Sin},
        {0.1, S::Position, S::Velocity, Wave::Sin},
    }};
    static const std::array<DisturbanceSpec, 6> d{{
        {0.5, 0.02, {Wave::Sin, Wave::Sin, Wave::Cos}, {0.5, 0.7, 0.5}},
        {0.5, 0.03, {Wave::Sin, Wave::Tanh, Wave::Cos}, {0.5, 0.7, 0.5}},
        {0.5, 0.02, {Wave::Tanh, Wave::Sin, Wave::Cos}, {0.5, 0.7, 0.5}},
        {0.5, 0.02, {Wave::Cos, Wave::Sin, Wave::Tanh}, {0.5, 0.7, 0.5}},
        {0.5, 0.04, {Wave::Tanh, Wave::Sin, Wave::Cos}, {0.5, 0.7, 0.5}},
        {0.5, 0.03, {Wave::Sin, Wave::Cos, Wave::Cos}, {0.5, 0.7, 0.5}},
    }};
    if (i >= 6) throw ConfigError("dynamics catalog: only agents 1..6 are defined");
    return {f[i], d[i]};
}

// ---------------------------------------------------------------------------

/// p(t) = base + rate*t + cos_amp*cos(omega t) + sin_amp*sin(omega t).
struct Trajectory {
    Vec3 base = Vec3::Zero();
    Vec3 rate = Vec3::Zero();
    Vec3 cos_amp = Vec3::Zero();
    Vec3 sin_amp = Vec3::Zero();
    double omega = 0.0;

    Vec3 position(double t) const {
        return base + rate * t + cos_amp * std::cos(omega * t) + sin_amp * std::sin(omega * t);
    }
    Vec3 velocity(double t) const {
        return rate - cos_amp * (omega * std::sin(omega * t)) + sin_amp * (omega * std::cos(omega * t));
    }
    /// sup over t of the infinity norm of the velocity.
    double speed_bound_inf() const {
        double m = 0.0;
        for (int k = 0; k < 3; ++k)
            m = std::max(m, std::abs(rate(k)) + std::abs(omega) * std::hypot(cos_amp(k), sin_amp(k)));
        return m;
    }
    double speed_bound() const {
        return rate.norm() + std::abs(omega) * (cos_amp.norm() + sin_amp.norm());
    }
};

/// Moving obstacles of the six-agent experiments (index 0..3).
inline Trajectory catalog_obstacle(std::size_t k) {
    switch (k) {
        case 0: return {Vec3(0, 2, 23), Vec3::Zero(), Vec3(0, -1, 0), Vec3::Zero(), 1.0};
        case 1: return {Vec3(1, -2, 28), Vec3::Zero(), Vec3(0, -1, 0), Vec3::Zero(), 1.0};
        case 2: return {Vec3(-1.5, 0, 10), Vec3::Zero(), Vec3(0, -1, 0), Vec3::Zero(), 1.0};
        case 3: return {Vec3(1, -2, 7), Vec3::Zero(), Vec3(0, -1, 0), Vec3::Zero(), 1.0};
        default: throw ConfigError("obstacle catalog: unknown obstacle id");
    }
}

inline Vec3 obstacle_position(std::size_t k, double t) { return catalog_obstacle(k).position(t); }

struct NearestObject {
    enum class Kind { Obstacle, Agent };
    Kind kind = Kind::Obstacle;
    std::size_t index = 0;
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double distance = 0.0;
};

/**
 * Closest obstacle or other agent within the sensing range. Obstacles are
 * scanned before agents and only a strictly smaller distance replaces the
 * current best, which gives the lowest-index tie rule.
 */
inline std::optional<NearestObject> nearest_object(std::size_t i, std::span<const Vec3> agent_pos,
                                                   std::span<const Vec3> agent_vel, std::span<const Vec3> obs_pos,
                                                   std::span<const Vec3> obs_vel, double sensing_range) {
    std::optional<NearestObject> best;
    const Vec3& x = agent_pos[i];
    const auto consider = [&](NearestObject::Kind kind, std::size_t k, const Vec3& p, const Vec3& v) {
        const double dist = (x - p).norm();
        if (dist > sensing_range) return;
        if (!best || dist < best->distance) best = NearestObject{kind, k, p, v, dist};
    };
    for (std::size_t k = 0; k < obs_pos.size(); ++k) consider(NearestObject::Kind::Obstacle, k, obs_pos[k], obs_vel[k]);
    for (std::size_t k = 0; k < agent_pos.size(); ++k)
        if (k != i) consider(NearestObject::Kind::Agent, k, agent_pos[k], agent_vel[k]);
    return best;
}

/// Reference velocity of the desired position: vd plus drift feedback toward x.
inline Vec3 clik_rate(const Vec3& xd, const Vec3& vd, const Vec3& x, double k_clik) { return vd + k_clik * (x - xd); }

inline Vec3 clik_step(const Vec3& xd, const Vec3& vd, const Vec3& x, double k_clik, double dt) {
    if (!(dt > 0.0)) throw PreconditionError("clik_step: dt must be positive");
    return xd + dt * clik_rate(xd, vd, x, k_clik);
}

/// First-order low-pass on the commanded velocity; a zero bandwidth passes the command through.
struct ReferenceFilter {
    double bandwidth = 0.0;  // rad/s
    Vec3 v = Vec3::Zero();

    Vec3 output(const Vec3& cmd) const { return bandwidth > 0.0 ? v : cmd; }
    Vec3 rate(const Vec3& cmd) const { return bandwidth > 0.0 ? Vec3(bandwidth * (cmd - v)) : Vec3::Zero(); }
    /// Exact zero-order-hold update over dt.
    void advance(const Vec3& cmd, double dt) {
        if (bandwidth > 0.0) v += (1.0 - std::exp(-bandwidth * dt)) * (cmd - v);
        else v = cmd;
    }
};

struct AgentState {
    Vec3 x1 = Vec3::Zero();
    Vec3 x2 = Vec3::Zero();
};

struct NumericalFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One RK4 step of one agent with the control held over the step.
inline AgentState rk4_step(const AgentState& s, const Vec3& u, double t, double dt, const AgentDynamics& dyn) {
    const auto k1 = dynamics_rhs(s.x1, s.x2, u, t, dyn);
    const auto k2 = dynamics_rhs(s.x1 + 0.5 * dt * k1.dx1, s.x2 + 0.5 * dt * k1.dx2, u, t + 0.5 * dt, dyn);
    const auto k3 = dynamics_rhs(s.x1 + 0.5 * dt * k2.dx1, s.x2 + 0.5 * dt * k2.dx2, u, t + 0.5 * dt, dyn);
    const auto k4 = dynamics_rhs(s.x1 + dt * k3.dx1, s.x2 + dt * k3.dx2, u, t + dt, dyn);
    AgentState out;
    out.x1 = s.x1 + dt / 6.0 * (k1.dx1 + 2.0 * k2.dx1 + 2.0 * k3.dx1 + k4.dx1);
    out.x2 = s.x2 + dt / 6.0 * (k1.dx2 + 2.0 * k2.dx2 + 2.0 * k3.dx2 + k4.dx2);
    return out;
}

/// Advances every agent under zero-order-hold controls; throws on a non-finite result.
inline std::vector<AgentState> integrate_step(std::span<const AgentState> agents, std::span<const Vec3> controls,
                                              std::span<const AgentDynamics> dyn, double t, double dt) {
    if (!(dt > 0.0)) throw PreconditionError("integrate_step: dt must be positive");
    std::vector<AgentState> out(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
        out[i] = rk4_step(agents[i], controls[i], t, dt, dyn[i]);
        if (!out[i].x1.allFinite() || !out[i].x2.allFinite())
            throw NumericalFault("integrate_step: non-finite state for agent " + std::to_string(i + 1) + " at t=" +
                                 std::to_string(t));
    }
    return out;
}

}  // namespace nsb
