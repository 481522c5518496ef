#pragma once

#include "nsb/behaviors.hpp"
#include "nsb/composer.hpp"
#include "nsb/controller.hpp"
#include "nsb/core.hpp"
#include "nsb/estimator.hpp"
#include "nsb/plant.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace nsb {

using json = nlohmann::json;

/// Load failure carrying every constraint violation found.
struct ScenarioError : std::runtime_error {
    std::vector<std::string> violations;
    explicit ScenarioError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "scenario rejected:";
        for (const auto& m : v) s += "\n  - " + m;
        return s;
    }
};

struct AgentInit {
    Vec3 x0 = Vec3::Zero();
    Vec3 v0 = Vec3::Zero();
    Vec3 est0 = Vec3::Zero();
    Vec3 xd_offset = Vec3::Zero();  // initial reference minus initial position
    AgentDynamics dyn;
};

struct VerifyParams {
    double gamma_f = 1.0;
    double gamma_eps = 0.1;
    double lambda_iv = 0.1;
    double gamma_io = 0.0;  // 0 selects the smallest admissible weight
    double L0 = 0.0;        // bound on initial task errors; 0 leaves dependent bounds not applicable
    double settle_threshold_m = 0.02;
    double delta_s = 100.0;
    double c1_tilde = 1.0, c2_tilde = 0.1, beta1_tilde = 0.3, beta2_tilde = 0.3;
    double estimator_tolerance_m = 1e-3;
    std::vector<double> ie_times_s{20.0, 45.0};
    double reaching_share = 0.5;   // share of the reaching decrease required by the V_S monitor
    double ve_floor = 1e-6;        // V_e below this is treated as converged
    double monitor_tolerance = 1e-3;
    int harness_substeps = 16;
    double harness_margin_s = 20.0;
};

struct ScenarioConfig {
    std::string name = "unnamed";
    std::uint64_t seed = 1;
    double dt_s = 1e-3;
    double duration_s = 45.0;
    int sample_every = 10;
    bool estimator_only = false;

    std::vector<AgentInit> agents;
    CommGraph graph;
    Trajectory leader;
    std::vector<Trajectory> obstacles;

    CtbTask::Mode mode = CtbTask::Mode::FlexibleDistance;
    double d_i0_m = 3.0;
    std::vector<Vec3> offsets_m;
    double lambda_f = 1.0;

    double d_m = 2.0;
    double sensing_range_m = 10.0;
    double lambda_robust = 0.01;
    double lambda_min = 0.01;
    bool enforce_offline_bounds = false;

    FttsmParams fttsm;
    EstimatorConfig estimator;
    int estimator_substeps = 10;
    SlidingParams sliding;
    ControlLaw law;
    RbfNetwork rbf;
    double gamma_scale = 1.0;
    double gamma3 = 1.0;
    double delta_hat0 = 0.1;
    EscapeConfig escape;
    double k_clik = 1.0;
    double reference_bandwidth = 0.0;
    VerifyParams verify;

    json source;

    std::size_t n() const { return agents.size(); }

    CtbTask task(std::size_t i) const {
        CtbTask t;
        t.mode = mode;
        t.d_i0 = d_i0_m;
        t.lambda_f = lambda_f;
        if (mode == CtbTask::Mode::FixedRelativePosition) t.offset = offsets_m.at(i);
        return t;
    }

    double d_tilde() const { return std::sqrt(d_m * d_m - 2.0 * fttsm.phi_s); }
};

namespace detail {

inline Vec3 vec3(const json& j, const char* key, const Vec3& fallback = Vec3::Zero()) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("field ") + key + " must be a 3-vector");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Trajectory trajectory(const json& j) {
    Trajectory t;
    t.base = vec3(j, "base_m");
    t.rate = vec3(j, "rate_mps");
    t.cos_amp = vec3(j, "cos_amp_m");
    t.sin_amp = vec3(j, "sin_amp_m");
    t.omega = j.value("omega_radps", 0.0);
    return t;
}

inline Wave wave(const std::string& s) {
    if (s == "sin") return Wave::Sin;
    if (s == "cos") return Wave::Cos;
    if (s == "tanh") return Wave::Tanh;
    throw ConfigError("unknown wave '" + s + "'");
}

inline UncertaintySpec::Source source(const std::string& s) {
    if (s == "position") return UncertaintySpec::Source::Position;
    if (s == "velocity") return UncertaintySpec::Source::Velocity;
    throw ConfigError("unknown state source '" + s + "'");
}

inline AgentDynamics dynamics(const json& j, std::size_t i) {
    if (!j.contains("dynamics")) return {};
    const auto& d = j.at("dynamics");
    if (d.is_string()) {
        const auto s = d.get<std::string>();
        if (s == "none") return {};
        if (s.rfind("catalog:", 0) == 0) return catalog_dynamics(std::stoul(s.substr(8)) - 1);
        if (s == "catalog") return catalog_dynamics(i);
        throw ConfigError("unknown dynamics tag '" + s + "'");
    }
    AgentDynamics out;
    if (d.contains("f")) {
        const auto& f = d.at("f");
        out.f.gain = f.value("gain", 0.0);
        out.f.norm_of = source(f.value("norm_of", "position"));
        out.f.argument = source(f.value("argument", "velocity"));
        out.f.wave = wave(f.value("wave", "sin"));
    }
    if (d.contains("d")) {
        const auto& dd = d.at("d");
        out.d.gain = dd.value("gain", 0.0);
        out.d.scale = dd.value("scale", 0.0);
        const auto w = dd.value("waves", std::vector<std::string>{"sin", "sin", "cos"});
        const auto fr = dd.value("freqs_radps", std::vector<double>{0.5, 0.7, 0.5});
        if (w.size() != 3 || fr.size() != 3) throw ConfigError("disturbance waves and freqs need three entries");
        for (int k = 0; k < 3; ++k) {
            out.d.waves[static_cast<std::size_t>(k)] = wave(w[static_cast<std::size_t>(k)]);
            out.d.freqs[static_cast<std::size_t>(k)] = fr[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

inline GainSchedule schedule(const json& j) {
    GainSchedule g;
    g.k0 = j.value("k0", 0.1);
    if (j.contains("segments")) {
        for (const auto& s : j.at("segments"))
            g.segments.push_back({s.value("kM", 100.0), s.value("c_per_s", 0.01), s.value("T0_s", 0.0),
                                  s.value("zeta", 1), s.value("zeta0", 0)});
    } else {
        g.segments.push_back({j.value("kM", 100.0), j.value("c_per_s", 0.01), j.value("T0_s", 0.0), 1, 0});
    }
    return g;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline std::string config_hash(const json& j) {
    std::ostringstream os;
    os << std::hex << detail::fnv1a(j.dump());
    return os.str();
}

/// Collects every constraint violation rather than stopping at the first.
inline std::vector<std::string> validate_scenario(const ScenarioConfig& c) {
    std::vector<std::string> errs;
    const auto check = [&](const char* module, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            errs.push_back(std::string(module) + ": " + e.what());
        }
    };
    check("scenario", [&] {
        if (c.agents.empty()) throw ConfigError("at least one agent is required");
        if (!(c.dt_s > 0.0)) throw ConfigError("dt_s must be positive");
        if (!(c.duration_s >= 0.0)) throw ConfigError("duration_s must be nonnegative");
        if (c.sample_every < 1) throw ConfigError("sample_every must be at least 1");
        if (c.graph.size() != c.agents.size()) throw ConfigError("graph size must equal agent count");
    });
    check("behaviors", [&] { c.fttsm.validate(); });
    check("behaviors", [&] {
        if (!(c.d_m > 0.0)) throw ConfigError("d_m must be positive");
        if (!(c.fttsm.phi_s <= 0.5 * c.d_m * c.d_m)) throw ConfigError("phi_s must not exceed d^2/2");
        if (!(c.sensing_range_m >= c.d_m)) throw ConfigError("sensing range must cover the repulsive zone");
        for (std::size_t i = 0; i < c.agents.size(); ++i) {
            if (c.mode == CtbTask::Mode::FixedRelativePosition && c.offsets_m.size() != c.agents.size())
                throw ConfigError("fixed mode needs one offset per agent");
            c.task(i).validate(c.fttsm);
        }
    });
    check("estimator", [&] {
        c.estimator.validate();
        if (c.estimator_substeps < 1) throw ConfigError("estimator substeps must be at least 1");
        const double sup = c.leader.speed_bound_inf();
        if (!(c.estimator.K3 >= sup))
            throw ConfigError("K3 must bound the leader speed (sup |x_o'|_inf = " + std::to_string(sup) + ")");
    });
    check("core", [&] { (void)build_h_matrix(c.graph); });
    check("controller", [&] {
        c.sliding.validate();
        c.law.validate(c.duration_s);
        if (c.rbf.size() == 0) throw ConfigError("RBF network needs at least one neuron");
        for (auto w : c.rbf.widths)
            if (!(w > 0.0)) throw ConfigError("RBF widths must be positive");
        if (!(c.gamma_scale > 0.0 && c.gamma3 > 0.0)) throw ConfigError("adaptation gains must be positive");
        if (!(c.delta_hat0 >= 0.0)) throw ConfigError("delta_hat0 must be nonnegative");
    });
    check("composer", [&] {
        c.escape.validate();
        if (!(c.lambda_robust > 0.0)) throw ConfigError("lambda_robust must be positive");
        if (!(c.lambda_min > 0.0)) throw ConfigError("lambda_min must be positive");
    });
    check("verify", [&] {
        const auto& v = c.verify;
        if (!(v.gamma_f > 0 && v.gamma_eps > 0 && v.lambda_iv > 0)) throw ConfigError("gamma_f, gamma_eps, lambda_iv must be positive");
        if (!(v.gamma_io >= 0 && v.L0 >= 0)) throw ConfigError("gamma_io and L0 must be nonnegative");
        if (v.L0 > 0 && !(c.fttsm.phi_s < v.L0)) throw ConfigError("phi_s must be below L0");
        if (!(v.settle_threshold_m > 0 && v.delta_s > 0)) throw ConfigError("thresholds must be positive");
        if (!(v.reaching_share > 0 && v.reaching_share < 1)) throw ConfigError("reaching_share must lie in (0,1)");
        if (!(v.c1_tilde > 0 && v.c1_tilde < c.sliding.c1 && v.c2_tilde > 0 && v.c2_tilde < c.sliding.c2 &&
              v.beta1_tilde > 0 && v.beta1_tilde < c.fttsm.beta1 && v.beta2_tilde > 0 && v.beta2_tilde < c.fttsm.beta2))
            throw ConfigError("tilde coefficients must lie strictly between 0 and their nominal values");
        if (v.harness_substeps < 1 || !(v.harness_margin_s > 0)) throw ConfigError("harness settings must be positive");
    });
    check("plant", [&] {
        if (!(c.k_clik >= 0.0)) throw ConfigError("CLIK gain must be nonnegative");
        if (!(c.reference_bandwidth >= 0.0)) throw ConfigError("reference bandwidth must be nonnegative");
        for (const auto& a : c.agents)
            if (!a.x0.allFinite() || !a.v0.allFinite() || !a.est0.allFinite() || !a.xd_offset.allFinite())
                throw ConfigError("initial states must be finite");
    });
    return errs;
}

inline ScenarioConfig parse_scenario(const json& j) {
    ScenarioConfig c;
    c.source = j;
    c.name = j.value("name", "unnamed");
    c.seed = j.value("seed", std::uint64_t{1});
    c.dt_s = j.value("dt_s", 1e-3);
    c.duration_s = j.value("duration_s", 45.0);
    c.sample_every = j.value("sample_every", 10);
    c.estimator_only = j.value("estimator_only", false);

    const auto& ag = j.at("agents");
    for (std::size_t i = 0; i < ag.size(); ++i) {
        AgentInit a;
        a.x0 = detail::vec3(ag[i], "x0_m");
        a.v0 = detail::vec3(ag[i], "v0_mps");
        a.est0 = detail::vec3(ag[i], "estimate0_m");
        a.xd_offset = detail::vec3(ag[i], "xd_offset_m");
        a.dyn = detail::dynamics(ag[i], i);
        c.agents.push_back(a);
    }

    const auto& g = j.at("graph");
    std::vector<std::size_t> access;
    for (auto k : g.at("leader_access").get<std::vector<std::size_t>>()) access.push_back(k - 1);
    if (g.value("kind", "edges") == "ring") {
        c.graph = CommGraph::ring(c.agents.size(), access);
    } else {
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : g.at("edges")) edges.emplace_back(e[0].get<std::size_t>() - 1, e[1].get<std::size_t>() - 1);
        c.graph = CommGraph::from_edges(c.agents.size(), edges, access);
    }

    c.leader = detail::trajectory(j.at("leader"));
    if (j.contains("obstacles"))
        for (const auto& o : j.at("obstacles")) c.obstacles.push_back(detail::trajectory(o));

    if (j.contains("task")) {
        const auto& t = j.at("task");
        const auto mode = t.value("mode", "flexible_distance");
        if (mode == "flexible_distance") {
            c.mode = CtbTask::Mode::FlexibleDistance;
        } else if (mode == "fixed_relative_position") {
            c.mode = CtbTask::Mode::FixedRelativePosition;
        } else {
            throw ConfigError("unknown task mode '" + mode + "'");
        }
        c.d_i0_m = t.value("d_i0_m", 3.0);
        c.lambda_f = t.value("lambda_f", 1.0);
        if (t.contains("offsets_m"))
            for (const auto& o : t.at("offsets_m")) c.offsets_m.emplace_back(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
        if (t.value("triangle_offsets", false)) {
            const auto tri = triangle_offsets(t.value("triangle_d_m", 1.0));
            c.offsets_m.assign(tri.begin(), tri.end());
        }
    }

    if (j.contains("coab")) {
        const auto& o = j.at("coab");
        c.d_m = o.value("d_m", 2.0);
        c.sensing_range_m = o.value("sensing_range_m", 10.0);
        c.lambda_robust = o.value("lambda_robust", 0.01);
        c.lambda_min = o.value("lambda_min", 0.01);
        c.enforce_offline_bounds = o.value("enforce_offline_bounds", false);
    }
    if (j.contains("fttsm")) {
        const auto& f = j.at("fttsm");
        c.fttsm.beta1 = f.value("beta1", 0.6);
        c.fttsm.beta2 = f.value("beta2", 0.6);
        c.fttsm.c0 = f.value("c0", 1.0);
        c.fttsm.phi_s = f.value("phi_s", 0.01);
        c.fttsm.r0 = f.value("r0", 0.9);
        c.fttsm.r1 = f.value("r1", 1.2);
        c.fttsm.r2 = f.value("r2", 0.6);
        c.fttsm.eps_sigma = f.value("eps_sigma", 1e-9);
    }
    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        c.estimator.K1 = e.value("K1", 0.4);
        c.estimator.K2 = e.value("K2", 0.6);
        c.estimator.K3 = e.value("K3", 1.0);
        c.estimator.r3 = e.value("r3", 6.0);
        c.estimator.r4 = e.value("r4", 5.0);
        c.estimator.r5 = e.value("r5", 3.0);
        c.estimator.r6 = e.value("r6", 5.0);
        c.estimator_substeps = e.value("substeps", 10);
    }
    c.sliding.fttsm = c.fttsm;
    if (j.contains("sliding")) {
        const auto& s = j.at("sliding");
        c.sliding.c1 = s.value("c1", 2.0);
        c.sliding.c2 = s.value("c2", 0.2);
        c.sliding.varrho = s.value("varrho", 100.0);
    }
    if (j.contains("control")) {
        const auto& u = j.at("control");
        c.law.k1 = detail::schedule(u.at("k1"));
        c.law.k2 = detail::schedule(u.at("k2"));
        c.law.gamma1 = u.value("gamma1", 1.1);
        c.law.gamma2 = u.value("gamma2", 0.5);
        c.law.boundary_layer = u.value("boundary_layer", 0.0);
        c.law.layer_per_delta = u.value("layer_per_delta", 0.0);
    } else {
        c.law.k1 = GainSchedule::simple(0.1, 100.0, 0.01, 0.0);
        c.law.k2 = c.law.k1;
    }
    {
        const json r = j.value("rbf", json::object());
        c.rbf = RbfNetwork::uniform_diagonal(r.value("neurons", std::size_t{6}), 15, r.value("center_offset", 3.0),
                                             r.value("center_spacing", 1.0), r.value("width", std::sqrt(2.0)));
    }
    if (j.contains("adaptive")) {
        const auto& a = j.at("adaptive");
        c.gamma_scale = a.value("Gamma_scale", 1.0);
        c.gamma3 = a.value("gamma3", 1.0);
        c.delta_hat0 = a.value("delta_hat0", 0.1);
    }
    if (j.contains("escape")) {
        const auto& e = j.at("escape");
        c.escape.delta_d = e.value("delta_d_mps", 0.05);
        c.escape.eps_lm = e.value("eps_lm_mps", 1e-4);
        c.escape.hold_s = e.value("hold_s", 1.0);
        const auto pol = e.value("policy", "random");
        if (pol == "random") {
            c.escape.policy = EscapeConfig::AnglePolicy::RandomSeeded;
        } else if (pol == "fixed") {
            c.escape.policy = EscapeConfig::AnglePolicy::Fixed;
            const Vec3 a = detail::vec3(e, "angles_rad", Vec3(0, 0, 1.5707963267948966));
            c.escape.theta_x = a.x();
            c.escape.theta_y = a.y();
            c.escape.theta_z = a.z();
        } else {
            throw ConfigError("unknown escape policy '" + pol + "'");
        }
    }
    if (j.contains("clik")) {
        c.k_clik = j.at("clik").value("K", 1.0);
        c.reference_bandwidth = j.at("clik").value("filter_bandwidth_radps", 0.0);
    }
    if (j.contains("verify")) {
        const auto& v = j.at("verify");
        c.verify.gamma_f = v.value("gamma_f", 1.0);
        c.verify.gamma_eps = v.value("gamma_eps", 0.1);
        c.verify.lambda_iv = v.value("lambda_iv", 0.1);
        c.verify.gamma_io = v.value("gamma_io", 0.0);
        c.verify.L0 = v.value("L0", 0.0);
        c.verify.reaching_share = v.value("reaching_share", 0.5);
        c.verify.ve_floor = v.value("ve_floor", 1e-6);
        c.verify.monitor_tolerance = v.value("monitor_tolerance", 1e-3);
        c.verify.harness_substeps = v.value("harness_substeps", 16);
        c.verify.harness_margin_s = v.value("harness_margin_s", 20.0);
        c.verify.settle_threshold_m = v.value("settle_threshold_m", 0.02);
        c.verify.delta_s = v.value("delta_s", 50.0);
        c.verify.c1_tilde = v.value("c1_tilde", 1.0);
        c.verify.c2_tilde = v.value("c2_tilde", 0.1);
        c.verify.beta1_tilde = v.value("beta1_tilde", 0.3);
        c.verify.beta2_tilde = v.value("beta2_tilde", 0.3);
        c.verify.estimator_tolerance_m = v.value("estimator_tolerance_m", 1e-3);
        c.verify.ie_times_s = v.value("ie_times_s", std::vector<double>{20.0, 45.0});
    }
    return c;
}

/// Parses and validates; throws ScenarioError listing every violation.
inline ScenarioConfig load_scenario_json(const json& j) {
    ScenarioConfig c;
    try {
        c = parse_scenario(j);
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioError({std::string("parse: ") + e.what()});
    }
    auto errs = validate_scenario(c);
    if (!errs.empty()) throw ScenarioError(std::move(errs));
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError({"parse: cannot open " + path});
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const std::exception& e) {
        throw ScenarioError({std::string("parse: ") + e.what()});
    }
    return load_scenario_json(j);
}

}  // namespace nsb
