#pragma once

#include "nsb/scenario_config.hpp"
#include "nsb/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nsb {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "t",         "agent",       "pos_x",       "pos_y",        "pos_z",     "vel_x",     "vel_y",
        "vel_z",     "est_x",       "est_y",       "est_z",        "xd_x",      "xd_y",      "xd_z",
        "s_norm",    "u_x",         "u_y",         "u_z",          "nearest_m", "coab_active", "escape_active",
        "vref_x",    "vref_y",      "vref_z",      "S_x",          "S_y",       "S_z",       "leader_x",
        "leader_y",  "leader_z",    "rho_tilde_io", "rho_tilde_if", "lambda_io", "lambda_star", "delta_hat",
        "coab_poly", "ctb_poly",    "surface_poly", "nearest_kind", "nearest_index", "lm_gap"};
    return cols;
}

namespace detail {

inline void put(std::string& out, double v) {
    if (std::isinf(v)) {
        out += v > 0 ? "inf" : "-inf";
        return;
    }
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

inline void put(std::string& out, long long v) {
    char buf[24];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

inline void put3(std::string& out, const Vec3& v) {
    for (int k = 0; k < 3; ++k) {
        put(out, v(k));
        out += ',';
    }
}

inline double get_double(std::string_view s) {
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::invalid_argument("csv: bad number '" + std::string(s) + "'");
    return v;
}

}  // namespace detail

inline std::string csv_header() {
    std::string h;
    for (const auto& c : csv_columns()) h += (h.empty() ? "" : ",") + c;
    return h + "\n";
}

inline std::string csv_line(const SampleRow& r) {
    std::string s;
    using detail::put;
    put(s, r.t);
    s += ',';
    put(s, static_cast<long long>(r.agent));
    s += ',';
    detail::put3(s, r.pos);
    detail::put3(s, r.vel);
    detail::put3(s, r.est);
    detail::put3(s, r.xd);
    put(s, r.s_norm);
    s += ',';
    detail::put3(s, r.u);
    put(s, r.nearest);
    s += r.coab_active ? ",1," : ",0,";
    s += r.escape_active ? "1," : "0,";
    detail::put3(s, r.vref);
    detail::put3(s, r.S);
    detail::put3(s, r.leader);
    for (double v : {r.rho_tilde_io, r.rho_tilde_if, r.lambda_io, r.lambda_star, r.delta_hat}) {
        put(s, v);
        s += ',';
    }
    s += r.coab_poly ? "1," : "0,";
    s += r.ctb_poly ? "1," : "0,";
    s += r.surface_poly ? "1," : "0,";
    put(s, static_cast<long long>(r.nearest_kind));
    s += ',';
    put(s, static_cast<long long>(r.nearest_index));
    s += ',';
    put(s, r.lm_gap);
    s += '\n';
    return s;
}

struct CsvInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::vector<SampleRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CsvInputError("csv: empty input");
    if (line + "\n" != csv_header()) throw CsvInputError("csv: unexpected columns");
    std::vector<SampleRow> rows;
    std::vector<double> f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        f.clear();
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(',', start);
            f.push_back(detail::get_double(std::string_view(line).substr(start, pos - start)));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (f.size() != csv_columns().size()) throw CsvInputError("csv: wrong field count");
        SampleRow r;
        std::size_t k = 0;
        const auto v3 = [&] {
            Vec3 v(f[k], f[k + 1], f[k + 2]);
            k += 3;
            return v;
        };
        r.t = f[k++];
        r.agent = static_cast<std::size_t>(f[k++]);
        r.pos = v3();
        r.vel = v3();
        r.est = v3();
        r.xd = v3();
        r.s_norm = f[k++];
        r.u = v3();
        r.nearest = f[k++];
        r.coab_active = f[k++] != 0.0;
        r.escape_active = f[k++] != 0.0;
        r.vref = v3();
        r.S = v3();
        r.leader = v3();
        r.rho_tilde_io = f[k++];
        r.rho_tilde_if = f[k++];
        r.lambda_io = f[k++];
        r.lambda_star = f[k++];
        r.delta_hat = f[k++];
        r.coab_poly = f[k++] != 0.0;
        r.ctb_poly = f[k++] != 0.0;
        r.surface_poly = f[k++] != 0.0;
        r.nearest_kind = static_cast<int>(f[k++]);
        r.nearest_index = static_cast<int>(f[k++]);
        r.lm_gap = f[k++];
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<SampleRow> read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvInputError("csv: cannot open " + path);
    return read_csv(in);
}

// ---------------------------------------------------------------------------

struct TimedValue {
    double t = 0.0;
    double value = 0.0;
};

struct Metrics {
    double threshold_m = 0.02;
    std::size_t agents = 0;
    std::vector<std::optional<double>> settle_s;  // nullopt marks unsettled
    std::optional<double> settle_all_s;
    std::vector<TimedValue> ie_at;
    std::vector<TimedValue> min_distance;
    std::vector<TimedValue> estimator_error;
    double min_distance_after_settle = HUGE_VAL;
    bool unsettled() const { return !settle_all_s.has_value(); }
};

/// Groups rows by sample time, preserving order.
inline std::vector<std::vector<const SampleRow*>> group_samples(const std::vector<SampleRow>& rows) {
    std::vector<std::vector<const SampleRow*>> out;
    for (const auto& r : rows) {
        if (out.empty() || out.back().front()->t != r.t) out.emplace_back();
        out.back().push_back(&r);
    }
    return out;
}

inline double tracking_error(const SampleRow& r) { return (r.pos - r.xd).norm(); }

inline Metrics compute_metrics(const std::vector<SampleRow>& rows, double threshold_m,
                               const std::vector<double>& ie_times) {
    Metrics m;
    m.threshold_m = threshold_m;
    const auto samples = group_samples(rows);
    if (samples.empty()) return m;
    m.agents = samples.front().size();
    std::vector<double> last_above(m.agents, -HUGE_VAL);
    std::vector<double> ie;
    for (const auto& s : samples) {
        double sum = 0.0, dmin = HUGE_VAL, emax = 0.0;
        for (const auto* r : s) {
            const double e = tracking_error(*r);
            sum += e * e;
            dmin = std::min(dmin, r->nearest);
            emax = std::max(emax, (r->est - r->leader).norm());
            if (e > threshold_m) last_above[r->agent - 1] = r->t;
        }
        ie.push_back(std::sqrt(sum));
        m.min_distance.push_back({s.front()->t, dmin});
        m.estimator_error.push_back({s.front()->t, emax});
    }
    const double t_end = samples.back().front()->t;
    m.settle_s.resize(m.agents);
    double all = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < m.agents; ++i) {
        if (last_above[i] == -HUGE_VAL) {
            m.settle_s[i] = samples.front().front()->t;
        } else if (last_above[i] >= t_end) {
            ok = false;
            continue;
        } else {
            for (const auto& s : samples)
                if (s.front()->t > last_above[i]) {
                    m.settle_s[i] = s.front()->t;
                    break;
                }
        }
        all = std::max(all, *m.settle_s[i]);
    }
    if (ok) m.settle_all_s = all;
    for (double want : ie_times) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < samples.size(); ++k)
            if (std::abs(samples[k].front()->t - want) < std::abs(samples[best].front()->t - want)) best = k;
        const double spacing = samples.size() > 1 ? samples[1].front()->t - samples[0].front()->t : 0.0;
        if (std::abs(samples[best].front()->t - want) <= spacing + 1e-9) m.ie_at.push_back({want, ie[best]});
    }
    for (const auto& s : samples)
        for (const auto* r : s) {
            const auto& st = m.settle_s[r->agent - 1];
            if (st && r->t >= *st) m.min_distance_after_settle = std::min(m.min_distance_after_settle, r->nearest);
        }
    return m;
}

inline json metrics_json(const Metrics& m) {
    json j;
    j["threshold_m"] = m.threshold_m;
    j["agents"] = m.agents;
    json settle = json::array();
    for (const auto& s : m.settle_s) settle.push_back(s ? json(*s) : json("unsettled"));
    j["settle_s"] = settle;
    j["settle_all_s"] = m.settle_all_s ? json(*m.settle_all_s) : json("unsettled");
    json ie = json::object();
    for (const auto& p : m.ie_at) {
        std::string key;
        detail::put(key, p.t);
        ie[key] = p.value;
    }
    j["ie"] = ie;
    j["min_distance_after_settle_m"] = std::isfinite(m.min_distance_after_settle) ? json(m.min_distance_after_settle)
                                                                                   : json("inf");
    const auto series = [](const std::vector<TimedValue>& v) {
        json a = json::array();
        for (const auto& p : v) a.push_back({p.t, std::isfinite(p.value) ? json(p.value) : json("inf")});
        return a;
    };
    j["min_distance_series"] = series(m.min_distance);
    j["estimator_error_series"] = series(m.estimator_error);
    return j;
}

// ---------------------------------------------------------------------------

struct RunResult {
    std::vector<SampleRow> rows;
    Metrics metrics;
    std::optional<std::string> fault;
    double fault_time = 0.0;
    int escape_triggers = 0;
};

using RowObserver = std::function<void(const std::vector<SampleRow>&)>;

/// Executes the closed loop; a numerical fault stops the run and keeps the rows produced so far.
inline RunResult run(const ScenarioConfig& cfg, const RowObserver& observer = {}, bool keep_rows = true) {
    RunResult res;
    Simulation sim(cfg);
    try {
        while (!sim.done()) {
            const bool sample = sim.step_index() % cfg.sample_every == 0;
            sim.step();
            if (!sample) continue;
            if (observer) observer(sim.last_rows());
            if (keep_rows) res.rows.insert(res.rows.end(), sim.last_rows().begin(), sim.last_rows().end());
        }
    } catch (const std::exception& e) {
        res.fault = e.what();
        res.fault_time = sim.time();
    }
    res.escape_triggers = sim.escape_triggers();
    res.metrics = compute_metrics(res.rows, cfg.verify.settle_threshold_m, cfg.verify.ie_times_s);
    return res;
}

inline std::string series_csv(const std::vector<SampleRow>& rows) {
    std::string s = csv_header();
    for (const auto& r : rows) s += csv_line(r);
    return s;
}

inline json manifest_json(const ScenarioConfig& cfg, const RunResult& res) {
    json j;
    j["name"] = cfg.name;
    j["version"] = kVersion;
    j["seed"] = cfg.seed;
    j["config_hash"] = config_hash(cfg.source);
    j["dt_s"] = cfg.dt_s;
    j["duration_s"] = cfg.duration_s;
    j["rows"] = res.rows.size();
    j["escape_triggers"] = res.escape_triggers;
    if (res.fault) {
        j["fault"] = {{"message", *res.fault}, {"t_s", res.fault_time}};
    } else {
        j["fault"] = nullptr;
    }
    j["config"] = cfg.source;
    return j;
}

/// Writes timeseries.csv, metrics.json and manifest.json into dir.
inline void write_run(const std::filesystem::path& dir, const ScenarioConfig& cfg, const RunResult& res) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "timeseries.csv", std::ios::binary) << series_csv(res.rows);
    std::ofstream(dir / "metrics.json") << metrics_json(res.metrics).dump(2) << "\n";
    std::ofstream(dir / "manifest.json") << manifest_json(cfg, res).dump(2) << "\n";
}

/// Accepts either a scenario document or a manifest that embeds one.
inline ScenarioConfig load_scenario_or_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError({"parse: cannot open " + path});
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const std::exception& e) {
        throw ScenarioError({std::string("parse: ") + e.what()});
    }
    if (j.contains("config") && j.contains("config_hash")) return load_scenario_json(j.at("config"));
    return load_scenario_json(j);
}

}  // namespace nsb
