#include "nsb/deadlock.hpp"
#include "nsb/verify.hpp"

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nsb::json;

namespace {

constexpr int kOk = 0;
constexpr int kViolations = 1;
constexpr int kFault = 2;

struct Overrides {
    std::optional<double> dt, duration;
    std::optional<std::uint64_t> seed;
    std::optional<int> sample_every;
};

json read_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nsb::ScenarioError({"parse: cannot open " + path});
    try {
        json j = json::parse(in, nullptr, true, true);
        if (j.contains("config") && j.contains("config_hash")) return j.at("config");
        return j;
    } catch (const json::exception& e) {
        throw nsb::ScenarioError({std::string("parse: ") + e.what()});
    }
}

nsb::ScenarioConfig load(const std::string& path, const Overrides& o = {}) {
    json j = read_document(path);
    if (o.dt) j["dt_s"] = *o.dt;
    if (o.duration) j["duration_s"] = *o.duration;
    if (o.seed) j["seed"] = *o.seed;
    if (o.sample_every) j["sample_every"] = *o.sample_every;
    return nsb::load_scenario_json(j);
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "unsettled";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f s", *v);
    return buf;
}

void print_metrics(const nsb::Metrics& m, const std::string& name) {
    const bool refs = name == "paper_s1_distance";
    std::printf("settling threshold      %.3g m\n", m.threshold_m);
    for (std::size_t i = 0; i < m.settle_s.size(); ++i)
        std::printf("  agent %zu settles at     %s\n", i + 1, fmt_opt(m.settle_s[i]).c_str());
    std::printf("T_s* (all agents)       %s%s\n", fmt_opt(m.settle_all_s).c_str(), refs ? "   [reference 0.5 s]" : "");
    for (const auto& p : m.ie_at) {
        const char* ref = !refs ? "" : p.t == 20.0 ? "   [reference 1.126e-02]" : p.t == 45.0 ? "   [reference 8.523e-03]" : "";
        std::printf("I_e(%g s)%*s%.4e%s\n", p.t, p.t < 10 ? 15 : 14, "", p.value, ref);
    }
    std::printf("min distance after T_s* %.5f m\n", m.min_distance_after_settle);
}

int cmd_run(const std::string& path, const Overrides& o, std::string out) {
    const auto cfg = load(path, o);
    if (out.empty()) out = (fs::path("runs") / cfg.name).string();
    spdlog::info("running {} for {} s at dt {} s", cfg.name, cfg.duration_s, cfg.dt_s);
    const auto res = nsb::run(cfg);
    nsb::write_run(out, cfg, res);
    std::printf("wrote %s (%zu rows, %d escape triggers)\n", out.c_str(), res.rows.size(), res.escape_triggers);
    print_metrics(res.metrics, cfg.name);
    if (res.fault) {
        spdlog::error("numerical fault at t = {:.4f} s: {}", res.fault_time, *res.fault);
        return kFault;
    }
    return kOk;
}

int cmd_verify(const std::string& path, const Overrides& o, const std::string& out, bool harness) {
    auto ov = o;
    if (!ov.sample_every) ov.sample_every = 1;
    const auto cfg = load(path, ov);
    spdlog::info("verifying {}", cfg.name);
    const auto res = nsb::run(cfg);
    if (res.fault) {
        spdlog::error("numerical fault at t = {:.4f} s: {}", res.fault_time, *res.fault);
        return kFault;
    }
    auto rep = nsb::verify_series(res.rows, cfg);
    json j = rep.to_json();
    bool pass = rep.pass;
    if (!cfg.obstacles.empty()) {
        const auto kin = nsb::kinematic_run(nsb::kinematic_setup(cfg));
        const auto vio = nsb::lyapunov_monitor(kin, nsb::LyapunovKind::Vio, cfg);
        const auto kim = nsb::kinematic_run(nsb::kinematic_setup(cfg, true));
        const auto vim = nsb::lyapunov_monitor(kim, nsb::LyapunovKind::ViM, cfg);
        j["kinematic_monitors"] = {nsb::monitor_json(vio), nsb::monitor_json(vim)};
        pass = pass && vio.ok() && vim.ok();
    }
    j["closed_loop_informational"] = {
        nsb::monitor_json(nsb::lyapunov_monitor(res.rows, nsb::LyapunovKind::Vio, cfg)),
        nsb::monitor_json(nsb::lyapunov_monitor(res.rows, nsb::LyapunovKind::ViM, cfg))};
    if (harness) {
        const auto h = nsb::fixed_time_harness(cfg);
        j["fixed_time_harness"] = nsb::harness_json(h);
        pass = pass && h.fixed_time_ok();
    }
    j["pass"] = pass;
    if (!out.empty()) std::ofstream(out) << j.dump(2) << "\n";

    for (const auto& m : j["monitors"])
        std::printf("%-5s gated %zu passed %zu severe %zu\n", m["name"].get<std::string>().c_str(),
                    m["gated"].get<std::size_t>(), m["passed"].get<std::size_t>(), m["severe"].get<std::size_t>());
    if (j.contains("kinematic_monitors"))
        for (const auto& m : j["kinematic_monitors"])
            std::printf("%-5s gated %zu passed %zu severe %zu (kinematic)\n", m["name"].get<std::string>().c_str(),
                        m["gated"].get<std::size_t>(), m["passed"].get<std::size_t>(),
                        m["severe"].get<std::size_t>());
    std::printf("sliding band bounds     %s\n", rep.lemma7.pass() ? "hold" : "violated");
    std::printf("lambda audit            %zu / %zu violations\n", rep.audit.violations, rep.audit.checked);
    if (!rep.T0_after_settling)
        spdlog::warn("gain schedule centre T0 = {} s does not exceed the measured settling time", rep.T0_s);
    std::printf("%s\n", pass ? "PASS" : "FAIL");
    return pass ? kOk : kViolations;
}

int cmd_sweep(const std::string& path, const Overrides& o, const std::vector<double>& scales, bool ablation,
              const std::string& out) {
    const auto cfg = load(path, o);
    nsb::HarnessOptions opt;
    opt.scales = scales;
    opt.ablation = ablation;
    spdlog::info("estimator harness on {} up to {:.1f} s", cfg.name, nsb::settling_predictors(cfg).T_e.value.value_or(0.0));
    const auto h = nsb::fixed_time_harness(cfg, opt);
    const json j = nsb::harness_json(h);
    if (!out.empty()) std::ofstream(out) << j.dump(2) << "\n";
    std::printf("T_e = %.2f s, tolerance %.1e m\n", h.T_e, h.tolerance_m);
    for (const auto& s : h.scales)
        std::printf("  scale %6g  initial %.3e m  settles %s  %s\n", s.scale, s.initial_error,
                    fmt_opt(s.settle_s).c_str(), s.settled_before_bound ? "before T_e" : "NOT before T_e");
    for (const auto& s : h.ablation)
        std::printf("  no fast term, scale %6g  settles %s\n", s.scale, fmt_opt(s.settle_s).c_str());
    if (ablation) std::printf("  settling without the fast term grows with scale: %s\n", h.ablation_grows() ? "yes" : "no");
    for (const auto& s : h.scales)
        if (!s.settled_before_bound) spdlog::error("scale {} did not settle before T_e", s.scale);
    return h.fixed_time_ok() ? kOk : kViolations;
}

int cmd_report(const std::string& dir) {
    const fs::path d(dir);
    const auto cfg = nsb::load_scenario_or_manifest((d / "manifest.json").string());
    const auto rows = nsb::read_csv_file((d / "timeseries.csv").string());
    const auto m = nsb::compute_metrics(rows, cfg.verify.settle_threshold_m, cfg.verify.ie_times_s);
    std::ifstream mf(d / "manifest.json");
    const json manifest = json::parse(mf);
    std::printf("%s  (version %s, seed %llu, config %s)\n", cfg.name.c_str(),
                manifest.value("version", "?").c_str(), static_cast<unsigned long long>(cfg.seed),
                manifest.value("config_hash", "?").c_str());
    print_metrics(m, cfg.name);
    const auto p = nsb::settling_predictors(cfg);
    std::printf("predicted T_e           %s\n", fmt_opt(p.T_e.value).c_str());
    if (!manifest["fault"].is_null()) {
        std::printf("run aborted: %s\n", manifest["fault"]["message"].get<std::string>().c_str());
        return kFault;
    }
    return kOk;
}

int cmd_deadlock(std::uint64_t seed, const std::string& out) {
    const json j = nsb::antipodal_deadlock_json(seed);
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream(out) << j.dump(2) << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("nsb");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("NSB_LOG_LEVEL")) spdlog::cfg::helpers::load_levels(lvl);

    CLI::App app{"Fixed-time null-space behavioral control simulator"};
    app.set_version_flag("--version", nsb::kVersion);
    app.require_subcommand(1);

    std::string scenario, out, run_dir;
    Overrides o;
    const auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--dt", o.dt, "integration step [s]")->check(CLI::PositiveNumber);
        sub->add_option("--duration", o.duration, "simulated horizon [s]")->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", o.seed, "scenario seed");
        sub->add_option("--sample-every", o.sample_every, "steps between logged samples")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "simulate a scenario and write a run directory");
    run->add_option("scenario", scenario, "scenario or manifest JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "run directory (default runs/<name>)");
    add_overrides(run);

    bool harness = false;
    auto* verify = app.add_subcommand("verify", "run the verification suite on a scenario");
    verify->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
    verify->add_option("--out", out, "verification report JSON");
    verify->add_flag("--harness", harness, "include the estimator fixed-time harness (slow)");
    add_overrides(verify);

    std::vector<double> scales{1.0, 10.0, 100.0};
    bool no_ablation = false;
    auto* sweep = app.add_subcommand("sweep", "estimator fixed-time harness over initial-error scales");
    sweep->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
    sweep->add_option("--scale-ic", scales, "initial-error scales")->delimiter(',');
    sweep->add_flag("--no-ablation", no_ablation, "skip the comparator without the fast term");
    sweep->add_option("--out", out, "harness report JSON");
    add_overrides(sweep);

    auto* report = app.add_subcommand("report", "summarize a run directory");
    report->add_option("run-dir", run_dir)->required()->check(CLI::ExistingDirectory);

    std::uint64_t dl_seed = 1;
    auto* deadlock = app.add_subcommand("deadlock", "emit the antipodal deadlock scenario");
    deadlock->add_option("--seed", dl_seed);
    deadlock->add_option("--out", out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kFault;
    }

    try {
        if (*run) return cmd_run(scenario, o, out);
        if (*verify) return cmd_verify(scenario, o, out, harness);
        if (*sweep) return cmd_sweep(scenario, o, scales, !no_ablation, out);
        if (*report) return cmd_report(run_dir);
        if (*deadlock) return cmd_deadlock(dl_seed, out);
    } catch (const nsb::ScenarioError& e) {
        for (const auto& v : e.violations) spdlog::error("{}", v);
        return kFault;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFault;
    }
    return kFault;
}
