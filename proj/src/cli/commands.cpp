#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "plot.hpp"
#include "rydberg/cli.hpp"

namespace rydberg::cli {

namespace {

using Json = nlohmann::ordered_json;
using czgate::kTwoPi;

// Independent generator for one command-level task, keyed off the master seed.
qdyn::Rng stream(std::uint64_t seed, int tag) { return qdyn::Rng(bench::shot_seed(seed, -1000 - tag, 0, 0, 0)); }

enum StreamTag : int { kCalibration = 1, kEvaluation = 2, kConfusion = 3 };

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json profile_json(const czgate::PulseProfile& p) {
    return Json{{"amp", p.amp},
                {"mod_freq_cycles", p.mod_freq_cycles},
                {"phase0", p.phase0},
                {"detuning_slope", p.detuning_slope},
                {"duration", p.duration},
                {"local_phase", p.local_phase}};
}

Json fit_json(const bench::FitResult& f, bench::FitMode mode) {
    return Json{{"mode", bench::to_string(mode)},
                {"asymptote", bench::asymptote(mode)},
                {"p", f.p},
                {"p_std_err", f.std_err},
                {"amplitude", f.amplitude},
                {"fidelity", bench::fidelity_from_decay(f.p, mode)},
                {"fidelity_std_err", mode == bench::FitMode::Corrected ? 0.75 * f.std_err : f.std_err},
                {"fidelity_meaning", mode == bench::FitMode::Raw ? "return-probability retention per gate"
                                                                 : "loss-corrected CZ fidelity, 1 - 3/4 (1 - p)"},
                {"converged", f.converged},
                {"iterations", f.iterations}};
}

readout::Thresholds thresholds_for(const RunConfig& cfg) {
    if (cfg.readout.thresholds) return *cfg.readout.thresholds;
    auto rng = stream(cfg.seed, kCalibration);
    const auto labeled =
        readout::draw_labeled(cfg.readout.imaging, static_cast<std::size_t>(cfg.readout.calibration_samples), rng);
    return readout::calibrate_thresholds(labeled);
}

std::optional<bench::ReadoutModel> readout_model(const RunConfig& cfg) {
    if (cfg.ideal_readout) return std::nullopt;
    return bench::ReadoutModel{cfg.readout.imaging, thresholds_for(cfg)};
}

std::string pm(double v, double err) { return fmt(v, 6) + " +- " + fmt(err, 2); }

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

CommandResult cmd_optimize_pulse(const RunConfig& cfg) {
    const auto res = czgate::optimize_pulse(cfg.model, cfg.optimize_initial, cfg.optimize);
    auto half = cfg.optimize.sim;
    half.steps_per_period *= 2.0;
    const double f_half = czgate::simulate_gate(res.profile, cfg.model, std::nullopt, half).fidelity;

    CommandResult out;
    out.files["profile.ini"] = profile_record(res.profile);

    std::string csv = "evaluation,objective,best_objective,best_fidelity\n";
    for (const auto& e : res.log)
        csv += std::to_string(e.evaluation) + "," + fmt(e.objective, 12) + "," + fmt(e.best_objective, 12) + "," +
               fmt(1.0 - e.best_objective, 12) + "\n";
    out.files["optimize_log.csv"] = csv;

    Json j{{"fidelity", res.fidelity},
           {"fidelity_half_step", f_half},
           {"half_step_change", std::abs(f_half - res.fidelity)},
           {"evaluations", res.evaluations},
           {"evaluations_to_target", res.evaluations_to_target ? Json(*res.evaluations_to_target) : Json(nullptr)},
           {"target_fidelity", cfg.optimize.target_fidelity},
           {"converged", res.converged},
           {"omega_t", res.profile.duration * cfg.model.omega},
           {"profile", profile_json(res.profile)}};
    out.files["optimize.json"] = dump(j);

    out.exit_code = res.converged ? kOk : kNotConverged;
    out.summary = "fidelity " + fmt(res.fidelity, 8) + " after " + std::to_string(res.evaluations) +
                  " evaluations, Omega T = " + fmt(res.profile.duration * cfg.model.omega, 6) +
                  (res.converged ? "" : " (not converged)");
    return out;
}

CommandResult cmd_rb(const RunConfig& cfg) {
    const auto ro = readout_model(cfg);
    const auto res = bench::run_rb(cfg.rb, cfg.model, cfg.profile(), cfg.noise, ro);

    CommandResult out;
    Json points = Json::array();
    for (const auto& p : res.points)
        points.push_back(Json{{"n_cz", p.n_cz},
                              {"return_prob", p.return_prob},
                              {"std_err", p.std_err},
                              {"n_shots", p.n_shots},
                              {"n_kept", p.n_kept},
                              {"return_prob_kept", p.return_prob_kept},
                              {"std_err_kept", p.std_err_kept}});
    Json j{{"seed", cfg.seed},
           {"f_raw", res.f_raw},
           {"f_corrected", res.f_corrected},
           {"p_raw", res.p_raw},
           {"p_corrected", res.p_corrected},
           {"raw", fit_json(res.fit_raw, bench::FitMode::Raw)},
           {"corrected", fit_json(res.fit_corrected, bench::FitMode::Corrected)},
           {"doppler_sigma", cfg.noise.doppler_sigma},
           {"thresholds", ro ? Json{{"t1", ro->thresholds.t1}, {"t2", ro->thresholds.t2}} : Json(nullptr)},
           {"points", points}};
    out.files["rb.json"] = dump(j);

    if (cfg.rb.record_shots) {
        std::string csv = "round,n_cz,randomization,shot,atomA_class,atomB_class,c1A,c2A,c1B,c2B\n";
        csv.reserve(res.shots.size() * 40);
        for (const auto& s : res.shots) {
            csv += std::to_string(s.round) + "," + std::to_string(s.n_cz) + "," + std::to_string(s.randomization) +
                   "," + std::to_string(s.shot) + ",";
            csv += std::string(readout::to_string(s.cls[0])) + "," + std::string(readout::to_string(s.cls[1])) + ",";
            csv += std::to_string(s.c1[0]) + "," + std::to_string(s.c2[0]) + "," + std::to_string(s.c1[1]) + "," +
                   std::to_string(s.c2[1]) + "\n";
        }
        out.files["shots.csv"] = csv;
    }

    PlotSpec plot{"Global echoed RB", "number of CZ gates", "return probability to |00>", {}, {}};
    Series raw{"raw", "#1f77b4", {}, true}, kept{"post-selected (no loss)", "#d62728", {}, true};
    for (const auto& p : res.points) {
        raw.points.emplace_back(p.n_cz, p.return_prob);
        kept.points.emplace_back(p.n_cz, p.return_prob_kept);
    }
    Series raw_fit{"", "#1f77b4", {}, false}, kept_fit{"", "#d62728", {}, false};
    const double n_max = res.points.empty() ? 1.0 : res.points.back().n_cz;
    for (int i = 0; i <= 100; ++i) {
        const double n = n_max * i / 100.0;
        raw_fit.points.emplace_back(n, res.fit_raw.amplitude * std::pow(res.fit_raw.p, n));
        kept_fit.points.emplace_back(n, res.fit_corrected.amplitude * std::pow(res.fit_corrected.p, n) + 0.25);
    }
    plot.series = {raw, kept, raw_fit, kept_fit};
    plot.notes = {"raw fit: p = " + pm(res.fit_raw.p, res.fit_raw.std_err),
                  "post-selected fit: p = " + pm(res.fit_corrected.p, res.fit_corrected.std_err),
                  "F_raw = " + fmt(res.f_raw, 6) + ", F_corrected = " + fmt(res.f_corrected, 6)};
    out.files["rb.svg"] = render_svg(plot);

    const bool ok = res.fit_raw.converged && res.fit_corrected.converged;
    out.exit_code = ok ? kOk : kNotConverged;
    out.summary = "f_raw " + fmt(res.f_raw, 6) + ", f_corrected " + fmt(res.f_corrected, 6) +
                  (ok ? "" : " (fit did not converge)");
    return out;
}

CommandResult cmd_rounds(const RunConfig& cfg) {
    const auto ro = readout_model(cfg);
    auto rb = cfg.rb;
    rb.record_shots = false;

    CommandResult out;
    Json policies = Json::array();
    PlotSpec plot{"Corrected CZ fidelity per mid-circuit round", "round", "F_corrected", {}, {}};
    static const char* colors[] = {"#d62728", "#ff7f0e", "#2ca02c", "#1f77b4"};
    bool ok = true;
    for (std::size_t k = 0; k < cfg.rounds.policies.size(); ++k) {
        bench::RoundPolicy policy;
        policy.kind = cfg.rounds.policies[k];
        policy.gm_floor = cfg.rounds.gm_floor;
        policy.rsc_stages = cfg.rsc_stages;
        if (policy.rsc_stages.empty())
            policy.rsc_stages.push_back(
                {cfg.rsc, cfg.rsc.empty() ? 0 : cfg.rsc.front().cycles * static_cast<int>(cfg.rsc.size())});
        const auto rounds = bench::run_rounds(cfg.rounds.n_rounds, policy, cfg.rounds.heating_per_round, cfg.motion,
                                              rb, cfg.model, cfg.profile(), cfg.noise, ro);
        Json list = Json::array();
        Series s{std::string(bench::to_string(policy.kind)), colors[k % 4], {}, false};
        double lo = 1.0, hi = 0.0;
        for (const auto& r : rounds) {
            Json nbar = Json::object();
            for (std::size_t m = 0; m < r.nbar.size(); ++m)
                nbar[std::string(motional::to_string(cfg.motion.modes[m].label()))] = r.nbar[m];
            list.push_back(Json{{"round", r.round},
                                {"f_corrected", r.f_corrected},
                                {"f_corrected_std_err", r.corrected_std_err},
                                {"f_raw", r.f_raw},
                                {"nbar", nbar},
                                {"doppler_sigma", r.doppler_sigma}});
            s.points.emplace_back(r.round, r.f_corrected);
            lo = std::min(lo, r.f_corrected), hi = std::max(hi, r.f_corrected);
            ok = ok && r.rb.fit_corrected.converged;
        }
        Json entry{{"policy", bench::to_string(policy.kind)}, {"spread", hi - lo}, {"rounds", list}};
        if (rounds.size() >= 2) entry["drop_round2"] = rounds[0].f_corrected - rounds[1].f_corrected;
        policies.push_back(entry);
        Series markers = s;
        markers.label.clear();
        markers.markers = true;
        plot.series.push_back(s);
        plot.series.push_back(markers);
    }
    plot.notes = {"heating per round: " + fmt(cfg.rounds.heating_per_round, 6) + " phonons per mode"};
    out.files["rounds.json"] =
        dump(Json{{"seed", cfg.seed},
                  {"n_rounds", cfg.rounds.n_rounds},
                  {"heating_per_round", cfg.rounds.heating_per_round},
                  {"gm_floor", cfg.rounds.gm_floor},
                  {"policies", policies}});
    out.files["rounds.svg"] = render_svg(plot);
    out.exit_code = ok ? kOk : kNotConverged;
    out.summary = std::to_string(cfg.rounds.policies.size()) + " policies x " + std::to_string(cfg.rounds.n_rounds) +
                  " rounds";
    return out;
}

CommandResult cmd_sideband(const RunConfig& cfg) {
    const auto& sb = cfg.sideband;
    std::vector<motional::MotionalMode> modes;
    const double nbars[] = {sb.radial_nbar, sb.axial_nbar};
    for (std::size_t i = 0; i < cfg.motion.modes.size(); ++i) {
        const auto& m = cfg.motion.modes[i];
        modes.push_back(motional::thermal_mode(m.trap_freq(), m.lamb_dicke(), nbars[i < 2 ? i : 1], m.label()));
    }
    const auto grid = motional::detuning_grid(modes, sb.step);
    const auto spec = motional::sideband_spectrum(modes, sb.probe_rabi, sb.probe_time, grid);

    double min_trap = modes.front().trap_freq();
    for (const auto& m : modes) min_trap = std::min(min_trap, m.trap_freq());
    const auto peaks = motional::resolved_peaks(spec, 0.005, 0.5 * min_trap);

    CommandResult out;
    std::string csv = "detuning_Hz,transfer\n";
    for (std::size_t i = 0; i < grid.size(); ++i) csv += fmt(grid[i] / kTwoPi, 12) + "," + fmt(spec.transfer[i], 12) + "\n";
    out.files["spectrum.csv"] = csv;

    Json thermo = Json::array();
    PlotSpec plot{"Sideband spectrum", "detuning (kHz)", "transfer", {}, {}};
    bool ok = true;
    for (const auto& m : modes) {
        const std::string label(motional::to_string(m.label()));
        try {
            const auto t = motional::fit_mean_phonon(spec, m.trap_freq());
            thermo.push_back(Json{{"mode", label}, {"nbar", t.nbar}, {"r", t.ratio}});
            plot.notes.push_back(label + " nbar = " + fmt(t.nbar, 4));
        } catch (const std::domain_error&) {
            thermo.push_back(Json{{"mode", label}, {"nbar", nullptr}, {"r", nullptr}});
            plot.notes.push_back(label + " nbar = n/a");
            ok = false;
        }
    }
    out.files["thermometry.json"] = dump(thermo);

    Series line{"", "#1f77b4", {}, false};
    for (std::size_t i = 0; i < grid.size(); ++i) line.points.emplace_back(grid[i] / kTwoPi / 1e3, spec.transfer[i]);
    plot.series = {line};
    plot.notes.push_back(std::to_string(peaks.size()) + " resolved peaks");
    out.files["sideband.svg"] = render_svg(plot);

    out.exit_code = ok ? kOk : kNotConverged;
    out.summary = std::to_string(peaks.size()) + " peaks";
    for (const auto& t : thermo)
        if (!t["nbar"].is_null()) out.summary += ", " + t["mode"].get<std::string>() + " nbar " + fmt(t["nbar"], 4);
    return out;
}

CommandResult cmd_readout(const RunConfig& cfg) {
    const auto& im = cfg.readout.imaging;
    auto cal_rng = stream(cfg.seed, kCalibration);
    const auto labeled = readout::draw_labeled(im, static_cast<std::size_t>(cfg.readout.calibration_samples), cal_rng);
    const auto th = cfg.readout.thresholds ? *cfg.readout.thresholds : readout::calibrate_thresholds(labeled);
    auto eval_rng = stream(cfg.seed, kEvaluation);
    const auto fig = readout::evaluate(im, th, static_cast<std::size_t>(cfg.readout.evaluation_samples), eval_rng);
    auto conf_rng = stream(cfg.seed, kConfusion);
    const auto conf =
        readout::confusion_matrix(im, th, static_cast<std::size_t>(std::max(1000, cfg.readout.evaluation_samples)),
                                  conf_rng);

    CommandResult out;
    std::string csv = "trial,true_state,c1,c2,assigned\n";
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto& l = labeled[i];
        csv += std::to_string(i) + "," + std::string(readout::to_string(l.state)) + "," + std::to_string(l.c1) + "," +
               std::to_string(l.c2) + "," + std::string(readout::to_string(readout::classify(l.c1, l.c2, th).cls)) +
               "\n";
    }
    out.files["scatter.csv"] = csv;

    Json rows = Json::object();
    const readout::TrueState states[] = {readout::TrueState::Zero, readout::TrueState::One, readout::TrueState::Lost};
    const readout::OutcomeClass classes[] = {readout::OutcomeClass::Zero, readout::OutcomeClass::One,
                                             readout::OutcomeClass::Loss};
    for (int r = 0; r < 3; ++r) {
        Json row = Json::object();
        for (int c = 0; c < 3; ++c) row[std::string(readout::to_string(classes[c]))] = conf[r][c];
        rows[std::string(readout::to_string(states[r]))] = row;
    }
    Json j{{"seed", cfg.seed},
           {"thresholds", {{"t1", th.t1}, {"t2", th.t2}}},
           {"thresholds_calibrated", !cfg.readout.thresholds.has_value()},
           {"training_misclassifications", readout::misclassifications(labeled, th)},
           {"training_samples", labeled.size()},
           {"state_fidelity", fig.state_fidelity},
           {"survival", fig.survival},
           {"evaluation_samples_per_class", cfg.readout.evaluation_samples},
           {"confusion", rows}};
    out.files["confusion.json"] = dump(j);
    out.files["thresholds.ini"] = "[imaging]\nt1 = " + std::to_string(th.t1) + "\nt2 = " + std::to_string(th.t2) + "\n";

    out.summary = "thresholds (" + std::to_string(th.t1) + ", " + std::to_string(th.t2) + "), fidelity " +
                  fmt(fig.state_fidelity, 5) + ", survival " + fmt(fig.survival, 5);
    return out;
}

CommandResult cmd_rabi(const RunConfig& cfg) {
    std::vector<double> ts(static_cast<std::size_t>(cfg.rabi.points));
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = cfg.rabi.t_max * static_cast<double>(i) / (ts.size() - 1);
    const auto scan = czgate::rabi_scan(cfg.model, ts);

    CommandResult out;
    std::string csv = "time_ns,p_rydberg\n";
    double lo = 1.0, hi = 0.0, dev = 0.0;
    Series line{"", "#1f77b4", {}, false};
    for (const auto& [t, p] : scan) {
        csv += fmt(t * 1e9, 12) + "," + fmt(p, 12) + "\n";
        lo = std::min(lo, p), hi = std::max(hi, p);
        const double s = std::sin(0.5 * cfg.model.omega * t);
        dev = std::max(dev, std::abs(p - s * s));
        line.points.emplace_back(t * 1e9, p);
    }
    out.files["rabi.csv"] = csv;
    const double period = kTwoPi / cfg.model.omega;
    out.files["rabi.json"] = dump(Json{{"omega_hz", cfg.model.omega / kTwoPi},
                                       {"period_ns", period * 1e9},
                                       {"visibility", hi - lo},
                                       {"max_deviation_from_sin2", dev}});
    PlotSpec plot{"Resonant 1-r Rabi oscillation", "time (ns)", "Rydberg population", {line}, {}};
    plot.notes = {"period " + fmt(period * 1e9, 6) + " ns"};
    out.files["rabi.svg"] = render_svg(plot);
    out.summary = "period " + fmt(period * 1e9, 6) + " ns, visibility " + fmt(hi - lo, 8);
    return out;
}

int run(std::string_view command, const RunOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    try {
        if (opts.workers < 1) throw ConfigError("--workers must be >= 1");
        std::ifstream in(opts.config, std::ios::binary);
        if (!in) throw ConfigError("cannot read config '" + opts.config.string() + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        RunConfig cfg = parse_config(text);
        if (opts.seed) cfg.seed = *opts.seed;
        cfg.rb.seed = cfg.seed;
        cfg.rb.workers = opts.workers;

        CommandResult res;
        try {
            if (command == "optimize-pulse") res = cmd_optimize_pulse(cfg);
            else if (command == "rb") res = cmd_rb(cfg);
            else if (command == "rounds") res = cmd_rounds(cfg);
            else if (command == "sideband") res = cmd_sideband(cfg);
            else if (command == "readout") res = cmd_readout(cfg);
            else if (command == "rabi") res = cmd_rabi(cfg);
            else throw ConfigError("unknown command '" + std::string(command) + "'");
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }

        std::error_code ec;
        std::filesystem::create_directories(opts.out, ec);
        if (ec) throw ConfigError("cannot create output directory '" + opts.out.string() + "': " + ec.message());
        Json files = Json::object();
        for (const auto& [name, contents] : res.files) {
            const auto path = opts.out / name;
            std::ofstream f(path, std::ios::binary);
            f << contents;
            if (!f) throw ConfigError("cannot write '" + path.string() + "'");
            files[name] = sha256_hex(contents);
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const Json manifest{{"tool", "rydsim"},
                            {"version", kToolVersion},
                            {"command", command},
                            {"config", opts.config.string()},
                            {"config_sha256", sha256_hex(text)},
                            {"seed", cfg.seed},
                            {"workers", opts.workers},
                            {"exit_code", res.exit_code},
                            {"files", files},
                            {"wall_clock_seconds", wall}};
        std::ofstream mf(opts.out / "run_manifest.json", std::ios::binary);
        mf << dump(manifest);
        if (!mf) throw ConfigError("cannot write run_manifest.json");

        std::cout << command << ": " << res.summary << "\n";
        if (res.exit_code == kNotConverged) std::cerr << "error: " << command << " did not converge\n";
        return res.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

}  // namespace rydberg::cli
