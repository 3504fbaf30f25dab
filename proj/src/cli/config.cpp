#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rydberg/cli.hpp"

namespace rydberg::cli {

namespace {

namespace pt = boost::property_tree;
using czgate::kTwoPi;

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Reads typed values out of the INI tree and remembers which keys were used,
// so leftovers can be reported as unknown.
class Reader {
  public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    bool has_section(const std::string& section) const { return tree_.get_child_optional(section).has_value(); }

    std::optional<std::string> raw(const std::string& section, const std::string& key) {
        used_.insert(section + "." + key);
        const auto sec = tree_.get_child_optional(section);
        if (!sec) return std::nullopt;
        const auto v = sec->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return trim(*v);
    }

    double number(const std::string& section, const std::string& key, double fallback) {
        const auto v = raw(section, key);
        return v ? parse_double(section, key, *v) : fallback;
    }

    double required(const std::string& section, const std::string& key, const std::string& what) {
        const auto v = raw(section, key);
        if (!v) throw ConfigError("missing required key '" + section + "." + key + "' (" + what + ")");
        return parse_double(section, key, *v);
    }

    long long integer(const std::string& section, const std::string& key, long long fallback) {
        const auto v = raw(section, key);
        if (!v) return fallback;
        long long out = 0;
        const auto* end = v->data() + v->size();
        const auto [ptr, ec] = std::from_chars(v->data(), end, out);
        if (ec != std::errc{} || ptr != end) bad(section, key, *v, "an integer");
        return out;
    }

    std::uint64_t unsigned_integer(const std::string& section, const std::string& key, std::uint64_t fallback) {
        const auto v = raw(section, key);
        if (!v) return fallback;
        std::uint64_t out = 0;
        const auto* end = v->data() + v->size();
        const auto [ptr, ec] = std::from_chars(v->data(), end, out);
        if (ec != std::errc{} || ptr != end) bad(section, key, *v, "a non-negative integer");
        return out;
    }

    bool boolean(const std::string& section, const std::string& key, bool fallback) {
        const auto v = raw(section, key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        bad(section, key, *v, "true or false");
        return fallback;
    }

    std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
        return raw(section, key).value_or(fallback);
    }

    void reject_unknown() const {
        for (const auto& [section, sub] : tree_) {
            if (sub.empty() && !sub.data().empty())
                throw ConfigError("key '" + section + "' must live inside a [section]");
            for (const auto& [key, value] : sub)
                if (!used_.count(section + "." + key))
                    throw ConfigError("unknown key '" + section + "." + key + "'");
        }
    }

    [[noreturn]] static void bad(const std::string& section, const std::string& key, const std::string& v,
                                 const char* expected) {
        throw ConfigError("invalid value '" + v + "' for '" + section + "." + key + "': expected " + expected);
    }

  private:
    static double parse_double(const std::string& section, const std::string& key, const std::string& v) {
        if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
        double out = 0.0;
        const auto* end = v.data() + v.size();
        const auto [ptr, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc{} || ptr != end || std::isnan(out)) bad(section, key, v, "a number");
        return out;
    }

    const pt::ptree& tree_;
    std::set<std::string> used_;
};

template <typename F>
void checked(const std::string& section, F&& f) {
    try {
        f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("[" + section + "] " + e.what());
    } catch (const std::out_of_range& e) {
        throw ConfigError("[" + section + "] " + e.what());
    }
}

bench::PolicyKind parse_policy(const std::string& s) {
    if (s == "no_cooling") return bench::PolicyKind::NoCooling;
    if (s == "local_gm") return bench::PolicyKind::LocalGM;
    if (s == "rsc") return bench::PolicyKind::RSC;
    throw ConfigError("invalid value '" + s + "' for 'rounds.policies': expected no_cooling, local_gm or rsc");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

czgate::PulseProfile RunConfig::profile() const { return pulse ? *pulse : czgate::default_profile(model); }

RunConfig default_config() {
    RunConfig c;
    c.optimize_initial.amp = 0.6;
    c.optimize_initial.mod_freq_cycles = 1.2;
    c.optimize_initial.phase0 = 2.0;
    c.optimize_initial.detuning_slope = 0.0;
    c.optimize_initial.duration = 7.6 / c.model.omega;

    c.noise.loss_prob_gate = 1.02e-3;
    c.noise.recycle_prob_gate = 7.6e-4;
    c.noise.scatter_prob_gate = 2.77e-4;
    c.noise.prep_error = 0.005;
    c.noise.single_qubit_error = 6e-4;
    c.readout.thresholds = readout::Thresholds{6, 16};

    const double w_r = kTwoPi * 100e3, w_a = kTwoPi * 20e3, eta_r = 0.16;
    const double eta_a = eta_r * std::sqrt(w_r / w_a);
    c.motion.modes = {motional::thermal_mode(w_r, eta_r, 1.0, motional::ModeLabel::Radial),
                      motional::thermal_mode(w_a, eta_a, 1.0, motional::ModeLabel::Axial)};
    c.motion.direction_cosines = {1.0, 0.0};
    c.motion.k_eff = motional::counter_propagating_k(420e-9, 1013e-9);
    c.noise.doppler_sigma = motional::doppler_sigma(c.motion.modes, c.motion.direction_cosines, c.motion.k_eff,
                                                    c.motion.atom_mass);
    for (const auto& m : c.motion.modes) c.rsc.push_back(motional::default_rsc_config(m.lamb_dicke()));
    c.rsc_stages = bench::default_rsc_stages(c.motion.modes);
    return c;
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    Reader r(tree);
    RunConfig c = default_config();

    c.seed = r.unsigned_integer("run", "seed", c.seed);

    auto& m = c.model;
    m.omega = kTwoPi * r.required("model", "omega_hz", "two-photon Rabi frequency omega / 2 pi, Hz");
    m.delta_int = kTwoPi * r.number("model", "delta_int_hz", m.delta_int / kTwoPi);
    m.blockade_v = kTwoPi * r.number("model", "blockade_v_hz", m.blockade_v / kTwoPi);
    m.gamma_rydberg = r.number("model", "gamma_rydberg", m.gamma_rydberg);
    m.bbr_fraction = r.number("model", "bbr_fraction", m.bbr_fraction);
    m.gamma_intermediate = r.number("model", "gamma_intermediate", m.gamma_intermediate);
    m.rydberg_label = r.text("model", "rydberg_label", m.rydberg_label);
    checked("model", [&] { m.validate(); });

    static const char* pulse_keys[] = {"amp", "mod_freq_cycles", "phase0", "detuning_slope", "duration",
                                       "local_phase"};
    if (r.has_section("pulse")) {
        czgate::PulseProfile p;
        double* fields[] = {&p.amp, &p.mod_freq_cycles, &p.phase0, &p.detuning_slope, &p.duration, &p.local_phase};
        for (int i = 0; i < 6; ++i) *fields[i] = r.required("pulse", pulse_keys[i], "pulse profile field");
        checked("pulse", [&] { p.validate(); });
        c.pulse = p;
    }

    auto& o = c.optimize;
    o.budget = static_cast<std::size_t>(std::max<long long>(1, r.integer("optimize", "budget", 2000)));
    o.target_fidelity = r.number("optimize", "target_fidelity", o.target_fidelity);
    o.sim.steps_per_period = r.number("optimize", "steps_per_period", o.sim.steps_per_period);
    auto& init = c.optimize_initial;
    init.amp = r.number("optimize", "init_amp", init.amp);
    init.mod_freq_cycles = r.number("optimize", "init_mod_freq_cycles", init.mod_freq_cycles);
    init.phase0 = r.number("optimize", "init_phase0", init.phase0);
    init.detuning_slope = m.omega * r.number("optimize", "init_slope_per_omega", 0.0);
    init.duration = r.number("optimize", "init_omega_t", 7.6) / m.omega;
    checked("optimize", [&] {
        init.validate();
        if (!(o.sim.steps_per_period > 0.0)) throw std::invalid_argument("steps_per_period: must be > 0");
    });

    auto& n = c.noise;
    const auto doppler_override = r.raw("noise", "doppler_sigma");
    n.doppler_per_gate = r.boolean("noise", "doppler_per_gate", n.doppler_per_gate);
    n.loss_prob_gate = r.number("noise", "loss_prob_gate", n.loss_prob_gate);
    n.recycle_prob_gate = r.number("noise", "recycle_prob_gate", n.recycle_prob_gate);
    n.scatter_prob_gate = r.number("noise", "scatter_prob_gate", n.scatter_prob_gate);
    n.prep_error = r.number("noise", "prep_error", n.prep_error);
    n.single_qubit_error = r.number("noise", "single_qubit_error", n.single_qubit_error);
    n.depolarizing_prob_gate = r.number("noise", "depolarizing_prob_gate", n.depolarizing_prob_gate);
    c.rb.ideal_gate = r.boolean("noise", "ideal_gate", c.rb.ideal_gate);
    checked("noise", [&] { n.validate(); });


    auto& im = c.readout.imaging;
    im.lambda_bright1 = r.number("imaging", "lambda_bright1", im.lambda_bright1);
    im.lambda_dark1 = r.number("imaging", "lambda_dark1", im.lambda_dark1);
    im.lambda_present2 = r.number("imaging", "lambda_present2", im.lambda_present2);
    im.lambda_bg2 = r.number("imaging", "lambda_bg2", im.lambda_bg2);
    im.depump_prob = r.number("imaging", "depump_prob", im.depump_prob);
    im.loss_prob_stage1 = r.number("imaging", "loss_prob_stage1", im.loss_prob_stage1);
    im.pgc_detuning_offset = kTwoPi * r.number("imaging", "pgc_detuning_offset_hz", 0.0);
    const auto t1 = r.raw("imaging", "t1"), t2 = r.raw("imaging", "t2");
    if (t1.has_value() != t2.has_value()) throw ConfigError("keys 'imaging.t1' and 'imaging.t2' must be given together");
    c.readout.thresholds.reset();
    if (t1)
        c.readout.thresholds =
            readout::Thresholds{static_cast<int>(r.integer("imaging", "t1", 0)), static_cast<int>(r.integer("imaging", "t2", 0))};
    c.readout.calibration_samples = static_cast<int>(r.integer("imaging", "calibration_samples", 3000));
    c.readout.evaluation_samples = static_cast<int>(r.integer("imaging", "evaluation_samples", 10000));
    c.ideal_readout = r.boolean("imaging", "ideal_readout", false);
    checked("imaging", [&] {
        im.validate();
        if (c.readout.thresholds) c.readout.thresholds->validate();
        if (c.readout.calibration_samples < 1000)
            throw std::invalid_argument("calibration_samples: must be >= 1000");
        if (c.readout.evaluation_samples < 1) throw std::invalid_argument("evaluation_samples: must be >= 1");
    });

    const double w_r = kTwoPi * r.number("motional", "radial_trap_hz", 100e3);
    const double w_a = kTwoPi * r.number("motional", "axial_trap_hz", 20e3);
    const double eta_r = r.number("motional", "radial_lamb_dicke", 0.16);
    const double eta_a = r.number("motional", "axial_lamb_dicke", w_r > 0 && w_a > 0 ? eta_r * std::sqrt(w_r / w_a) : 0.0);
    const double nbar_r = r.number("motional", "radial_nbar", 1.0);
    const double nbar_a = r.number("motional", "axial_nbar", 1.0);
    c.motion.direction_cosines = {r.number("motional", "radial_cos", 1.0), r.number("motional", "axial_cos", 0.0)};
    const double l1 = r.number("motional", "beam1_nm", 420.0), l2 = r.number("motional", "beam2_nm", 1013.0);
    checked("motional", [&] {
        if (!(l1 > 0.0 && l2 > 0.0)) throw std::invalid_argument("beam1_nm, beam2_nm: must be > 0");
        c.motion.k_eff = motional::counter_propagating_k(l1 * 1e-9, l2 * 1e-9);
        c.motion.modes = {motional::thermal_mode(w_r, eta_r, nbar_r, motional::ModeLabel::Radial),
                          motional::thermal_mode(w_a, eta_a, nbar_a, motional::ModeLabel::Axial)};
    });
    // Gate dephasing width follows the motional state unless pinned in [noise].
    n.doppler_sigma = doppler_override ? r.number("noise", "doppler_sigma", 0.0)
                                       : motional::doppler_sigma(c.motion.modes, c.motion.direction_cosines,
                                                                 c.motion.k_eff, c.motion.atom_mass);
    checked("noise", [&] { n.validate(); });

    const double carrier = kTwoPi * r.number("rsc", "carrier_rabi_hz", motional::kDefaultRscCarrierRabi / kTwoPi);
    const double heating = r.number("rsc", "pump_heating", motional::kDefaultPumpHeating);
    const double area = r.number("rsc", "pulse_area", motional::kDefaultRscPulseArea);
    const int cycles = static_cast<int>(r.integer("rsc", "cycles", motional::kDefaultRscCycles));
    std::string stages_default;
    for (const auto& s : bench::kDefaultRscStages)
        stages_default += (stages_default.empty() ? "" : ", ") + format_double(s.pulse_area) + ":" +
                          std::to_string(s.cycles_per_mode);
    const std::string stages = r.text("rsc", "stages", stages_default);
    c.rsc.clear();
    c.rsc_stages.clear();
    checked("rsc", [&] {
        if (!(area > 0.0)) throw std::invalid_argument("pulse_area: must be > 0");
        for (const auto& mode : c.motion.modes) {
            motional::RscConfig cfg{carrier, area / (mode.lamb_dicke() * carrier), heating, cycles};
            cfg.validate();
            c.rsc.push_back(cfg);
        }
        for (const auto& item : split(stages, ',')) {
            const auto parts = split(item, ':');
            double a = 0.0;
            int k = -1;
            if (parts.size() == 2) {
                const auto* e0 = parts[0].data() + parts[0].size();
                const auto* e1 = parts[1].data() + parts[1].size();
                const auto r0 = std::from_chars(parts[0].data(), e0, a);
                const auto r1 = std::from_chars(parts[1].data(), e1, k);
                if (r0.ptr != e0 || r1.ptr != e1 || r0.ec != std::errc{} || r1.ec != std::errc{}) k = -1;
            }
            if (!(a > 0.0) || k < 0) throw std::invalid_argument("stages: expected 'area:cycles, ...' (got '" + item + "')");
            bench::RscStage st;
            for (const auto& mode : c.motion.modes)
                st.per_mode.push_back({carrier, a / (mode.lamb_dicke() * carrier), heating, k});
            st.cycles = k * static_cast<int>(c.motion.modes.size());
            c.rsc_stages.push_back(std::move(st));
        }
    });

    auto& sb = c.sideband;
    sb.probe_rabi = kTwoPi * r.number("sideband", "probe_rabi_hz", sb.probe_rabi / kTwoPi);
    sb.probe_time = r.number("sideband", "probe_time", sb.probe_time);
    sb.step = kTwoPi * r.number("sideband", "step_hz", sb.step / kTwoPi);
    sb.radial_nbar = r.number("sideband", "radial_nbar", nbar_r);
    sb.axial_nbar = r.number("sideband", "axial_nbar", nbar_a);
    checked("sideband", [&] {
        if (!(sb.probe_rabi > 0.0)) throw std::invalid_argument("probe_rabi_hz: must be > 0");
        if (!(sb.probe_time > 0.0)) throw std::invalid_argument("probe_time: must be > 0");
        if (!(sb.step > 0.0)) throw std::invalid_argument("step_hz: must be > 0");
        if (!(sb.radial_nbar >= 0.0 && sb.axial_nbar >= 0.0)) throw std::invalid_argument("nbar: must be >= 0");
    });

    auto& rb = c.rb;
    if (const auto list = r.raw("rb", "n_cz_list")) {
        rb.n_cz_list.clear();
        for (const auto& item : split(*list, ',')) {
            int v = 0;
            const auto* end = item.data() + item.size();
            const auto [ptr, ec] = std::from_chars(item.data(), end, v);
            if (ec != std::errc{} || ptr != end) Reader::bad("rb", "n_cz_list", *list, "comma-separated even integers");
            rb.n_cz_list.push_back(v);
        }
    }
    rb.randomizations = static_cast<int>(r.integer("rb", "randomizations", rb.randomizations));
    rb.shots = static_cast<int>(r.integer("rb", "shots", rb.shots));
    rb.sim.steps_per_period = r.number("rb", "steps_per_period", rb.sim.steps_per_period);
    rb.record_shots = r.boolean("rb", "record_shots", true);
    rb.seed = c.seed;
    checked("rb", [&] { rb.validate(); });

    auto& ro = c.rounds;
    ro.n_rounds = static_cast<int>(r.integer("rounds", "n_rounds", ro.n_rounds));
    if (const auto pol = r.raw("rounds", "policies")) {
        ro.policies.clear();
        for (const auto& item : split(*pol, ',')) ro.policies.push_back(parse_policy(item));
        if (ro.policies.empty()) throw ConfigError("key 'rounds.policies' must list at least one policy");
    }
    ro.heating_per_round = r.number("rounds", "heating_per_round", ro.heating_per_round);
    ro.gm_floor = r.number("rounds", "gm_floor", ro.gm_floor);
    checked("rounds", [&] {
        if (ro.n_rounds < 1) throw std::invalid_argument("n_rounds: must be >= 1");
        if (!(ro.heating_per_round >= 0.0)) throw std::invalid_argument("heating_per_round: must be >= 0");
        if (!(ro.gm_floor >= 0.0)) throw std::invalid_argument("gm_floor: must be >= 0");
    });

    c.rabi.t_max = r.number("rabi", "t_max", c.rabi.t_max);
    c.rabi.points = static_cast<int>(r.integer("rabi", "points", c.rabi.points));
    checked("rabi", [&] {
        if (!(c.rabi.t_max > 0.0)) throw std::invalid_argument("t_max: must be > 0");
        if (c.rabi.points < 2) throw std::invalid_argument("points: must be >= 2");
    });

    r.reject_unknown();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string profile_record(const czgate::PulseProfile& p) {
    std::string s = "[pulse]\n";
    s += "amp = " + format_double(p.amp) + "\n";
    s += "mod_freq_cycles = " + format_double(p.mod_freq_cycles) + "\n";
    s += "phase0 = " + format_double(p.phase0) + "\n";
    s += "detuning_slope = " + format_double(p.detuning_slope) + "\n";
    s += "duration = " + format_double(p.duration) + "\n";
    s += "local_phase = " + format_double(p.local_phase) + "\n";
    return s;
}

}  // namespace rydberg::cli
