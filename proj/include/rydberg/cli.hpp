#pragma once

// Run configuration, subcommands and artifact emission for the rydsim tool.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rydberg/bench.hpp"
#include "rydberg/czgate.hpp"
#include "rydberg/motional.hpp"
#include "rydberg/readout.hpp"

namespace rydberg::cli {

inline constexpr std::string_view kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigError = 1, kNotConverged = 2 };

// Raised for unreadable, malformed or invalid configuration and for I/O
// failures; the message names the offending key or path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SidebandSettings {
    double probe_rabi = czgate::kTwoPi * 1.0e3;  // rad/s
    double probe_time = 250e-6;                  // s
    double step = czgate::kTwoPi * 250.0;        // rad/s
    double radial_nbar = 1.0;
    double axial_nbar = 1.0;
};

struct ReadoutSettings {
    readout::ImagingParams imaging;
    std::optional<readout::Thresholds> thresholds;  // calibrated on the fly when absent
    int calibration_samples = 3000;                 // per class
    int evaluation_samples = 10000;                 // per class
};

struct RoundsSettings {
    int n_rounds = 5;
    std::vector<bench::PolicyKind> policies{bench::PolicyKind::NoCooling, bench::PolicyKind::LocalGM,
                                            bench::PolicyKind::RSC};
    double heating_per_round = 200.0;
    double gm_floor = 4.0;
};

struct RabiSettings {
    double t_max = 1.0e-6;  // s
    int points = 401;
};

struct RunConfig {
    std::uint64_t seed = 20240601;
    czgate::BlockadeModel model;
    std::optional<czgate::PulseProfile> pulse;  // defaults to czgate::default_profile(model)
    czgate::PulseProfile optimize_initial;
    czgate::OptimizeOptions optimize;
    bench::NoiseModel noise;
    ReadoutSettings readout;
    bool ideal_readout = false;
    bench::MotionConfig motion;
    std::vector<motional::RscConfig> rsc;  // per mode
    std::vector<bench::RscStage> rsc_stages;
    SidebandSettings sideband;
    bench::RBConfig rb;
    RoundsSettings rounds;
    RabiSettings rabi;

    czgate::PulseProfile profile() const;
};

// Built-in defaults; configs/default.ini spells out the same values.
RunConfig default_config();

// Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// The [pulse] section for a profile, in the run-config format.
std::string profile_record(const czgate::PulseProfile& p);

std::string sha256_hex(std::string_view data);

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    int workers = 1;
};

struct CommandResult {
    int exit_code = kOk;
    std::string summary;
    std::map<std::string, std::string> files;  // name -> contents, written to the out dir
};

CommandResult cmd_optimize_pulse(const RunConfig& cfg);
CommandResult cmd_rb(const RunConfig& cfg);
CommandResult cmd_rounds(const RunConfig& cfg);
CommandResult cmd_sideband(const RunConfig& cfg);
CommandResult cmd_readout(const RunConfig& cfg);
CommandResult cmd_rabi(const RunConfig& cfg);

inline const std::vector<std::string_view> kCommands{"optimize-pulse", "rb", "rounds", "sideband", "readout", "rabi"};

// Loads the config, applies overrides, runs the command, writes its files and
// run_manifest.json into opts.out. Returns the process exit code; errors are
// reported on stderr.
int run(std::string_view command, const RunOptions& opts);

}  // namespace rydberg::cli
