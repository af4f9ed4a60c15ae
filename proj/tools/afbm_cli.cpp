// afbm - command-line front end for the BER, spectrum, ambiguity and
// loopback experiments.
//
//   afbm ber --config cfg.json --out results/ --workers 4 --detector both
//
// Exit codes: 0 success, 2 configuration error, 3 validation failure.

#include "afbm/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kConfigError = 2;
constexpr int kValidationFailure = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> workers;
    std::optional<std::string> detector;
};

afbm::ExperimentConfig resolve(const Options& opt) {
    afbm::ExperimentConfig cfg = opt.config.empty() ? afbm::reference_config() : afbm::load_config(opt.config);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.workers) cfg.workers = *opt.workers;
    if (opt.detector) {
        try {
            cfg.detector_choice = afbm::detector_choice_from_string(*opt.detector);
        } catch (const std::invalid_argument& e) {
            throw afbm::ConfigError(e.what());
        }
    }
    cfg.validate();
    return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path.string());
    }
    f << text;
    std::printf("wrote %s\n", path.string().c_str());
}

std::filesystem::path out_dir(const Options& opt) {
    std::filesystem::path dir(opt.out);
    std::filesystem::create_directories(dir);
    return dir;
}

int cmd_ber(const Options& opt) {
    const auto cfg = resolve(opt);
    const auto rows = afbm::run_ber_sweep(cfg);
    write_file(out_dir(opt) / "ber.csv", afbm::ber_csv(cfg, rows));
    return 0;
}

int cmd_oobe(const Options& opt) {
    const auto cfg = resolve(opt);
    const auto spectra = afbm::run_oobe(cfg);
    const auto dir = out_dir(opt);
    write_file(dir / "psd.csv", afbm::oobe_csv(cfg, spectra));
    write_file(dir / "oobe_summary.csv", afbm::oobe_summary_csv(cfg, spectra));
    write_file(dir / "papr_ccdf.csv", afbm::papr_csv(cfg, spectra));
    for (const auto& s : spectra) {
        std::printf("%-14s OOBE %.2f dB\n", s.scheme.c_str(), s.psd.oobe_db);
    }
    return 0;
}

int cmd_ambiguity(const Options& opt) {
    const auto cfg = resolve(opt);
    const auto surfaces = afbm::run_ambiguity(cfg);
    write_file(out_dir(opt) / "ambiguity.csv", afbm::ambiguity_csv(cfg, surfaces));
    for (const auto& s : surfaces) {
        std::printf("%-14s main lobe: delay %ld cells, doppler %ld cells\n", s.scheme.c_str(),
                    static_cast<long>(afbm::main_lobe_width(s.surface, 0)),
                    static_cast<long>(afbm::main_lobe_width(s.surface, 1)));
    }
    return 0;
}

int cmd_loopback(const Options& opt) {
    const auto cfg = resolve(opt);
    const auto report = afbm::run_loopback(cfg);
    std::fputs(afbm::loopback_text(report).c_str(), stdout);
    write_file(out_dir(opt) / "loopback.json", afbm::loopback_json(cfg, report).dump(2) + "\n");
    return report.passed() ? 0 : kValidationFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AFBM / AFDM simulation harness"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&opt](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON experiment configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "Master seed (overrides the config)");
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--detector", opt.detector, "gabp, lmmse or both")
            ->check(CLI::IsMember({"gabp", "lmmse", "both"}));
    };
    auto* ber = app.add_subcommand("ber", "Monte-Carlo BER sweep");
    auto* oobe = app.add_subcommand("oobe", "Power spectral density, OOBE and PAPR");
    auto* amb = app.add_subcommand("ambiguity", "Delay-Doppler ambiguity surfaces");
    auto* loop = app.add_subcommand("loopback", "Noise-free modulate/demodulate validation");
    for (auto* s : {ber, oobe, amb, loop}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (*ber) return cmd_ber(opt);
        if (*oobe) return cmd_oobe(opt);
        if (*amb) return cmd_ambiguity(opt);
        if (*loop) return cmd_loopback(opt);
    } catch (const afbm::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
