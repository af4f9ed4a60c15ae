// experiment.hpp - seeded Monte-Carlo experiments and their CSV output.
//
// Every trial draws from derive_stream(seed, trial, domain); results are
// reduced in trial order, so output does not depend on the worker count.

#pragma once

#include "afbm/afdm.hpp"
#include "afbm/channel.hpp"
#include "afbm/detection.hpp"
#include "afbm/metrics.hpp"
#include "afbm/modem.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace afbm {

/// Invalid or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Scheme { Afbm, Afdm };
enum class DetectorChoice { Gabp, Lmmse, Both };

/// What the AFBM detectors see. Filtered: r_bar = G^H r against H_bar with
/// scalar noise, as in the reference receiver. Received: r itself against
/// H G (I_K (x) Q_P C_f) Xi, where the noise is white.
enum class Observation { Filtered, Received };

std::string to_string(Scheme s);
std::string to_string(DetectorChoice d);
DetectorChoice detector_choice_from_string(const std::string& name);

struct AfdmOptions {
    std::optional<Index> prefix_length;  // defaults to the channel's max delay
    double c2 = 0.0;
};

struct OobeOptions {
    Index frames = 500;
    PsdOptions psd;
};

struct AmbiguityOptions {
    Index max_delay = 16;
    double max_doppler = 8.0;
    double doppler_step = 0.5;
};

struct ExperimentConfig {
    WaveformParams waveform;             // filter/O/c1 are resolved per run
    std::vector<FilterKind> filters{FilterKind::Phydyas};
    std::map<FilterKind, double> overlap;  // explicit O per filter; default_overlap otherwise
    std::optional<double> c1;              // unset: default_c1(P, f_max, xi)
    ChannelConfig channel;
    GaBPConfig detector;
    DetectorChoice detector_choice = DetectorChoice::Gabp;
    Observation observation = Observation::Filtered;
    std::vector<double> snr_grid_db{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
    Index trials_per_point = 100;
    std::uint64_t seed = 1;
    std::vector<Scheme> schemes{Scheme::Afbm};
    std::vector<Index> p_sweep;  // empty: waveform.P only
    AfdmOptions afdm;
    OobeOptions oobe;
    AmbiguityOptions ambiguity;
    int workers = 1;

    /// Throws ConfigError, including when the guard condition fails for any P in use.
    void validate() const;

    std::vector<Index> chirp_lengths() const;
    double overlap_for(FilterKind kind) const;
    /// Waveform for one (filter, P) combination with O and c1 resolved.
    WaveformParams resolved_waveform(FilterKind kind, Index P) const;
    /// AFDM frame parameters matched to the AFBM payload (N_a = L).
    AfdmParams resolved_afdm() const;
    /// Number of AFDM frames carrying one AFBM payload.
    Index afdm_frames() const;
};

/// L=128, P=256, N=256, K=8, f_c = 4 GHz, three paths; both prototype filters.
ExperimentConfig reference_config();

/// Parses the JSON form. Unknown keys and type mismatches throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved configuration, including every defaulted choice.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical resolved JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Runs fn(i) for i in [0, count) on `workers` threads.
void parallel_for(Index count, int workers, const std::function<void(Index)>& fn);

struct BerRow {
    std::string scheme;
    std::string filter;
    Index P = 0;
    double snr_db = 0.0;
    double ebn0_db = 0.0;
    Index trials = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t bits = 0;
    double ber = 0.0;
    std::string detector;
    std::uint64_t seed = 0;
};

std::vector<BerRow> run_ber_sweep(const ExperimentConfig& cfg);
std::string ber_csv(const ExperimentConfig& cfg, const std::vector<BerRow>& rows);

struct SchemeSpectrum {
    std::string scheme;  // "AFDM", "AFBM-hermite", ...
    PsdReport psd;
    SpectrumBand band;
    std::vector<double> papr_db;  // one per frame
};

std::vector<SchemeSpectrum> run_oobe(const ExperimentConfig& cfg);
std::string oobe_csv(const ExperimentConfig& cfg, const std::vector<SchemeSpectrum>& spectra);
std::string oobe_summary_csv(const ExperimentConfig& cfg, const std::vector<SchemeSpectrum>& spectra);
std::string papr_csv(const ExperimentConfig& cfg, const std::vector<SchemeSpectrum>& spectra);

struct SchemeAmbiguity {
    std::string scheme;
    MetricRecord surface;
};

std::vector<SchemeAmbiguity> run_ambiguity(const ExperimentConfig& cfg);
std::string ambiguity_csv(const ExperimentConfig& cfg, const std::vector<SchemeAmbiguity>& surfaces);

struct LoopbackEntry {
    std::string filter;
    Index P = 0;
    double max_error = 0.0;          // max |demodulate(modulate(x)) - x| over all frames
    double max_diag_deviation = 0.0; // max |diag(H_eff) - 1|
    double max_offdiag = 0.0;        // max |H_eff(i,j)|, i != j
    double compensation_min = 0.0;
    double compensation_max = 0.0;
    double energy_ratio = 0.0;       // mean ||s||^2 / ||x||^2
    double noise_offdiag_ratio = 0.0; // ||offdiag(G^T G)||_F / ||G^T G||_F, colouring of G^H n
    bool guard_ok = true;
};

struct LoopbackReport {
    std::vector<LoopbackEntry> entries;
    Index frames = 0;
    double tolerance = 1e-6;
    bool passed() const;
};

LoopbackReport run_loopback(const ExperimentConfig& cfg, Index frames = 100);
std::string loopback_text(const LoopbackReport& report);
nlohmann::json loopback_json(const ExperimentConfig& cfg, const LoopbackReport& report);

/// Occupied band of an AFBM frame for the given waveform.
SpectrumBand afbm_band(const WaveformParams& params);

/// "%.17g"
std::string format_double(double v);

}  // namespace afbm
