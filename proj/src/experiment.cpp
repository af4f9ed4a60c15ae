#include "afbm/experiment.hpp"

#include "afbm/transforms.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace afbm {

namespace {

using nlohmann::json;

// Stream domains; one per independent use of a trial's randomness.
constexpr std::uint64_t kBitsDomain = 1;
constexpr std::uint64_t kPathsDomain = 2;
constexpr std::uint64_t kNoiseDomain = 3;
constexpr std::uint64_t kOobeDomain = 4;
constexpr std::uint64_t kAmbiguityDomain = 5;
constexpr std::uint64_t kLoopbackDomain = 6;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) {
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
        }
    }
}

template <typename T>
T get_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

Index get_index(const json& j, const std::string& where) {
    if (!j.is_number_integer()) {
        throw ConfigError(where + ": expected an integer");
    }
    return get_as<Index>(j, where);
}

double get_number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ConfigError(where + ": expected a number");
    }
    return get_as<double>(j, where);
}

FilterKind parse_filter(const json& j, const std::string& where) {
    if (!j.is_string()) {
        throw ConfigError(where + ": expected a filter name");
    }
    try {
        return filter_kind_from_string(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

Scheme parse_scheme(const json& j, const std::string& where) {
    const std::string s = j.is_string() ? j.get<std::string>() : std::string();
    if (s == "AFBM" || s == "afbm") return Scheme::Afbm;
    if (s == "AFDM" || s == "afdm") return Scheme::Afdm;
    throw ConfigError(where + ": expected \"AFBM\" or \"AFDM\"");
}

template <typename T, typename F>
std::vector<T> one_or_many(const json& j, F parse, const std::string& where) {
    std::vector<T> out;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse(j[i], where + "[" + std::to_string(i) + "]"));
    } else {
        out.push_back(parse(j, where));
    }
    if (out.empty()) {
        throw ConfigError(where + ": empty list");
    }
    return out;
}

void parse_waveform(const json& j, ExperimentConfig& cfg) {
    check_keys(j, {"L", "K", "P", "N", "O", "c1", "c2", "filter", "symbol_energy"}, "waveform");
    auto& w = cfg.waveform;
    if (j.contains("L")) w.L = get_index(j["L"], "waveform.L");
    if (j.contains("K")) w.K = get_index(j["K"], "waveform.K");
    if (j.contains("P")) w.P = get_index(j["P"], "waveform.P");
    if (j.contains("N")) w.N = get_index(j["N"], "waveform.N");
    if (j.contains("c2")) w.c2 = get_number(j["c2"], "waveform.c2");
    if (j.contains("symbol_energy")) w.symbol_energy = get_number(j["symbol_energy"], "waveform.symbol_energy");
    if (j.contains("c1")) {
        if (j["c1"].is_null()) {
            cfg.c1.reset();
        } else {
            cfg.c1 = get_number(j["c1"], "waveform.c1");
        }
    }
    if (j.contains("filter")) {
        cfg.filters = one_or_many<FilterKind>(j["filter"], parse_filter, "waveform.filter");
    }
    if (j.contains("O")) {
        const json& o = j["O"];
        cfg.overlap.clear();
        if (o.is_null()) {
        } else if (o.is_object()) {
            for (const auto& item : o.items()) {
                const FilterKind k = parse_filter(json(item.key()), "waveform.O");
                cfg.overlap[k] = get_number(item.value(), "waveform.O." + item.key());
            }
        } else {
            const double v = get_number(o, "waveform.O");
            for (FilterKind k : cfg.filters) cfg.overlap[k] = v;
        }
    }
}

void parse_channel(const json& j, ChannelConfig& c) {
    check_keys(j, {"R", "l_max", "f_max", "xi", "f_c", "noise_var", "power_profile", "doppler_reference"}, "channel");
    if (j.contains("R")) {
        c.paths = static_cast<int>(get_index(j["R"], "channel.R"));
        if (!j.contains("power_profile") && c.paths > 0) {
            c.power_profile.assign(static_cast<std::size_t>(c.paths), 1.0 / c.paths);
        }
    }
    if (j.contains("l_max")) c.max_delay = get_index(j["l_max"], "channel.l_max");
    if (j.contains("f_max")) c.max_doppler = get_number(j["f_max"], "channel.f_max");
    if (j.contains("xi")) c.guard_width = get_index(j["xi"], "channel.xi");
    if (j.contains("f_c")) c.carrier_hz = get_number(j["f_c"], "channel.f_c");
    if (j.contains("noise_var")) c.noise_var = get_number(j["noise_var"], "channel.noise_var");
    if (j.contains("doppler_reference")) {
        const json& d = j["doppler_reference"];
        if (d == "frame") {
            c.doppler_reference = DopplerReference::Frame;
        } else if (d == "subcarrier") {
            c.doppler_reference = DopplerReference::Subcarrier;
        } else {
            throw ConfigError("channel.doppler_reference: expected \"frame\" or \"subcarrier\"");
        }
    }
    if (j.contains("power_profile")) {
        c.power_profile.clear();
        const json& p = j["power_profile"];
        if (!p.is_array()) {
            throw ConfigError("channel.power_profile: expected an array");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            c.power_profile.push_back(get_number(p[i], "channel.power_profile"));
        }
    }
}

void parse_detector(const json& j, ExperimentConfig& cfg) {
    check_keys(j, {"i_max", "beta", "eps", "convergence_tol", "kind", "observation"}, "detector");
    auto& d = cfg.detector;
    if (j.contains("i_max")) d.max_iterations = static_cast<int>(get_index(j["i_max"], "detector.i_max"));
    if (j.contains("beta")) d.damping = get_number(j["beta"], "detector.beta");
    if (j.contains("eps")) d.eps = get_number(j["eps"], "detector.eps");
    if (j.contains("convergence_tol")) {
        if (j["convergence_tol"].is_null()) {
            d.convergence_tol.reset();
        } else {
            d.convergence_tol = get_number(j["convergence_tol"], "detector.convergence_tol");
        }
    }
    if (j.contains("kind")) {
        if (!j["kind"].is_string()) {
            throw ConfigError("detector.kind: expected a string");
        }
        try {
            cfg.detector_choice = detector_choice_from_string(j["kind"].get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("detector.kind: ") + e.what());
        }
    }
    if (j.contains("observation")) {
        const json& o = j["observation"];
        if (o == "filtered") {
            cfg.observation = Observation::Filtered;
        } else if (o == "received") {
            cfg.observation = Observation::Received;
        } else {
            throw ConfigError("detector.observation: expected \"filtered\" or \"received\"");
        }
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string csv_preamble(const ExperimentConfig& cfg, const std::string& what) {
    std::string out = "# afbm " + what + "\n";
    out += "# config_hash: " + config_hash(cfg) + "\n";
    out += "# config: " + to_json(cfg).dump() + "\n";
    return out;
}

std::uint64_t count_errors(const Bits& a, const Bits& b) { return ber(a, b).errors; }

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_string(Scheme s) { return s == Scheme::Afbm ? "AFBM" : "AFDM"; }

std::string to_string(DetectorChoice d) {
    switch (d) {
        case DetectorChoice::Gabp:
            return "gabp";
        case DetectorChoice::Lmmse:
            return "lmmse";
        case DetectorChoice::Both:
            return "both";
    }
    return "gabp";
}

DetectorChoice detector_choice_from_string(const std::string& name) {
    if (name == "gabp") return DetectorChoice::Gabp;
    if (name == "lmmse") return DetectorChoice::Lmmse;
    if (name == "both") return DetectorChoice::Both;
    throw std::invalid_argument("unknown detector \"" + name + "\" (gabp, lmmse, both)");
}

std::vector<Index> ExperimentConfig::chirp_lengths() const {
    return p_sweep.empty() ? std::vector<Index>{waveform.P} : p_sweep;
}

double ExperimentConfig::overlap_for(FilterKind kind) const {
    const auto it = overlap.find(kind);
    return it != overlap.end() ? it->second : default_overlap(kind);
}

WaveformParams ExperimentConfig::resolved_waveform(FilterKind kind, Index P) const {
    WaveformParams w = waveform;
    w.filter = kind;
    w.O = overlap_for(kind);
    w.P = P;
    w.c1 = c1 ? *c1 : default_c1(P, channel.max_doppler, channel.guard_width);
    return w;
}

AfdmParams ExperimentConfig::resolved_afdm() const {
    AfdmParams a;
    a.size = waveform.L;
    a.c1 = default_c1(a.size, channel.max_doppler, channel.guard_width);
    a.c2 = afdm.c2;
    a.prefix_length = afdm.prefix_length ? *afdm.prefix_length : channel.max_delay;
    return a;
}

Index ExperimentConfig::afdm_frames() const { return waveform.K / 2; }

void ExperimentConfig::validate() const {
    try {
        channel.validate();
        detector.validate();
        for (FilterKind f : filters) {
            for (Index P : chirp_lengths()) resolved_waveform(f, P).validate();
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (filters.empty()) {
        throw ConfigError("at least one filter is required");
    }
    if (schemes.empty()) {
        throw ConfigError("at least one scheme is required");
    }
    if (trials_per_point < 1) {
        throw ConfigError("trials_per_point must be >= 1");
    }
    if (snr_grid_db.empty()) {
        throw ConfigError("snr_grid_db must not be empty");
    }
    for (std::size_t i = 1; i < snr_grid_db.size(); ++i) {
        if (!(snr_grid_db[i] > snr_grid_db[i - 1])) {
            throw ConfigError("snr_grid_db must be strictly increasing");
        }
    }
    if (workers < 1) {
        throw ConfigError("workers must be >= 1");
    }
    for (Index P : chirp_lengths()) {
        if (!guard_condition(P, channel.max_delay, channel.max_doppler, channel.guard_width)) {
            throw ConfigError("guard condition 2(f_max+xi)(l_max+1)+l_max <= P violated for P=" + std::to_string(P));
        }
        if (channel.max_delay >= P) {
            throw ConfigError("l_max must be below P");
        }
    }
    if (std::find(schemes.begin(), schemes.end(), Scheme::Afdm) != schemes.end()) {
        if (waveform.K % 2 != 0) {
            throw ConfigError("AFDM comparison needs even K (K/2 frames of L symbols per payload)");
        }
        try {
            resolved_afdm().validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("afdm: ") + e.what());
        }
        if (!guard_condition(waveform.L, channel.max_delay, channel.max_doppler, channel.guard_width)) {
            throw ConfigError("guard condition violated for the AFDM frame size N_a = L");
        }
    }
    if (oobe.frames < 1 || oobe.psd.zero_padding < 1) {
        throw ConfigError("oobe: frames and zero_padding must be >= 1");
    }
    if (!(oobe.psd.oobe_min_offset < oobe.psd.oobe_max_offset)) {
        throw ConfigError("oobe: min_offset must be below max_offset");
    }
    if (ambiguity.max_delay < 0 || !(ambiguity.max_doppler >= 0.0) || !(ambiguity.doppler_step > 0.0)) {
        throw ConfigError("ambiguity: need max_delay >= 0, max_doppler >= 0, doppler_step > 0");
    }
}

ExperimentConfig reference_config() {
    ExperimentConfig cfg;
    cfg.waveform.L = 128;
    cfg.waveform.K = 8;
    cfg.waveform.P = 256;
    cfg.waveform.N = 256;
    cfg.filters = {FilterKind::Hermite, FilterKind::Phydyas};
    cfg.schemes = {Scheme::Afbm, Scheme::Afdm};
    cfg.channel = ChannelConfig{};
    return cfg;
}

ExperimentConfig parse_config(const json& j) {
    check_keys(j,
               {"waveform", "channel", "detector", "snr_grid_db", "trials_per_point", "seed", "scheme", "p_sweep",
                "afdm", "oobe", "ambiguity", "workers", "resolved"},
               "config");
    ExperimentConfig cfg = reference_config();
    if (j.contains("waveform")) parse_waveform(j["waveform"], cfg);
    if (j.contains("channel")) parse_channel(j["channel"], cfg.channel);
    if (j.contains("detector")) parse_detector(j["detector"], cfg);
    cfg.detector.symbol_energy = cfg.waveform.symbol_energy;
    if (j.contains("snr_grid_db")) {
        const json& g = j["snr_grid_db"];
        if (!g.is_array()) {
            throw ConfigError("snr_grid_db: expected an array");
        }
        cfg.snr_grid_db.clear();
        for (const auto& v : g) cfg.snr_grid_db.push_back(get_number(v, "snr_grid_db"));
    }
    if (j.contains("trials_per_point")) cfg.trials_per_point = get_index(j["trials_per_point"], "trials_per_point");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
            throw ConfigError("seed: expected an unsigned integer");
        }
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("scheme")) cfg.schemes = one_or_many<Scheme>(j["scheme"], parse_scheme, "scheme");
    if (j.contains("p_sweep")) {
        const json& p = j["p_sweep"];
        cfg.p_sweep.clear();
        if (!p.is_null()) {
            if (!p.is_array()) {
                throw ConfigError("p_sweep: expected an array or null");
            }
            for (const auto& v : p) cfg.p_sweep.push_back(get_index(v, "p_sweep"));
        }
    }
    if (j.contains("afdm")) {
        const json& a = j["afdm"];
        check_keys(a, {"prefix_length", "c2"}, "afdm");
        if (a.contains("prefix_length")) {
            if (a["prefix_length"].is_null()) {
                cfg.afdm.prefix_length.reset();
            } else {
                cfg.afdm.prefix_length = get_index(a["prefix_length"], "afdm.prefix_length");
            }
        }
        if (a.contains("c2")) cfg.afdm.c2 = get_number(a["c2"], "afdm.c2");
    }
    if (j.contains("oobe")) {
        const json& o = j["oobe"];
        check_keys(o, {"frames", "zero_padding", "min_offset", "max_offset"}, "oobe");
        if (o.contains("frames")) cfg.oobe.frames = get_index(o["frames"], "oobe.frames");
        if (o.contains("zero_padding")) cfg.oobe.psd.zero_padding = get_index(o["zero_padding"], "oobe.zero_padding");
        if (o.contains("min_offset")) cfg.oobe.psd.oobe_min_offset = get_number(o["min_offset"], "oobe.min_offset");
        if (o.contains("max_offset")) cfg.oobe.psd.oobe_max_offset = get_number(o["max_offset"], "oobe.max_offset");
    }
    if (j.contains("ambiguity")) {
        const json& a = j["ambiguity"];
        check_keys(a, {"max_delay", "max_doppler", "doppler_step"}, "ambiguity");
        if (a.contains("max_delay")) cfg.ambiguity.max_delay = get_index(a["max_delay"], "ambiguity.max_delay");
        if (a.contains("max_doppler")) cfg.ambiguity.max_doppler = get_number(a["max_doppler"], "ambiguity.max_doppler");
        if (a.contains("doppler_step")) {
            cfg.ambiguity.doppler_step = get_number(a["doppler_step"], "ambiguity.doppler_step");
        }
    }
    if (j.contains("workers")) cfg.workers = static_cast<int>(get_index(j["workers"], "workers"));
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    json w;
    w["L"] = cfg.waveform.L;
    w["K"] = cfg.waveform.K;
    w["P"] = cfg.waveform.P;
    w["N"] = cfg.waveform.N;
    json o = json::object();
    json filters = json::array();
    for (FilterKind f : cfg.filters) {
        filters.push_back(to_string(f));
        o[to_string(f)] = cfg.overlap_for(f);
    }
    w["filter"] = filters;
    w["O"] = o;
    w["c1"] = cfg.c1 ? json(*cfg.c1) : json(nullptr);
    w["c2"] = cfg.waveform.c2;
    w["symbol_energy"] = cfg.waveform.symbol_energy;
    j["waveform"] = w;

    const auto& c = cfg.channel;
    j["channel"] = {{"R", c.paths},       {"l_max", c.max_delay},         {"f_max", c.max_doppler},
                    {"xi", c.guard_width}, {"f_c", c.carrier_hz},         {"noise_var", c.noise_var},
                    {"power_profile", c.power_profile},
                    {"doppler_reference", c.doppler_reference == DopplerReference::Frame ? "frame" : "subcarrier"}};

    const auto& d = cfg.detector;
    j["detector"] = {{"i_max", d.max_iterations},
                     {"beta", d.damping},
                     {"eps", d.eps},
                     {"convergence_tol", d.convergence_tol ? json(*d.convergence_tol) : json(nullptr)},
                     {"kind", to_string(cfg.detector_choice)},
                     {"observation", cfg.observation == Observation::Filtered ? "filtered" : "received"}};
    j["snr_grid_db"] = cfg.snr_grid_db;
    j["trials_per_point"] = cfg.trials_per_point;
    j["seed"] = cfg.seed;
    json schemes = json::array();
    for (Scheme s : cfg.schemes) schemes.push_back(to_string(s));
    j["scheme"] = schemes;
    j["p_sweep"] = cfg.p_sweep.empty() ? json(nullptr) : json(cfg.p_sweep);
    const AfdmParams a = cfg.resolved_afdm();
    j["afdm"] = {{"prefix_length", a.prefix_length}, {"c2", cfg.afdm.c2}};
    j["oobe"] = {{"frames", cfg.oobe.frames},
                 {"zero_padding", cfg.oobe.psd.zero_padding},
                 {"min_offset", cfg.oobe.psd.oobe_min_offset},
                 {"max_offset", cfg.oobe.psd.oobe_max_offset}};
    j["ambiguity"] = {{"max_delay", cfg.ambiguity.max_delay},
                      {"max_doppler", cfg.ambiguity.max_doppler},
                      {"doppler_step", cfg.ambiguity.doppler_step}};

    // Derived values, informational only; ignored when the file is parsed back.
    json r;
    json c1_by_p = json::object();
    for (Index P : cfg.chirp_lengths()) {
        c1_by_p[std::to_string(P)] = cfg.resolved_waveform(cfg.filters.front(), P).c1;
    }
    r["c1_by_P"] = c1_by_p;
    r["afdm"] = {{"N_a", a.size}, {"c1", a.c1}, {"frames_per_payload", cfg.afdm_frames()}};
    r["snr_definition"] = "E_S / noise_var per time-domain sample";
    r["ebn0_offset_db"] = 10.0 * std::log10(2.0);
    r["detector_noise"] = cfg.observation == Observation::Filtered
                              ? "noise_var * mean diag(G^H G) for AFBM, noise_var for AFDM"
                              : "noise_var, AFBM detectors see the unfiltered received frame";
    r["oobe_region"] = "offset from band centre in [min_offset, max_offset], modulo the sampling rate";
    r["ambiguity_threshold"] = 0.5;
    r["ambiguity_doppler_unit"] = "cycles per longest frame; shorter frames are zero-padded to it";
    r["p_sweep_default"] = {160, 192, 224, 256};
    r["doppler_model"] = c.doppler_reference == DopplerReference::Frame
                             ? "exp(-j2pi f n / M) over each scheme's own frame length M"
                             : "exp(-j2pi f n / N) with N the filter-bank DFT size (N_a for AFDM)";
    j["resolved"] = r;
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

void parallel_for(Index count, int workers, const std::function<void(Index)>& fn) {
    if (count <= 0) return;
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(std::min<Index>(count, 1 << 20))));
    if (n == 1) {
        for (Index i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// BER sweep

namespace {

struct BerCase {
    Scheme scheme;
    FilterKind filter;
    Index P;
};

std::vector<bool> detector_flags(DetectorChoice d) {
    return {d != DetectorChoice::Lmmse, d != DetectorChoice::Gabp};
}

// errors[snr * 2 + detector]
using TrialErrors = std::vector<std::uint64_t>;

TrialErrors afbm_trial(const ExperimentConfig& cfg, const AfbmModem& modem, Index trial) {
    const WaveformParams& p = modem.params();
    const std::size_t ns = cfg.snr_grid_db.size();
    TrialErrors err(ns * 2, 0);
    const std::uint64_t t = static_cast<std::uint64_t>(trial);

    Rng bits_rng = derive_stream(cfg.seed, t, kBitsDomain);
    const Bits bits = random_bits(bits_rng, 2 * p.payload());
    const ComplexVector x = qpsk_modulate(bits, p.symbol_energy);
    Rng path_rng = derive_stream(cfg.seed, t, kPathsDomain);
    auto paths = sample_paths(cfg.channel, path_rng);
    if (cfg.channel.doppler_reference == DopplerReference::Subcarrier) {
        paths = rescale_doppler(std::move(paths), p.frame_length(), p.N);
    }
    DoublyDispersiveChannel H(std::move(paths), p.frame_length(), p.c1);
    Rng noise_rng = derive_stream(cfg.seed, t, kNoiseDomain);
    const ComplexVector unit_noise = complex_gaussian_vector(noise_rng, p.frame_length(), 1.0);

    const ComplexVector hs = H.apply(modem.modulate(x));
    const bool filtered = cfg.observation == Observation::Filtered;
    EffectiveChannel eff;
    if (filtered) {
        eff = modem.effective_channel(H);
    } else {
        eff.hbar = H.apply(modem.transmit_matrix());
        eff.noise_scale = 1.0;
    }
    const auto use = detector_flags(cfg.detector_choice);
    for (std::size_t si = 0; si < ns; ++si) {
        const double nv = p.symbol_energy / std::pow(10.0, cfg.snr_grid_db[si] / 10.0) + cfg.channel.noise_var;
        const ComplexVector r = hs + std::sqrt(nv) * unit_noise;
        const ComplexVector obs = filtered ? modem.filter_adjoint(r) : r;
        const double det_nv = nv * eff.noise_scale;
        if (use[0]) {
            const GaBPResult g = gabp_detect(eff.hbar, obs, det_nv, cfg.detector);
            err[si * 2] = count_errors(hard_demap(g.estimate), bits);
        }
        if (use[1]) {
            err[si * 2 + 1] = count_errors(hard_demap(lmmse_detect(eff.hbar, obs, det_nv)), bits);
        }
    }
    return err;
}

TrialErrors afdm_trial(const ExperimentConfig& cfg, const AfdmParams& a, Index trial) {
    const std::size_t ns = cfg.snr_grid_db.size();
    TrialErrors err(ns * 2, 0);
    const std::uint64_t t = static_cast<std::uint64_t>(trial);
    const Index frames = cfg.afdm_frames();
    const Index n = a.size;
    const double es = cfg.waveform.symbol_energy;

    Rng bits_rng = derive_stream(cfg.seed, t, kBitsDomain);
    const Bits bits = random_bits(bits_rng, 2 * cfg.waveform.payload());
    const ComplexVector x = qpsk_modulate(bits, es);
    Rng path_rng = derive_stream(cfg.seed, t, kPathsDomain);
    const auto paths = sample_paths(cfg.channel, path_rng);
    Rng noise_rng = derive_stream(cfg.seed, t, kNoiseDomain);
    const ComplexVector unit_noise = complex_gaussian_vector(noise_rng, frames * n, 1.0);

    const ComplexMatrix H = channel_matrix(paths, n, a.c1);
    const ComplexMatrix w = afdm_matrix(a);
    const ComplexMatrix hdaf = w * H * w.adjoint();
    const auto use = detector_flags(cfg.detector_choice);
    ComplexVector y_clean(frames * n);
    ComplexVector w_noise(frames * n);
    for (Index f = 0; f < frames; ++f) {
        y_clean.segment(f * n, n) = hdaf * x.segment(f * n, n);
        w_noise.segment(f * n, n) = w * unit_noise.segment(f * n, n);
    }
    for (std::size_t si = 0; si < ns; ++si) {
        const double nv = es / std::pow(10.0, cfg.snr_grid_db[si] / 10.0) + cfg.channel.noise_var;
        const ComplexVector y = y_clean + std::sqrt(nv) * w_noise;
        ComplexVector xg(frames * n);
        ComplexVector xl(frames * n);
        for (Index f = 0; f < frames; ++f) {
            const ComplexVector yf = y.segment(f * n, n);
            if (use[0]) xg.segment(f * n, n) = gabp_detect(hdaf, yf, nv, cfg.detector).estimate;
            if (use[1]) xl.segment(f * n, n) = lmmse_detect(hdaf, yf, nv);
        }
        if (use[0]) err[si * 2] = count_errors(hard_demap(xg), bits);
        if (use[1]) err[si * 2 + 1] = count_errors(hard_demap(xl), bits);
    }
    return err;
}

}  // namespace

std::vector<BerRow> run_ber_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<BerCase> cases;
    for (Scheme s : cfg.schemes) {
        if (s == Scheme::Afdm) {
            cases.push_back({s, FilterKind::Rectangular, cfg.waveform.L});
            continue;
        }
        for (FilterKind f : cfg.filters) {
            for (Index P : cfg.chirp_lengths()) cases.push_back({s, f, P});
        }
    }
    const auto use = detector_flags(cfg.detector_choice);
    const std::size_t ns = cfg.snr_grid_db.size();
    const std::uint64_t bits_per_trial = 2 * static_cast<std::uint64_t>(cfg.waveform.payload());
    std::vector<BerRow> rows;
    for (const BerCase& c : cases) {
        std::vector<TrialErrors> per_trial(static_cast<std::size_t>(cfg.trials_per_point));
        if (c.scheme == Scheme::Afbm) {
            const AfbmModem modem(cfg.resolved_waveform(c.filter, c.P));
            parallel_for(cfg.trials_per_point, cfg.workers,
                         [&](Index t) { per_trial[static_cast<std::size_t>(t)] = afbm_trial(cfg, modem, t); });
        } else {
            const AfdmParams a = cfg.resolved_afdm();
            parallel_for(cfg.trials_per_point, cfg.workers,
                         [&](Index t) { per_trial[static_cast<std::size_t>(t)] = afdm_trial(cfg, a, t); });
        }
        for (std::size_t si = 0; si < ns; ++si) {
            for (int d = 0; d < 2; ++d) {
                if (!use[static_cast<std::size_t>(d)]) continue;
                BerRow row;
                row.scheme = to_string(c.scheme);
                row.filter = c.scheme == Scheme::Afbm ? to_string(c.filter) : "none";
                row.P = c.P;
                row.snr_db = cfg.snr_grid_db[si];
                row.ebn0_db = row.snr_db - 10.0 * std::log10(2.0);
                row.trials = cfg.trials_per_point;
                for (const auto& e : per_trial) row.bit_errors += e[si * 2 + static_cast<std::size_t>(d)];
                row.bits = bits_per_trial * static_cast<std::uint64_t>(cfg.trials_per_point);
                row.ber = static_cast<double>(row.bit_errors) / static_cast<double>(row.bits);
                row.detector = d == 0 ? "gabp" : "lmmse";
                row.seed = cfg.seed;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::string ber_csv(const ExperimentConfig& cfg, const std::vector<BerRow>& rows) {
    std::string out = csv_preamble(cfg, "ber");
    out += "scheme,filter,P,snr_db,ebn0_db,trials,bit_errors,bits,ber,detector,seed\n";
    for (const auto& r : rows) {
        out += r.scheme + "," + r.filter + "," + std::to_string(r.P) + "," + format_double(r.snr_db) + "," +
               format_double(r.ebn0_db) + "," + std::to_string(r.trials) + "," + std::to_string(r.bit_errors) +
               "," + std::to_string(r.bits) + "," + format_double(r.ber) + "," + r.detector + "," +
               std::to_string(r.seed) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectra

SpectrumBand afbm_band(const WaveformParams& params) {
    // P-grid input bin i lands on N-grid bin (N - P/2 + i) mod N; the L occupied
    // inputs form one circularly contiguous run starting at N - P/2.
    const double n = static_cast<double>(params.N);
    double c = (n - params.P / 2.0 + (params.L - 1) / 2.0) / n;
    c -= std::floor(c + 0.5);
    return {c, static_cast<double>(params.L) / n};
}

namespace {

Index afdm_oversampling(const ExperimentConfig& cfg) {
    if (cfg.waveform.N % cfg.waveform.L != 0) {
        throw ConfigError("AFDM rendering needs N divisible by L to share the AFBM sample rate");
    }
    return cfg.waveform.N / cfg.waveform.L;
}

ComplexVector afdm_payload_frame(const ExperimentConfig& cfg, const AfdmParams& a, const ComplexVector& x,
                                 Index os) {
    const Index frames = cfg.afdm_frames();
    std::vector<ComplexVector> parts;
    Index total = 0;
    for (Index f = 0; f < frames; ++f) {
        parts.push_back(afdm_oversampled_frame(x.segment(f * a.size, a.size), a, os));
        total += parts.back().size();
    }
    ComplexVector s(total);
    Index at = 0;
    for (const auto& p : parts) {
        s.segment(at, p.size()) = p;
        at += p.size();
    }
    return s;
}

SpectrumBand afdm_band(Index os) { return {0.0, 1.0 / static_cast<double>(os)}; }

struct SpectrumJob {
    std::string name;
    std::function<ComplexVector(const ComplexVector&)> render;
    SpectrumBand band;
};

std::vector<SpectrumJob> spectrum_jobs(const ExperimentConfig& cfg, std::vector<std::unique_ptr<AfbmModem>>& modems) {
    std::vector<SpectrumJob> jobs;
    const AfdmParams a = cfg.resolved_afdm();
    const Index os = afdm_oversampling(cfg);
    if (cfg.waveform.K % 2 != 0) {
        throw ConfigError("AFDM comparison needs even K");
    }
    jobs.push_back({"AFDM", [&cfg, a, os](const ComplexVector& x) { return afdm_payload_frame(cfg, a, x, os); },
                    afdm_band(os)});
    for (FilterKind f : cfg.filters) {
        modems.push_back(std::make_unique<AfbmModem>(cfg.resolved_waveform(f, cfg.waveform.P)));
        const AfbmModem* m = modems.back().get();
        jobs.push_back({"AFBM-" + to_string(f), [m](const ComplexVector& x) { return m->modulate(x); },
                        afbm_band(m->params())});
    }
    return jobs;
}

}  // namespace

std::vector<SchemeSpectrum> run_oobe(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::unique_ptr<AfbmModem>> modems;
    const auto jobs = spectrum_jobs(cfg, modems);
    const Index payload = cfg.waveform.payload();
    std::vector<SchemeSpectrum> out;
    for (const auto& job : jobs) {
        std::vector<ComplexVector> frames(static_cast<std::size_t>(cfg.oobe.frames));
        parallel_for(cfg.oobe.frames, cfg.workers, [&](Index i) {
            Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(i), kOobeDomain);
            const ComplexVector x = qpsk_modulate(random_bits(rng, 2 * payload), cfg.waveform.symbol_energy);
            frames[static_cast<std::size_t>(i)] = job.render(x);
        });
        SchemeSpectrum s;
        s.scheme = job.name;
        s.band = job.band;
        s.psd = psd_oobe(frames, job.band, cfg.oobe.psd);
        s.psd.record.metadata["scheme"] = job.name;
        s.psd.record.metadata["oobe_region"] = format_double(cfg.oobe.psd.oobe_min_offset) + ".." +
                                               format_double(cfg.oobe.psd.oobe_max_offset);
        for (const auto& f : frames) s.papr_db.push_back(papr_db(f));
        out.push_back(std::move(s));
    }
    return out;
}

std::string oobe_csv(const ExperimentConfig& cfg, const std::vector<SchemeSpectrum>& spectra) {
    std::string out = csv_preamble(cfg, "oobe psd");
    out += "scheme,freq_norm,psd_db\n";
    for (const auto& s : spectra) {
        const auto& f = s.psd.record.axes.front().values;
        for (std::size_t i = 0; i < f.size(); ++i) {
            out += s.scheme + "," + format_double(f[i]) + "," + format_double(s.psd.record.values[i]) + "\n";
        }
    }
    return out;
}

std::string oobe_summary_csv(const ExperimentConfig& cfg, const std::vector<SchemeSpectrum>& spectra) {
    std::string out = csv_preamble(cfg, "oobe summary");
    out += "scheme,oobe_db,band_center,band_width,frames,mean_papr_db\n";
    for (const auto& s : spectra) {
        double papr = 0.0;
        for (double v : s.papr_db) papr += v;
        papr /= static_cast<double>(std::max<std::size_t>(1, s.papr_db.size()));
        out += s.scheme + "," + format_double(s.psd.oobe_db) + "," + format_double(s.band.center) + "," +
               format_double(s.band.width) + "," + std::to_string(s.papr_db.size()) + "," + format_double(papr) +
               "\n";
    }
    return out;
}

std::string papr_csv(const ExperimentConfig& cfg, const std::vector<SchemeSpectrum>& spectra) {
    std::string out = csv_preamble(cfg, "papr ccdf");
    out += "scheme,papr_db,ccdf\n";
    for (const auto& s : spectra) {
        for (int k = 0; k <= 60; ++k) {
            const double thr = 0.25 * k;
            std::size_t above = 0;
            for (double v : s.papr_db) above += v > thr ? 1U : 0U;
            const double ccdf = static_cast<double>(above) / static_cast<double>(s.papr_db.size());
            out += s.scheme + "," + format_double(thr) + "," + format_double(ccdf) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ambiguity

std::vector<SchemeAmbiguity> run_ambiguity(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::unique_ptr<AfbmModem>> modems;
    const auto jobs = spectrum_jobs(cfg, modems);
    std::vector<Index> delays;
    for (Index l = -cfg.ambiguity.max_delay; l <= cfg.ambiguity.max_delay; ++l) delays.push_back(l);
    std::vector<double> dopplers;
    const auto steps = static_cast<long>(std::floor(cfg.ambiguity.max_doppler / cfg.ambiguity.doppler_step + 1e-9));
    for (long k = -steps; k <= steps; ++k) dopplers.push_back(static_cast<double>(k) * cfg.ambiguity.doppler_step);

    Rng rng = derive_stream(cfg.seed, 0, kAmbiguityDomain);
    const ComplexVector x = qpsk_modulate(random_bits(rng, 2 * cfg.waveform.payload()), cfg.waveform.symbol_energy);
    // Zero-padding every frame to the longest one gives f the same physical
    // meaning (cycles per that many samples) for all schemes.
    std::vector<ComplexVector> frames;
    Index longest = 0;
    for (const auto& job : jobs) {
        frames.push_back(job.render(x));
        longest = std::max(longest, frames.back().size());
    }
    std::vector<SchemeAmbiguity> out(jobs.size());
    parallel_for(static_cast<Index>(jobs.size()), cfg.workers, [&](Index i) {
        const auto k = static_cast<std::size_t>(i);
        ComplexVector padded = ComplexVector::Zero(longest);
        padded.head(frames[k].size()) = frames[k];
        out[k].scheme = jobs[k].name;
        out[k].surface = ambiguity(padded, delays, dopplers);
        out[k].surface.metadata["frame_length"] = std::to_string(frames[k].size());
        out[k].surface.metadata["padded_length"] = std::to_string(longest);
    });
    return out;
}

std::string ambiguity_csv(const ExperimentConfig& cfg, const std::vector<SchemeAmbiguity>& surfaces) {
    std::string out = csv_preamble(cfg, "ambiguity");
    out += "scheme,delay,doppler,magnitude_db\n";
    for (const auto& s : surfaces) {
        const auto& d = s.surface.axes[0].values;
        const auto& f = s.surface.axes[1].values;
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (std::size_t k = 0; k < f.size(); ++k) {
                const double mag = s.surface.values[i * f.size() + k];
                out += s.scheme + "," + format_double(d[i]) + "," + format_double(f[k]) + "," +
                       format_double(20.0 * std::log10(std::max(mag, 1e-15))) + "\n";
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loopback

bool LoopbackReport::passed() const {
    for (const auto& e : entries) {
        if (!(e.max_error <= tolerance) || !e.guard_ok) return false;
    }
    return !entries.empty();
}

LoopbackReport run_loopback(const ExperimentConfig& cfg, Index frames) {
    cfg.validate();
    LoopbackReport rep;
    rep.frames = frames;
    for (FilterKind f : cfg.filters) {
        for (Index P : cfg.chirp_lengths()) {
            const AfbmModem modem(cfg.resolved_waveform(f, P));
            LoopbackEntry e;
            e.filter = to_string(f);
            e.P = P;
            e.guard_ok = guard_condition(P, cfg.channel.max_delay, cfg.channel.max_doppler, cfg.channel.guard_width);
            const auto& b = modem.compensation();
            e.compensation_min = b.cwiseAbs().minCoeff();
            e.compensation_max = b.cwiseAbs().maxCoeff();
            e.noise_offdiag_ratio = modem.noise_offdiagonal_ratio();
            std::vector<double> err(static_cast<std::size_t>(frames));
            std::vector<double> ratio(static_cast<std::size_t>(frames));
            parallel_for(frames, cfg.workers, [&](Index i) {
                Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(i), kLoopbackDomain);
                const ComplexVector x =
                    qpsk_modulate(random_bits(rng, 2 * modem.params().payload()), modem.params().symbol_energy);
                const ComplexVector s = modem.modulate(x);
                err[static_cast<std::size_t>(i)] = (modem.demodulate(s) - x).cwiseAbs().maxCoeff();
                ratio[static_cast<std::size_t>(i)] = s.squaredNorm() / x.squaredNorm();
            });
            for (std::size_t i = 0; i < err.size(); ++i) {
                e.max_error = std::max(e.max_error, err[i]);
                e.energy_ratio += ratio[i] / static_cast<double>(frames);
            }
            const ComplexMatrix heff = modem.transmit_matrix().adjoint() * modem.transmit_matrix();
            for (Index c = 0; c < heff.cols(); ++c) {
                for (Index r = 0; r < heff.rows(); ++r) {
                    const double v = std::abs(r == c ? heff(r, c) - 1.0 : heff(r, c));
                    if (r == c) {
                        e.max_diag_deviation = std::max(e.max_diag_deviation, v);
                    } else {
                        e.max_offdiag = std::max(e.max_offdiag, v);
                    }
                }
            }
            rep.entries.push_back(e);
        }
    }
    return rep;
}

std::string loopback_text(const LoopbackReport& report) {
    std::ostringstream os;
    os << "loopback over " << report.frames << " frames, tolerance " << format_double(report.tolerance) << "\n";
    for (const auto& e : report.entries) {
        os << "  filter=" << e.filter << " P=" << e.P << " max_error=" << format_double(e.max_error)
           << " diag_dev=" << format_double(e.max_diag_deviation) << " max_offdiag=" << format_double(e.max_offdiag)
           << " |b| in [" << format_double(e.compensation_min) << ", " << format_double(e.compensation_max) << "]"
           << " energy_ratio=" << format_double(e.energy_ratio)
           << " noise_offdiag=" << format_double(e.noise_offdiag_ratio) << " guard=" << (e.guard_ok ? "ok" : "VIOLATED")
           << " -> " << (e.max_error <= report.tolerance && e.guard_ok ? "PASS" : "FAIL") << "\n";
    }
    os << (report.passed() ? "loopback PASS\n" : "loopback FAIL\n");
    return os.str();
}

json loopback_json(const ExperimentConfig& cfg, const LoopbackReport& report) {
    json j;
    j["config_hash"] = config_hash(cfg);
    j["config"] = to_json(cfg);
    j["frames"] = report.frames;
    j["tolerance"] = report.tolerance;
    j["passed"] = report.passed();
    json entries = json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"filter", e.filter},
                           {"P", e.P},
                           {"max_error", e.max_error},
                           {"max_diag_deviation", e.max_diag_deviation},
                           {"max_offdiag", e.max_offdiag},
                           {"compensation_min", e.compensation_min},
                           {"compensation_max", e.compensation_max},
                           {"energy_ratio", e.energy_ratio},
                           {"noise_offdiag_ratio", e.noise_offdiag_ratio},
                           {"guard_ok", e.guard_ok}});
    }
    j["entries"] = entries;
    return j;
}

}  // namespace afbm
