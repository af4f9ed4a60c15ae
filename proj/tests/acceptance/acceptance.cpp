// Acceptance checks. `acceptance <n>...` runs the listed criteria (all when
// none are given) and prints one PASS/FAIL line per criterion.

#include "afbm/experiment.hpp"
#include "afbm/transforms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace afbm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Tolerances and workloads, one block per criterion.
constexpr double kOrthoTol = 1e-10;
constexpr double kOrthoSeconds = 10.0;

constexpr double kLoopbackTol = 1e-6;
constexpr Index kLoopbackFrames = 100;
constexpr double kLoopbackSeconds = 30.0;

constexpr int kOracleTrials = 500;
constexpr double kOracleSnrDb = 15.0;
constexpr double kOracleAgreement = 0.99;
constexpr double kOracleSeconds = 120.0;

constexpr Index kLmmseTrials = 20000;
constexpr double kLmmseGapDb = 0.5;

constexpr Index kFigTrials = 160;
constexpr double kFigTargetBer = 1e-3;
constexpr double kFigGainDb = 2.0;
constexpr double kFigGainTolDb = 1.0;
constexpr double kFigSeconds = 1800.0;

constexpr double kSlopeTarget = 1.0;
constexpr double kSlopeTol = 0.15;

constexpr double kOobeMarginDb = 20.0;

constexpr double kAmbTol = 1e-12;
constexpr Index kAmbCellTol = 1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int hardware_workers() { return static_cast<int>(std::max(1U, std::thread::hardware_concurrency())); }

double max_abs(const ComplexMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double identity_deviation(const ComplexMatrix& m) {
    return max_abs(m - ComplexMatrix::Identity(m.rows(), m.cols()));
}

// SNR where a BER curve first falls to `target`, interpolating log10(BER)
// linearly between grid points. Unset if the curve never gets there.
std::optional<double> crossing(const std::vector<double>& snr, const std::vector<double>& ber, double target) {
    for (std::size_t i = 0; i < snr.size(); ++i) {
        if (ber[i] > target) continue;
        if (i == 0) return snr[0];
        const double b0 = std::log10(std::max(ber[i - 1], 1e-300));
        const double b1 = std::log10(std::max(ber[i], 1e-300));
        const double t = std::log10(target);
        if (b0 == b1) return snr[i];
        return snr[i - 1] + (snr[i] - snr[i - 1]) * (b0 - t) / (b0 - b1);
    }
    return std::nullopt;
}

struct Curve {
    std::vector<double> snr;
    std::vector<double> ber;
};

Curve curve(const std::vector<BerRow>& rows, const std::string& scheme, const std::string& filter,
            const std::string& detector) {
    Curve c;
    for (const auto& r : rows) {
        if (r.scheme == scheme && r.filter == filter && r.detector == detector) {
            c.snr.push_back(r.snr_db);
            c.ber.push_back(r.ber);
        }
    }
    return c;
}

std::string curve_text(const Curve& c) {
    std::ostringstream os;
    for (std::size_t i = 0; i < c.snr.size(); ++i) {
        os << (i ? " " : "") << fmt("%g", c.snr[i]) << ":" << fmt("%.3g", c.ber[i]);
    }
    return os.str();
}

// ---------------------------------------------------------------------------

Outcome orthogonality() {
    const auto t0 = Clock::now();
    const ExperimentConfig cfg = reference_config();
    const WaveformParams p = cfg.resolved_waveform(FilterKind::Phydyas, 256);
    double worst = 0.0;
    std::ostringstream os;
    auto record = [&](const char* name, double dev) {
        worst = std::max(worst, dev);
        os << name << "=" << fmt("%.2e", dev) << " ";
    };
    const ComplexMatrix w = daft_matrix(p.c1, p.c2, p.L);
    record("WW^H", identity_deviation(w * w.adjoint()));
    const ComplexMatrix wp = truncated_daft(p.c1, p.c2, p.L, p.P);
    record("W~W~^H", identity_deviation(wp * wp.adjoint()));
    const ComplexMatrix q = build_QP(p);
    record("Q^HQ", identity_deviation(q.adjoint() * q));
    const ComplexMatrix xi = placement_matrix(p.L, p.K);
    record("Xi^HXi", identity_deviation(xi.adjoint() * xi));
    const ComplexMatrix t = build_T(p.N, p.P);
    record("T^TT", identity_deviation(t.transpose() * t));
    const double secs = seconds_since(t0);
    os << "max=" << fmt("%.2e", worst) << " tol=" << fmt("%.0e", kOrthoTol) << " time=" << fmt("%.2fs", secs);
    return {worst <= kOrthoTol && secs < kOrthoSeconds, os.str()};
}

Outcome loopback() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = reference_config();
    cfg.workers = hardware_workers();
    const LoopbackReport rep = run_loopback(cfg, kLoopbackFrames);
    const double secs = seconds_since(t0);
    std::ostringstream os;
    bool ok = secs < kLoopbackSeconds;
    for (const auto& e : rep.entries) {
        ok = ok && e.max_error <= kLoopbackTol;
        os << e.filter << ": max_error=" << fmt("%.3e", e.max_error) << " max_offdiag(H_eff)="
           << fmt("%.3f", e.max_offdiag) << "; ";
    }
    os << "tol=" << fmt("%.0e", kLoopbackTol) << " frames=" << kLoopbackFrames << " time=" << fmt("%.1fs", secs);
    return {ok, os.str()};
}

Outcome gabp_vs_map() {
    const auto t0 = Clock::now();
    const Index rows = 16;
    const Index cols = 8;
    const double nv = std::pow(10.0, -kOracleSnrDb / 10.0);
    GaBPConfig g;
    g.damping = 0.5;
    g.max_iterations = 50;
    const auto alphabet = qpsk_alphabet(1.0);
    std::size_t agree = 0;
    std::size_t total = 0;
    for (int t = 0; t < kOracleTrials; ++t) {
        Rng rng = derive_stream(2024, static_cast<std::uint64_t>(t), 1);
        ComplexMatrix H(rows, cols);
        for (Index j = 0; j < cols; ++j) {
            for (Index i = 0; i < rows; ++i) H(i, j) = complex_gaussian(rng, 1.0 / static_cast<double>(rows));
        }
        const ComplexVector x = qpsk_modulate(random_bits(rng, 2 * cols), 1.0);
        const ComplexVector r = H * x + complex_gaussian_vector(rng, rows, nv);
        const Bits a = hard_demap(gabp_detect(H, r, nv, g).estimate);
        const Bits b = hard_demap(map_oracle(H, r, alphabet));
        for (std::size_t s = 0; s < a.size(); s += 2) {
            agree += (a[s] == b[s] && a[s + 1] == b[s + 1]) ? 1 : 0;
            ++total;
        }
    }
    const double frac = static_cast<double>(agree) / static_cast<double>(total);
    const double secs = seconds_since(t0);
    return {frac >= kOracleAgreement && secs < kOracleSeconds,
            "agreement=" + fmt("%.4f", frac) + " (" + std::to_string(agree) + "/" + std::to_string(total) +
                ") need>=" + fmt("%.2f", kOracleAgreement) + " time=" + fmt("%.1fs", secs)};
}

Outcome gabp_vs_lmmse() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = reference_config();
    cfg.waveform.L = 32;
    cfg.waveform.K = 4;
    cfg.waveform.N = 64;
    cfg.waveform.P = 64;
    cfg.filters = {FilterKind::Phydyas};
    cfg.schemes = {Scheme::Afbm};
    cfg.snr_grid_db = {0, 2, 4, 6, 8, 10, 12, 14};
    cfg.trials_per_point = kLmmseTrials;
    cfg.detector_choice = DetectorChoice::Both;
    cfg.workers = hardware_workers();
    cfg.validate();
    const auto rows = run_ber_sweep(cfg);
    const Curve g = curve(rows, "AFBM", "phydyas", "gabp");
    const Curve l = curve(rows, "AFBM", "phydyas", "lmmse");
    // Horizontal gap: for every GaBP point, the SNR at which LMMSE reaches
    // the same BER, and vice versa; both only where the other curve spans it.
    double worst = 0.0;
    auto gaps = [&](const Curve& a, const Curve& b) {
        for (std::size_t i = 0; i < a.snr.size(); ++i) {
            if (a.ber[i] <= 0.0) continue;
            if (a.ber[i] > b.ber.front() || a.ber[i] < b.ber.back()) continue;
            if (const auto s = crossing(b.snr, b.ber, a.ber[i])) worst = std::max(worst, std::abs(*s - a.snr[i]));
        }
    };
    gaps(g, l);
    gaps(l, g);
    const double secs = seconds_since(t0);
    return {worst <= kLmmseGapDb, "max_gap=" + fmt("%.3f", worst) + "dB tol=" + fmt("%.1f", kLmmseGapDb) +
                                      " gabp[" + curve_text(g) + "] lmmse[" + curve_text(l) + "] time=" +
                                      fmt("%.0fs", secs)};
}

Outcome fig1_gain() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = reference_config();
    cfg.filters = {FilterKind::Phydyas, FilterKind::Hermite};
    cfg.schemes = {Scheme::Afbm, Scheme::Afdm};
    cfg.snr_grid_db = {10, 12, 14, 16, 18, 20, 22, 24};
    cfg.trials_per_point = kFigTrials;
    cfg.workers = hardware_workers();
    cfg.validate();
    const auto rows = run_ber_sweep(cfg);
    const double secs = seconds_since(t0);
    const Curve afdm = curve(rows, "AFDM", "none", "gabp");
    const auto s_afdm = crossing(afdm.snr, afdm.ber, kFigTargetBer);
    std::ostringstream os;
    bool ok = s_afdm.has_value() && secs <= kFigSeconds;
    os << "AFDM@1e-3=" << (s_afdm ? fmt("%.2f", *s_afdm) : std::string("n/a")) << "dB";
    for (const char* f : {"phydyas", "hermite"}) {
        const Curve c = curve(rows, "AFBM", f, "gabp");
        const auto s = crossing(c.snr, c.ber, kFigTargetBer);
        os << "; AFBM-" << f << "@1e-3=" << (s ? fmt("%.2f", *s) : std::string("n/a")) << "dB";
        if (s && s_afdm) {
            const double gain = *s_afdm - *s;
            os << " gain=" << fmt("%+.2f", gain) << "dB";
            ok = ok && std::abs(gain - kFigGainDb) <= kFigGainTolDb;
        } else {
            ok = false;
        }
        os << " [" << curve_text(c) << "]";
    }
    os << "; AFDM [" << curve_text(afdm) << "]; need gain " << fmt("%.0f", kFigGainDb) << "+-"
       << fmt("%.0f", kFigGainTolDb) << "dB, trials=" << kFigTrials << " time=" << fmt("%.0fs", secs);
    return {ok, os.str()};
}

Outcome complexity_slope() {
    const std::pair<Index, Index> sizes[] = {{256, 64}, {512, 128}, {1024, 256}, {2048, 512}};
    GaBPConfig g;
    g.max_iterations = 8;
    std::vector<double> lx;
    std::vector<double> ly;
    std::ostringstream os;
    for (auto [rows, cols] : sizes) {
        Rng rng = derive_stream(5, static_cast<std::uint64_t>(rows), 0);
        ComplexMatrix H(rows, cols);
        for (Index j = 0; j < cols; ++j) {
            for (Index i = 0; i < rows; ++i) H(i, j) = complex_gaussian(rng, 1.0 / static_cast<double>(rows));
        }
        const ComplexVector r = H * qpsk_modulate(random_bits(rng, 2 * cols), 1.0) +
                                complex_gaussian_vector(rng, rows, 0.05);
        // enough repetitions for ~0.3 s per size; keep the fastest
        const double edges = static_cast<double>(rows * cols);
        const int reps = std::max(3, static_cast<int>(3e7 / (edges * g.max_iterations)));
        double best = 1e300;
        for (int k = 0; k < reps; ++k) {
            const auto t0 = Clock::now();
            const GaBPResult res = gabp_detect(H, r, 0.05, g);
            const double t = seconds_since(t0) / res.diagnostics.iterations;
            best = std::min(best, t);
        }
        lx.push_back(std::log(edges));
        ly.push_back(std::log(best));
        os << rows << "x" << cols << ":" << fmt("%.3g", best * 1e3) << "ms ";
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    os << "slope=" << fmt("%.3f", slope) << " need " << fmt("%.2f", kSlopeTarget) << "+-" << fmt("%.2f", kSlopeTol);
    return {std::abs(slope - kSlopeTarget) <= kSlopeTol, os.str()};
}

Outcome oobe() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = reference_config();
    cfg.filters = {FilterKind::Phydyas, FilterKind::Hermite};
    cfg.schemes = {Scheme::Afbm, Scheme::Afdm};
    cfg.workers = hardware_workers();
    const auto spectra = run_oobe(cfg);
    std::map<std::string, double> level;
    for (const auto& s : spectra) level[s.scheme] = s.psd.oobe_db;
    const double afdm = level.at("AFDM");
    const double phy = level.at("AFBM-phydyas");
    const double her = level.at("AFBM-hermite");
    const bool ok = phy <= afdm - kOobeMarginDb && her < afdm;
    return {ok, "AFDM=" + fmt("%.2f", afdm) + "dB AFBM-phydyas=" + fmt("%.2f", phy) + "dB AFBM-hermite=" +
                    fmt("%.2f", her) + "dB; need phydyas <= AFDM-" + fmt("%.0f", kOobeMarginDb) +
                    " and hermite < AFDM, frames=" + std::to_string(cfg.oobe.frames) + " time=" +
                    fmt("%.1fs", seconds_since(t0))};
}

Outcome ambiguity_sanity() {
    ExperimentConfig cfg = reference_config();
    cfg.filters = {FilterKind::Phydyas, FilterKind::Hermite};
    cfg.schemes = {Scheme::Afbm, Scheme::Afdm};
    cfg.workers = hardware_workers();
    const auto surfaces = run_ambiguity(cfg);
    std::map<std::string, std::pair<Index, Index>> widths;
    bool ok = true;
    std::ostringstream os;
    for (const auto& s : surfaces) {
        const auto& rec = s.surface;
        const std::size_t nd = rec.axes[1].values.size();
        std::size_t d0 = 0;
        std::size_t f0 = 0;
        while (rec.axes[0].values[d0] != 0.0) ++d0;
        while (rec.axes[1].values[f0] != 0.0) ++f0;
        const double origin = rec.values[d0 * nd + f0];
        const double peak = *std::max_element(rec.values.begin(), rec.values.end());
        ok = ok && std::abs(origin - 1.0) <= kAmbTol && peak <= 1.0 + kAmbTol;
        widths[s.scheme] = {main_lobe_width(rec, 0), main_lobe_width(rec, 1)};
        os << s.scheme << ": A(0,0)=" << fmt("%.15f", origin) << " max=" << fmt("%.15f", peak)
           << " lobe(delay,doppler)=(" << widths[s.scheme].first << "," << widths[s.scheme].second << "); ";
    }
    const auto ref = widths.at("AFDM");
    for (const auto& [name, w] : widths) {
        ok = ok && std::abs(w.first - ref.first) <= kAmbCellTol && std::abs(w.second - ref.second) <= kAmbCellTol;
    }
    os << "cell tol=" << kAmbCellTol;
    return {ok, os.str()};
}

Outcome determinism() {
    auto c = parse_config(nlohmann::json::parse(R"({
        "waveform": {"L": 32, "K": 4, "P": 64, "N": 64, "filter": ["phydyas", "hermite"]},
        "scheme": ["AFBM", "AFDM"],
        "snr_grid_db": [0, 6, 12],
        "trials_per_point": 24,
        "oobe": {"frames": 16},
        "ambiguity": {"max_delay": 4, "max_doppler": 2, "doppler_step": 0.5},
        "seed": 99
    })"));
    c.detector_choice = DetectorChoice::Both;
    std::vector<std::string> outputs;
    for (int w : {1, 4, 8}) {
        c.workers = w;
        const auto spectra = run_oobe(c);
        outputs.push_back(ber_csv(c, run_ber_sweep(c)) + oobe_csv(c, spectra) + oobe_summary_csv(c, spectra) +
                          papr_csv(c, spectra) + ambiguity_csv(c, run_ambiguity(c)));
    }
    const bool ok = outputs[0] == outputs[1] && outputs[0] == outputs[2];
    return {ok, std::string(ok ? "identical" : "DIFFERENT") + " CSV bytes across workers {1,4,8}, " +
                    std::to_string(outputs[0].size()) + " bytes each"};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>& criteria() {
    static const std::map<int, std::pair<const char*, std::function<Outcome()>>> table{
        {1, {"orthogonality", orthogonality}},
        {2, {"loopback", loopback}},
        {3, {"gabp-vs-map", gabp_vs_map}},
        {4, {"gabp-vs-lmmse", gabp_vs_lmmse}},
        {5, {"afbm-vs-afdm-ber", fig1_gain}},
        {6, {"complexity-slope", complexity_slope}},
        {7, {"oobe", oobe}},
        {8, {"ambiguity", ambiguity_sanity}},
        {9, {"determinism", determinism}},
    };
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty()) {
        for (const auto& [k, v] : criteria()) which.push_back(k);
    }
    bool all = true;
    for (int k : which) {
        const auto it = criteria().find(k);
        if (it == criteria().end()) {
            std::fprintf(stderr, "unknown criterion %d\n", k);
            return 2;
        }
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d (%s): %s  %s\n", k, it->second.first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
