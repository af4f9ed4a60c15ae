#include "afbm/metrics.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace afbm {

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::Ber:
            return "ber";
        case MetricKind::Psd:
            return "psd";
        case MetricKind::Ambiguity:
            return "ambiguity";
        case MetricKind::Papr:
            return "papr";
    }
    return "unknown";
}

void MetricRecord::check() const {
    std::size_t expected = axes.empty() ? 0 : 1;
    for (const auto& a : axes) expected *= a.values.size();
    if (expected != values.size()) {
        throw DimensionError("MetricRecord: axes describe " + std::to_string(expected) + " values, got " +
                             std::to_string(values.size()));
    }
}

BerCount ber(const Bits& estimated, const Bits& truth) {
    if (estimated.size() != truth.size()) {
        throw DimensionError("ber: bit vectors differ in length");
    }
    BerCount out;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        out.errors += (estimated[i] != 0) != (truth[i] != 0) ? 1U : 0U;
    }
    out.rate = truth.empty() ? 0.0 : static_cast<double>(out.errors) / static_cast<double>(truth.size());
    return out;
}

namespace {

double wrap_half(double f) {
    double w = f - std::floor(f + 0.5);
    if (w >= 0.5) w -= 1.0;
    return w;
}

}  // namespace

PsdReport psd_oobe(const std::vector<ComplexVector>& frames, const SpectrumBand& band, const PsdOptions& options) {
    if (frames.empty()) {
        throw DimensionError("psd_oobe: no frames");
    }
    if (options.zero_padding < 1) {
        throw ParameterError("psd_oobe: zero padding must be >= 1");
    }
    Index longest = 0;
    for (const auto& f : frames) longest = std::max(longest, f.size());
    if (longest == 0) {
        throw DimensionError("psd_oobe: empty frames");
    }
    const Index nfft = longest * options.zero_padding;

    Eigen::FFT<double> fft;
    std::vector<double> power(static_cast<std::size_t>(nfft), 0.0);
    std::vector<Complex> in(static_cast<std::size_t>(nfft));
    std::vector<Complex> out;
    for (const auto& f : frames) {
        std::fill(in.begin(), in.end(), Complex(0.0, 0.0));
        std::copy(f.data(), f.data() + f.size(), in.begin());
        fft.fwd(out, in);
        for (std::size_t k = 0; k < power.size(); ++k) power[k] += std::norm(out[k]);
    }

    // fftshift: output index i <-> frequency (i - nfft/2) / nfft
    const Index half = nfft / 2;
    std::vector<double> freq(static_cast<std::size_t>(nfft));
    std::vector<double> shifted(static_cast<std::size_t>(nfft));
    for (Index i = 0; i < nfft; ++i) {
        const Index k = (i - half + nfft) % nfft;
        freq[static_cast<std::size_t>(i)] = static_cast<double>(i - half) / static_cast<double>(nfft);
        shifted[static_cast<std::size_t>(i)] = power[static_cast<std::size_t>(k)];
    }

    double peak = 0.0;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        if (std::abs(wrap_half(freq[i] - band.center)) <= band.width / 2.0) peak = std::max(peak, shifted[i]);
    }
    if (!(peak > 0.0)) {
        throw NumericalError("psd_oobe: no in-band power");
    }

    PsdReport report;
    report.record.kind = MetricKind::Psd;
    report.record.axes.push_back({"freq_norm", freq});
    report.record.values.resize(shifted.size());
    double oobe_sum = 0.0;
    std::size_t oobe_count = 0;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        const double db = std::max(10.0 * std::log10(shifted[i] / peak), options.floor_db);
        report.record.values[i] = db;
        const double d = wrap_half(freq[i] - band.center);
        bool in_region = false;
        for (int turn = -1; turn <= 1; ++turn) {
            const double o = std::abs(d + turn);
            if (o >= options.oobe_min_offset && o <= options.oobe_max_offset) in_region = true;
        }
        if (in_region) {
            oobe_sum += db;
            ++oobe_count;
        }
    }
    if (oobe_count == 0) {
        throw ParameterError("psd_oobe: out-of-band region contains no bins");
    }
    report.oobe_db = oobe_sum / static_cast<double>(oobe_count);
    report.record.metadata["frames"] = std::to_string(frames.size());
    report.record.metadata["zero_padding"] = std::to_string(options.zero_padding);
    report.record.metadata["band_center"] = std::to_string(band.center);
    report.record.metadata["band_width"] = std::to_string(band.width);
    return report;
}

MetricRecord ambiguity(const ComplexVector& s, const std::vector<Index>& delays, const std::vector<double>& dopplers) {
    const Index m = s.size();
    if (m == 0) {
        throw DimensionError("ambiguity: empty frame");
    }
    for (Index l : delays) {
        if (l <= -m || l >= m) {
            throw ParameterError("ambiguity: delay " + std::to_string(l) + " outside the frame");
        }
    }
    const double energy = s.squaredNorm();
    if (!(energy > 0.0)) {
        throw NumericalError("ambiguity: zero-energy frame");
    }
    MetricRecord rec;
    rec.kind = MetricKind::Ambiguity;
    Axis da{"delay", {}};
    for (Index l : delays) da.values.push_back(static_cast<double>(l));
    rec.axes.push_back(std::move(da));
    rec.axes.push_back({"doppler", dopplers});
    rec.values.reserve(delays.size() * dopplers.size());

    ComplexVector prod(m);
    for (Index l : delays) {
        for (Index n = 0; n < m; ++n) {
            const Index src = ((n - l) % m + m) % m;
            prod[n] = s[n] * std::conj(s[src]);
        }
        for (double f : dopplers) {
            Complex acc(0.0, 0.0);
            for (Index n = 0; n < m; ++n) {
                acc += prod[n] * unit_phasor_neg(static_cast<long double>(f) * n / m);
            }
            rec.values.push_back(std::abs(acc) / energy);
        }
    }
    return rec;
}

Index main_lobe_width(const MetricRecord& surface, std::size_t axis, double threshold) {
    surface.check();
    if (surface.axes.size() != 2 || axis > 1) {
        throw DimensionError("main_lobe_width: expected a two-axis surface");
    }
    auto zero_index = [](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] == 0.0) return i;
        }
        throw ParameterError("main_lobe_width: axis has no zero entry");
    };
    const auto& a0 = surface.axes[0].values;
    const auto& a1 = surface.axes[1].values;
    const std::size_t z0 = zero_index(a0);
    const std::size_t z1 = zero_index(a1);
    auto at = [&](std::size_t i, std::size_t j) { return surface.values[i * a1.size() + j]; };
    const std::size_t len = axis == 0 ? a0.size() : a1.size();
    const std::size_t centre = axis == 0 ? z0 : z1;
    auto value = [&](std::size_t k) { return axis == 0 ? at(k, z1) : at(z0, k); };
    Index width = 0;
    for (std::size_t k = centre; k < len && value(k) >= threshold; ++k) ++width;
    for (std::size_t k = centre; k-- > 0 && value(k) >= threshold;) ++width;
    return width;
}

double papr_db(const ComplexVector& s) {
    if (s.size() == 0) {
        throw DimensionError("papr: empty frame");
    }
    const double mean = s.squaredNorm() / static_cast<double>(s.size());
    if (!(mean > 0.0)) {
        throw NumericalError("papr: zero frame");
    }
    return 10.0 * std::log10(s.cwiseAbs2().maxCoeff() / mean);
}

}  // namespace afbm
