// metrics.hpp - BER, spectra, ambiguity surfaces and PAPR.

#pragma once

#include "afbm/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace afbm {

enum class MetricKind { Ber, Psd, Ambiguity, Papr };

std::string to_string(MetricKind kind);

struct Axis {
    std::string name;
    std::vector<double> values;
};

/// values are stored row-major over the axes, first axis slowest.
struct MetricRecord {
    MetricKind kind = MetricKind::Ber;
    std::vector<Axis> axes;
    std::vector<double> values;
    std::map<std::string, std::string> metadata;

    /// Throws DimensionError unless prod(axis lengths) == values.size().
    void check() const;
};

struct BerCount {
    std::uint64_t errors = 0;
    double rate = 0.0;
};

BerCount ber(const Bits& estimated, const Bits& truth);

/// Occupied band of a frame, in cycles/sample of the frame's sampling rate.
struct SpectrumBand {
    double center = 0.0;
    double width = 1.0;
};

struct PsdOptions {
    Index zero_padding = 4;
    double oobe_min_offset = 0.55;  // |offset from band centre|, cycles/sample
    double oobe_max_offset = 0.75;
    double floor_db = -300.0;
};

struct PsdReport {
    MetricRecord record;  // axis "freq_norm" in [-0.5, 0.5), values in dB, in-band peak at 0 dB
    double oobe_db = 0.0;
};

/// Mean periodogram over frames. Frequencies are taken modulo the
/// sampling rate, so an offset o and o - 1 name the same bin.
PsdReport psd_oobe(const std::vector<ComplexVector>& frames, const SpectrumBand& band,
                   const PsdOptions& options = {});

/// |A(l, f)| = |sum_n s[n] conj(s[(n-l) mod M]) e^{-j2pi f n / M}| / sum_n |s[n]|^2,
/// axes ("delay", "doppler"), values linear magnitude.
MetricRecord ambiguity(const ComplexVector& s, const std::vector<Index>& delays, const std::vector<double>& dopplers);

/// Grid cells along one axis through the origin (the other axis held at
/// its zero entry) whose magnitude is >= threshold, counted contiguously.
Index main_lobe_width(const MetricRecord& surface, std::size_t axis, double threshold = 0.5);

/// 10 log10(max |s|^2 / mean |s|^2).
double papr_db(const ComplexVector& s);

}  // namespace afbm
