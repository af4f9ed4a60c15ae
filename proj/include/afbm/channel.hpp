// channel.hpp - doubly-dispersive channel realizations.
//
// H = sum_r h_r Phi_r Z^{f_r} Pi^{l_r}: per path a circular delay, a
// (possibly fractional) Doppler phase ramp over the frame and the
// chirp-cyclic-prefix phase on the first l_r samples.

#pragma once

#include "afbm/rng.hpp"
#include "afbm/types.hpp"

#include <span>
#include <vector>

namespace afbm {

struct ChannelPath {
    Complex gain{1.0, 0.0};
    Index delay = 0;
    double doppler = 0.0;
};

/// Length over which a unit normalized Doppler completes one cycle. Frame
/// uses Z over the whole frame; Subcarrier uses the filter-bank DFT size,
/// the spacing f_r is normalized to. Both coincide for single-block AFDM.
enum class DopplerReference { Frame, Subcarrier };

struct ChannelConfig {
    int paths = 3;
    Index max_delay = 2;
    double max_doppler = 2.0;
    Index guard_width = 1;
    double carrier_hz = 4e9;  // metadata only
    double noise_var = 0.0;
    std::vector<double> power_profile{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    DopplerReference doppler_reference = DopplerReference::Frame;

    void validate() const;
};

/// Path 0 is pinned to zero delay; the others draw delays uniformly from
/// {0..max_delay}. Dopplers are uniform on [-max_doppler, max_doppler] and
/// gains are CN(0, power_profile[r]).
std::vector<ChannelPath> sample_paths(const ChannelConfig& cfg, Rng& rng);

/// Rescales Dopplers so that a frame of frame_length samples sees f / reference
/// cycles per sample when fed to channel_matrix(paths, frame_length, ...).
std::vector<ChannelPath> rescale_doppler(std::vector<ChannelPath> paths, Index frame_length, Index reference);

/// 2(f_max + xi)(l_max + 1) + l_max <= P.
bool guard_condition(Index P, Index max_delay, double max_doppler, Index guard_width);

/// Dense M x M channel matrix.
ComplexMatrix channel_matrix(std::span<const ChannelPath> paths, Index M, double c1);

/// Structured form of channel_matrix. Applying it costs O(R*M) per column.
class DoublyDispersiveChannel {
public:
    DoublyDispersiveChannel(std::vector<ChannelPath> paths, Index frame_length, double c1);

    Index size() const { return frame_length_; }
    const std::vector<ChannelPath>& paths() const { return paths_; }

    ComplexVector apply(const ComplexVector& s) const;
    /// H * X for an M x n matrix X.
    ComplexMatrix apply(const ComplexMatrix& x) const;
    ComplexMatrix dense() const;

private:
    std::vector<ChannelPath> paths_;
    Index frame_length_;
    // gain * Phi_r * Z^{f_r} folded into one diagonal per path
    std::vector<ComplexVector> weights_;
};

/// r = H s + n with n ~ CN(0, noise_var I).
ComplexVector apply_channel(const ComplexVector& s, const ComplexMatrix& H, double noise_var, Rng& rng);
ComplexVector apply_channel(const ComplexVector& s, const DoublyDispersiveChannel& H, double noise_var,
                            Rng& rng);

}  // namespace afbm
