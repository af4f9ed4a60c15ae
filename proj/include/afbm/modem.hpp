// modem.hpp - AFBM transmit/receive matrix pipeline.
//
// TX:  s = G (I_K (x) Q_P C_f) Xi x,   C_f = W_L diag(b),
//      Q_P = F_N^H T F_P W~_P^H
// RX:  y = Xi^H (I_K (x) C_f^H Q_P^H) G^H r
//
// Xi places L/2 symbols per block on the first and last L/4 rows of an
// L-row block, W_L is the L-point DAFT, W~_P the first L rows of the
// P-point DAFT, T zero-pads P frequency bins into N, and G is the
// block-Toeplitz polyphase filter: each N-sample block is periodically
// extended over the O*N prototype taps, with consecutive blocks offset by
// N/2 samples.

#pragma once

#include "afbm/channel.hpp"
#include "afbm/types.hpp"

#include <string>

namespace afbm {

enum class FilterKind { Hermite, Phydyas, Rectangular };

std::string to_string(FilterKind kind);
FilterKind filter_kind_from_string(const std::string& name);
/// Overlap factor used when a filter kind is requested without one.
double default_overlap(FilterKind kind);

struct WaveformParams {
    Index L = 128;  // subcarriers
    Index K = 8;    // blocks
    Index P = 256;  // chirp (IDAFT) length
    Index N = 256;  // filter bank DFT size
    double O = 4.0;
    double c1 = 0.0;
    double c2 = 0.0;
    FilterKind filter = FilterKind::Phydyas;
    double symbol_energy = 1.0;

    void validate() const;

    Index filter_length() const;  // O*N
    Index frame_length() const;   // M = O*N + (K-1)*N/2
    Index rx_length() const { return N * K; }
    Index payload() const { return K * L / 2; }
};

/// c1 = (2(f_max + xi) + 1) / (2P).
double default_c1(Index P, double max_doppler, Index guard_width);

struct PrototypeFilter {
    FilterKind kind = FilterKind::Phydyas;
    double overlap = 4.0;
    RealVector taps;
};

/// Xi = I_K (x) Xi_bar, shape LK x KL/2.
ComplexMatrix placement_matrix(Index L, Index K);

/// Hermite: Gaussian-Hermite expansion truncated to O*N taps. PHYDYAS:
/// frequency-sampled design with O = 4. Both are symmetric and scaled to
/// unit energy. Rectangular (O = 1) has unit-amplitude taps so that a
/// single block passes through G unchanged; it is a reference, not an
/// energy-normalized design.
PrototypeFilter prototype_filter(FilterKind kind, Index N, double O);

/// Dense block-Toeplitz filter matrix, M x NK.
ComplexMatrix filter_matrix(const PrototypeFilter& g, Index N, Index K);

/// N x P zero-padding selector [I_{P,l}^T; 0; I_{P,u}^T]: the last P/2
/// input bins land on the top rows, the first P/2 on the bottom rows.
ComplexMatrix build_T(Index N, Index P);

/// Q_P = F_N^H T F_P W~_P^H, shape N x L.
ComplexMatrix build_QP(const WaveformParams& params);

/// Per-position compensation b = d^{-1/2}, where d_i is the energy of the
/// single-block transmit response to a unit impulse at DAFT input i with
/// no compensation. Throws NumericalError when some d_i < 1e-12.
ComplexVector compensation_vector(const WaveformParams& params, const PrototypeFilter& g);

/// Filtered time-domain channel Hbar = G^H H G (I_K (x) Q_P C_f) Xi.
struct EffectiveChannel {
    ComplexMatrix hbar;  // NK x KL/2
    /// Mean diagonal of G^H G: the per-entry variance of G^H n for unit white n.
    double noise_scale = 1.0;
};

class AfbmModem {
public:
    explicit AfbmModem(const WaveformParams& params);
    AfbmModem(const WaveformParams& params, PrototypeFilter filter);

    const WaveformParams& params() const { return params_; }
    const PrototypeFilter& filter() const { return filter_; }
    const ComplexVector& compensation() const { return compensation_; }
    /// Q_P W_L diag(b) Xi_bar, the per-block map from L/2 symbols to N samples.
    const ComplexMatrix& block_spreader() const { return spreader_; }
    /// G (I_K (x) Q_P C_f) Xi as a dense M x KL/2 matrix.
    ComplexMatrix transmit_matrix() const;

    ComplexVector modulate(const ComplexVector& x) const;
    ComplexVector demodulate(const ComplexVector& r) const;

    /// G u for u of length NK.
    ComplexVector filter_apply(const ComplexVector& u) const;
    /// G^H r, length NK.
    ComplexVector filter_adjoint(const ComplexVector& r) const;
    /// G^H Y row-wise for an M x n matrix.
    ComplexMatrix filter_adjoint(const ComplexMatrix& y) const;

    EffectiveChannel effective_channel(const ComplexMatrix& H) const;
    EffectiveChannel effective_channel(const DoublyDispersiveChannel& H) const;
    /// H_eff = Xi^H (I_K (x) C_f^H Q_P^H) Hbar, shape KL/2 x KL/2.
    ComplexMatrix full_effective_channel(const EffectiveChannel& eff) const;

    double noise_scale() const { return noise_scale_; }
    /// ||offdiag(G^H G)||_F / ||G^H G||_F: how far the filtered noise is from
    /// the white model the detectors assume (0 means white).
    double noise_offdiagonal_ratio() const;

private:
    void build();
    EffectiveChannel finish(const ComplexMatrix& channel_times_tx) const;

    WaveformParams params_;
    PrototypeFilter filter_;
    ComplexVector compensation_;
    ComplexMatrix spreader_;
    ComplexMatrix tx_matrix_;
    double noise_scale_ = 1.0;
};

}  // namespace afbm
