// afdm.hpp - reference AFDM transceiver operating in the DAF domain.

#pragma once

#include "afbm/types.hpp"

namespace afbm {

struct AfdmParams {
    Index size = 128;  // N_a subcarriers == samples per frame before the prefix
    double c1 = 0.0;   // time-domain chirp, shared with the prefix phase
    double c2 = 0.0;   // symbol-domain chirp
    Index prefix_length = 0;  // chirp-periodic prefix

    void validate() const;
};

/// A = Lambda_{c2} F Lambda_{c1}: the time-domain signal A^H x carries the
/// c1 chirp, so c1 is the rate the prefix and the guard condition refer to.
ComplexMatrix afdm_matrix(const AfdmParams& params);

/// s = A^H x with the chirp-periodic prefix prepended; length N_a + prefix.
ComplexVector afdm_modulate(const ComplexVector& x, const AfdmParams& params);

/// Drops the prefix and applies A. Accepts either N_a + prefix samples or
/// an already prefix-free N_a vector.
ComplexVector afdm_demodulate(const ComplexVector& r, const AfdmParams& params);

/// H_DAF = A H A^H for the circularized N_a x N_a channel.
ComplexMatrix afdm_effective_channel(const ComplexMatrix& H, const AfdmParams& params);

/// Frame including prefix, interpolated onto a grid `oversampling` times
/// finer than the symbol rate by zero-padding its DFT around DC. The result
/// is band-limited to |f| < 1/(2 os) of the fine rate; samples at integer
/// positions match afdm_modulate exactly. Used for spectra and ambiguity
/// surfaces on the same sample rate as an AFBM frame.
ComplexVector afdm_oversampled_frame(const ComplexVector& x, const AfdmParams& params, Index oversampling);

}  // namespace afbm
