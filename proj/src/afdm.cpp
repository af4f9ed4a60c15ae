#include "afbm/afdm.hpp"

#include "afbm/transforms.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <string>

namespace afbm {

void AfdmParams::validate() const {
    if (size < 1) {
        throw ParameterError("AFDM: N_a must be >= 1");
    }
    if (prefix_length < 0 || prefix_length >= size) {
        throw ParameterError("AFDM: prefix length must lie in [0, N_a)");
    }
}

ComplexMatrix afdm_matrix(const AfdmParams& params) {
    params.validate();
    return daft_matrix(params.c2, params.c1, params.size);
}

ComplexVector afdm_modulate(const ComplexVector& x, const AfdmParams& params) {
    params.validate();
    const Index n = params.size;
    if (x.size() != n) {
        throw DimensionError("afdm_modulate: expected " + std::to_string(n) + " symbols");
    }
    const ComplexVector core = afdm_matrix(params).adjoint() * x;
    const Index cp = params.prefix_length;
    ComplexVector s(n + cp);
    s.tail(n) = core;
    const long double nn = static_cast<long double>(n);
    for (Index i = 0; i < cp; ++i) {
        // prefix index q = i - cp in [-cp, -1]
        const long double q = static_cast<long double>(i - cp);
        s[i] = core[n + i - cp] * unit_phasor_neg(static_cast<long double>(params.c1) * (nn * nn + 2.0L * nn * q));
    }
    return s;
}

ComplexVector afdm_demodulate(const ComplexVector& r, const AfdmParams& params) {
    params.validate();
    const Index n = params.size;
    ComplexVector body;
    if (r.size() == n + params.prefix_length) {
        body = r.tail(n);
    } else if (r.size() == n) {
        body = r;
    } else {
        throw DimensionError("afdm_demodulate: unexpected frame length " + std::to_string(r.size()));
    }
    return afdm_matrix(params) * body;
}

ComplexMatrix afdm_effective_channel(const ComplexMatrix& H, const AfdmParams& params) {
    params.validate();
    const Index n = params.size;
    if (H.rows() != n || H.cols() != n) {
        throw DimensionError("afdm_effective_channel: H must be " + std::to_string(n) + " x " + std::to_string(n));
    }
    const ComplexMatrix w = afdm_matrix(params);
    return w * H * w.adjoint();
}

ComplexVector afdm_oversampled_frame(const ComplexVector& x, const AfdmParams& params, Index oversampling) {
    params.validate();
    const Index n = params.size;
    if (x.size() != n) {
        throw DimensionError("afdm_oversampled_frame: expected " + std::to_string(n) + " symbols");
    }
    if (oversampling < 1) {
        throw ParameterError("afdm_oversampled_frame: oversampling must be >= 1");
    }
    // Band-limited interpolation of the symbol-rate frame: its DFT bins keep
    // their baseband positions in [-1/2, 1/2) and the rest of the fine band
    // stays empty, as behind an ideal DAC.
    const ComplexVector coarse = afdm_modulate(x, params);
    const Index len = coarse.size();
    const Index fine = len * oversampling;
    Eigen::FFT<double> fft;
    std::vector<Complex> in(coarse.data(), coarse.data() + len);
    std::vector<Complex> bins;
    fft.fwd(bins, in);
    std::vector<Complex> spec(static_cast<std::size_t>(fine), Complex(0.0, 0.0));
    const Index positive = (len + 1) / 2;
    for (Index k = 0; k < len; ++k) {
        const Index at = k < positive ? k : k - len + fine;
        spec[static_cast<std::size_t>(at)] = bins[static_cast<std::size_t>(k)];
    }
    std::vector<Complex> out;
    fft.inv(out, spec);  // includes 1/fine
    ComplexVector s(fine);
    for (Index i = 0; i < fine; ++i) s[i] = out[static_cast<std::size_t>(i)] * static_cast<double>(oversampling);
    return s;
}

}  // namespace afbm
