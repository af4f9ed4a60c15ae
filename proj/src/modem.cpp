#include "afbm/modem.hpp"

#include "afbm/transforms.hpp"

#include <array>
#include <cmath>
#include <utility>
#include <vector>
#include <numbers>

namespace afbm {

std::string to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::Hermite:
            return "hermite";
        case FilterKind::Phydyas:
            return "phydyas";
        case FilterKind::Rectangular:
            return "rectangular";
    }
    return "unknown";
}

FilterKind filter_kind_from_string(const std::string& name) {
    if (name == "hermite" || name == "Hermite") return FilterKind::Hermite;
    if (name == "phydyas" || name == "PHYDYAS") return FilterKind::Phydyas;
    if (name == "rectangular" || name == "Rectangular") return FilterKind::Rectangular;
    throw ParameterError("unknown filter kind '" + name + "'");
}

double default_overlap(FilterKind kind) {
    switch (kind) {
        case FilterKind::Hermite:
            return 1.5;
        case FilterKind::Phydyas:
            return 4.0;
        case FilterKind::Rectangular:
            return 1.0;
    }
    return 1.0;
}

namespace {

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

void check_filter_dims(Index N, double O) {
    if (N < 2 || N % 2 != 0) {
        throw ParameterError("filter bank size N must be even and >= 2");
    }
    if (!(O > 0.0) || !is_integer(2.0 * O)) {
        throw ParameterError("overlap O must be a positive multiple of 1/2");
    }
}

// Physicists' Hermite polynomials H_0..H_20 at x.
std::array<double, 21> hermite_polys(double x) {
    std::array<double, 21> h{};
    h[0] = 1.0;
    h[1] = 2.0 * x;
    for (int k = 1; k < 20; ++k) {
        h[k + 1] = 2.0 * x * h[k] - 2.0 * k * h[k - 1];
    }
    return h;
}

}  // namespace

void WaveformParams::validate() const {
    if (L < 4 || L % 4 != 0) {
        throw ParameterError("L must be a positive multiple of 4");
    }
    if (K < 1) {
        throw ParameterError("K must be >= 1");
    }
    if (P < L || P > N) {
        throw ParameterError("need L <= P <= N");
    }
    if (P % 2 != 0) {
        throw ParameterError("P must be even");
    }
    check_filter_dims(N, O);
    if (!(symbol_energy > 0.0)) {
        throw ParameterError("symbol energy must be positive");
    }
}

Index WaveformParams::filter_length() const { return static_cast<Index>(std::llround(O * N)); }

Index WaveformParams::frame_length() const { return filter_length() + (K - 1) * N / 2; }

double default_c1(Index P, double max_doppler, Index guard_width) {
    return (2.0 * (max_doppler + static_cast<double>(guard_width)) + 1.0) / (2.0 * static_cast<double>(P));
}

ComplexMatrix placement_matrix(Index L, Index K) {
    if (L < 4 || L % 4 != 0) {
        throw ParameterError("placement_matrix: L must be a positive multiple of 4");
    }
    if (K < 1) {
        throw ParameterError("placement_matrix: K must be >= 1");
    }
    const Index q = L / 4;
    const Index h = L / 2;
    ComplexMatrix xi = ComplexMatrix::Zero(L * K, h * K);
    for (Index k = 0; k < K; ++k) {
        for (Index j = 0; j < h; ++j) {
            const Index row = j < q ? j : j + h;
            xi(k * L + row, k * h + j) = 1.0;
        }
    }
    return xi;
}

PrototypeFilter prototype_filter(FilterKind kind, Index N, double O) {
    check_filter_dims(N, O);
    PrototypeFilter out;
    out.kind = kind;
    out.overlap = O;
    const Index len = static_cast<Index>(std::llround(O * N));
    out.taps.resize(len);

    switch (kind) {
        case FilterKind::Phydyas: {
            if (std::abs(O - 4.0) > 1e-12) {
                throw ParameterError("PHYDYAS prototype requires O = 4");
            }
            const std::array<double, 4> hk{1.0, 0.971960, std::numbers::sqrt2 / 2.0, 0.235147};
            for (Index n = 0; n < len; ++n) {
                // half-sample offset keeps the taps exactly symmetric
                const double t = (static_cast<double>(n) + 0.5) / static_cast<double>(len);
                double v = hk[0];
                for (int k = 1; k < 4; ++k) {
                    v += 2.0 * ((k % 2) ? -1.0 : 1.0) * hk[k] * std::cos(kTwoPi * k * t);
                }
                out.taps[n] = v;
            }
            break;
        }
        case FilterKind::Hermite: {
            // Haas-Belfiore coefficients for orders 0, 4, ..., 20; T0 = N samples.
            const std::array<double, 6> ak{1.412692577, -3.0145e-3, -8.8041e-6,
                                           -2.2611e-9,  -4.4570e-15, 1.8633e-16};
            const double centre = (static_cast<double>(len) - 1.0) / 2.0;
            const double sqrt_pi = std::sqrt(std::numbers::pi);
            for (Index n = 0; n < len; ++n) {
                const double t = (static_cast<double>(n) - centre) / static_cast<double>(N);
                const auto h = hermite_polys(2.0 * sqrt_pi * t);
                double poly = 0.0;
                for (int i = 0; i < 6; ++i) {
                    poly += ak[i] * h[4 * i];
                }
                out.taps[n] = std::exp(-kTwoPi * t * t) * poly;
            }
            break;
        }
        case FilterKind::Rectangular: {
            if (std::abs(O - 1.0) > 1e-12) {
                throw ParameterError("rectangular prototype requires O = 1");
            }
            out.taps.setOnes();
            return out;
        }
    }
    out.taps /= out.taps.norm();
    return out;
}

ComplexMatrix filter_matrix(const PrototypeFilter& g, Index N, Index K) {
    check_filter_dims(N, g.overlap);
    const Index len = static_cast<Index>(std::llround(g.overlap * N));
    if (g.taps.size() != len) {
        throw DimensionError("filter_matrix: prototype has " + std::to_string(g.taps.size()) +
                             " taps, expected O*N = " + std::to_string(len));
    }
    if (K < 1) {
        throw ParameterError("filter_matrix: K must be >= 1");
    }
    const Index m = len + (K - 1) * N / 2;
    ComplexMatrix G = ComplexMatrix::Zero(m, N * K);
    for (Index k = 0; k < K; ++k) {
        for (Index r = 0; r < len; ++r) {
            G(k * N / 2 + r, k * N + r % N) = g.taps[r];
        }
    }
    return G;
}

ComplexMatrix build_T(Index N, Index P) {
    if (P < 2 || P % 2 != 0) {
        throw ParameterError("build_T: P must be even and >= 2");
    }
    if (P > N) {
        throw ParameterError("build_T: P must not exceed N");
    }
    const Index h = P / 2;
    ComplexMatrix t = ComplexMatrix::Zero(N, P);
    for (Index i = 0; i < h; ++i) {
        t(i, h + i) = 1.0;
        t(N - h + i, i) = 1.0;
    }
    return t;
}

ComplexMatrix build_QP(const WaveformParams& params) {
    params.validate();
    const ComplexMatrix wt = truncated_daft(params.c1, params.c2, params.L, params.P);
    const ComplexMatrix fp = dft_matrix(params.P);
    const ComplexMatrix fn = dft_matrix(params.N);
    return fn.adjoint() * (build_T(params.N, params.P) * (fp * wt.adjoint()));
}

namespace {

// w[c] = sum_j g[c + jN]^2, the column energies of one block of G.
RealVector column_energy(const PrototypeFilter& g, Index N) {
    RealVector w = RealVector::Zero(N);
    for (Index r = 0; r < g.taps.size(); ++r) {
        w[r % N] += g.taps[r] * g.taps[r];
    }
    return w;
}

}  // namespace

ComplexVector compensation_vector(const WaveformParams& params, const PrototypeFilter& g) {
    params.validate();
    if (g.taps.size() != params.filter_length()) {
        throw DimensionError("compensation_vector: filter length does not match O*N");
    }
    const ComplexMatrix qw = build_QP(params) * daft_matrix(params.c1, params.c2, params.L);
    const RealVector w = column_energy(g, params.N);
    ComplexVector b(params.L);
    for (Index i = 0; i < params.L; ++i) {
        const double d = (w.array() * qw.col(i).array().abs2()).sum();
        if (!(d >= 1e-12)) {
            throw NumericalError("compensation_vector: per-position response " + std::to_string(d) +
                                 " below 1e-12 at index " + std::to_string(i));
        }
        b[i] = 1.0 / std::sqrt(d);
    }
    return b;
}

AfbmModem::AfbmModem(const WaveformParams& params)
    : AfbmModem(params, prototype_filter(params.filter, params.N, params.O)) {}

AfbmModem::AfbmModem(const WaveformParams& params, PrototypeFilter filter)
    : params_(params), filter_(std::move(filter)) {
    params_.validate();
    if (filter_.taps.size() != params_.filter_length()) {
        throw DimensionError("AfbmModem: filter length does not match O*N");
    }
    build();
}

void AfbmModem::build() {
    const Index L = params_.L;
    compensation_ = compensation_vector(params_, filter_);
    const ComplexMatrix qw = build_QP(params_) * daft_matrix(params_.c1, params_.c2, L);
    const ComplexMatrix xi_bar = placement_matrix(L, 1);
    spreader_ = qw * compensation_.asDiagonal() * xi_bar;

    const RealVector w = column_energy(filter_, params_.N);
    noise_scale_ = w.mean();

    const Index h = L / 2;
    const Index payload = params_.payload();
    tx_matrix_ = ComplexMatrix::Zero(params_.frame_length(), payload);
    const Index len = params_.filter_length();
    const Index N = params_.N;
    for (Index k = 0; k < params_.K; ++k) {
        for (Index r = 0; r < len; ++r) {
            tx_matrix_.row(k * N / 2 + r).segment(k * h, h) = filter_.taps[r] * spreader_.row(r % N);
        }
    }
}

ComplexMatrix AfbmModem::transmit_matrix() const { return tx_matrix_; }

ComplexVector AfbmModem::filter_apply(const ComplexVector& u) const {
    const Index N = params_.N;
    if (u.size() != params_.rx_length()) {
        throw DimensionError("filter_apply: expected length NK = " + std::to_string(params_.rx_length()));
    }
    const Index len = params_.filter_length();
    ComplexVector s = ComplexVector::Zero(params_.frame_length());
    for (Index k = 0; k < params_.K; ++k) {
        for (Index r = 0; r < len; ++r) {
            s[k * N / 2 + r] += filter_.taps[r] * u[k * N + r % N];
        }
    }
    return s;
}

double AfbmModem::noise_offdiagonal_ratio() const {
    const Index N = params_.N;
    const Index len = params_.filter_length();
    const Index n = params_.rx_length();
    RealMatrix gram = RealMatrix::Zero(n, n);
    std::vector<std::pair<Index, double>> row;
    for (Index t = 0; t < params_.frame_length(); ++t) {
        row.clear();
        for (Index k = 0; k < params_.K; ++k) {
            const Index off = t - k * N / 2;
            if (off >= 0 && off < len) row.emplace_back(k * N + off % N, filter_.taps[off]);
        }
        for (const auto& [i, gi] : row) {
            for (const auto& [j, gj] : row) gram(i, j) += gi * gj;
        }
    }
    const double total = gram.squaredNorm();
    const double diag = gram.diagonal().squaredNorm();
    return total > 0.0 ? std::sqrt(std::max(total - diag, 0.0) / total) : 0.0;
}

ComplexVector AfbmModem::filter_adjoint(const ComplexVector& r) const {
    const Index N = params_.N;
    if (r.size() != params_.frame_length()) {
        throw DimensionError("filter_adjoint: expected length M = " + std::to_string(params_.frame_length()));
    }
    const Index len = params_.filter_length();
    ComplexVector v = ComplexVector::Zero(params_.rx_length());
    for (Index k = 0; k < params_.K; ++k) {
        for (Index t = 0; t < len; ++t) {
            v[k * N + t % N] += filter_.taps[t] * r[k * N / 2 + t];
        }
    }
    return v;
}

ComplexMatrix AfbmModem::filter_adjoint(const ComplexMatrix& y) const {
    const Index N = params_.N;
    if (y.rows() != params_.frame_length()) {
        throw DimensionError("filter_adjoint: expected M = " + std::to_string(params_.frame_length()) + " rows");
    }
    const Index len = params_.filter_length();
    ComplexMatrix v = ComplexMatrix::Zero(params_.rx_length(), y.cols());
    for (Index k = 0; k < params_.K; ++k) {
        for (Index t = 0; t < len; ++t) {
            v.row(k * N + t % N) += filter_.taps[t] * y.row(k * N / 2 + t);
        }
    }
    return v;
}

ComplexVector AfbmModem::modulate(const ComplexVector& x) const {
    if (x.size() != params_.payload()) {
        throw DimensionError("modulate: expected " + std::to_string(params_.payload()) + " symbols, got " +
                             std::to_string(x.size()));
    }
    const Index N = params_.N;
    const Index h = params_.L / 2;
    ComplexVector u(params_.rx_length());
    for (Index k = 0; k < params_.K; ++k) {
        u.segment(k * N, N).noalias() = spreader_ * x.segment(k * h, h);
    }
    return filter_apply(u);
}

ComplexVector AfbmModem::demodulate(const ComplexVector& r) const {
    if (r.size() != params_.frame_length()) {
        throw DimensionError("demodulate: expected " + std::to_string(params_.frame_length()) +
                             " samples, got " + std::to_string(r.size()));
    }
    const Index N = params_.N;
    const Index h = params_.L / 2;
    const ComplexVector v = filter_adjoint(r);
    ComplexVector y(params_.payload());
    for (Index k = 0; k < params_.K; ++k) {
        y.segment(k * h, h).noalias() = spreader_.adjoint() * v.segment(k * N, N);
    }
    return y;
}

EffectiveChannel AfbmModem::finish(const ComplexMatrix& channel_times_tx) const {
    EffectiveChannel eff;
    eff.hbar = filter_adjoint(channel_times_tx);
    eff.noise_scale = noise_scale_;
    return eff;
}

EffectiveChannel AfbmModem::effective_channel(const ComplexMatrix& H) const {
    const Index m = params_.frame_length();
    if (H.rows() != m || H.cols() != m) {
        throw DimensionError("effective_channel: H must be " + std::to_string(m) + " x " + std::to_string(m));
    }
    return finish(H * tx_matrix_);
}

EffectiveChannel AfbmModem::effective_channel(const DoublyDispersiveChannel& H) const {
    if (H.size() != params_.frame_length()) {
        throw DimensionError("effective_channel: channel frame length does not match M");
    }
    return finish(H.apply(tx_matrix_));
}

ComplexMatrix AfbmModem::full_effective_channel(const EffectiveChannel& eff) const {
    const Index N = params_.N;
    const Index h = params_.L / 2;
    if (eff.hbar.rows() != params_.rx_length() || eff.hbar.cols() != params_.payload()) {
        throw DimensionError("full_effective_channel: Hbar has the wrong shape");
    }
    ComplexMatrix heff(params_.payload(), params_.payload());
    for (Index k = 0; k < params_.K; ++k) {
        heff.middleRows(k * h, h).noalias() = spreader_.adjoint() * eff.hbar.middleRows(k * N, N);
    }
    return heff;
}

}  // namespace afbm
