#include "afbm/modem.hpp"
#include "afbm/rng.hpp"
#include "afbm/transforms.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace afbm;
using testing::identity_deviation;
using testing::max_abs;

namespace {

WaveformParams small_params(FilterKind kind) {
    WaveformParams p;
    p.L = 16;
    p.K = 3;
    p.P = 24;
    p.N = 32;
    p.filter = kind;
    p.O = default_overlap(kind);
    p.c1 = default_c1(p.P, 1.0, 1);
    return p;
}

// Transmit matrix assembled from the dense definitions, independent of the
// modem's structured implementation.
ComplexMatrix dense_tx(const WaveformParams& p, const ComplexVector& b) {
    const PrototypeFilter g = prototype_filter(p.filter, p.N, p.O);
    const ComplexMatrix cf = daft_matrix(p.c1, p.c2, p.L) * b.asDiagonal();
    const ComplexMatrix qc = build_QP(p) * cf;
    ComplexMatrix blk = ComplexMatrix::Zero(p.N * p.K, p.L * p.K);
    for (Index k = 0; k < p.K; ++k) blk.block(k * p.N, k * p.L, p.N, p.L) = qc;
    return filter_matrix(g, p.N, p.K) * blk * placement_matrix(p.L, p.K);
}

ComplexVector random_qpsk(Rng& rng, Index n) { return qpsk_modulate(random_bits(rng, 2 * n), 1.0); }

}  // namespace

TEST_CASE("placement_matrix structure") {
    const ComplexMatrix xi = placement_matrix(8, 1);
    CHECK(xi.rows() == 8);
    CHECK(xi.cols() == 4);
    CHECK(xi(0, 0) == Complex(1.0));
    CHECK(xi(1, 1) == Complex(1.0));
    CHECK(xi(6, 2) == Complex(1.0));
    CHECK(xi(7, 3) == Complex(1.0));
    CHECK(xi.cwiseAbs().sum() == doctest::Approx(4.0));

    const ComplexMatrix xi2 = placement_matrix(8, 2);
    CHECK(xi2.rows() == 16);
    CHECK(xi2.cols() == 8);
    CHECK(max_abs(xi2.block(0, 0, 8, 4) - xi) == 0.0);
    CHECK(max_abs(xi2.block(8, 4, 8, 4) - xi) == 0.0);
    CHECK(max_abs(xi2.block(0, 4, 8, 4)) == 0.0);

    const ComplexMatrix big = placement_matrix(128, 8);
    CHECK(identity_deviation(big.adjoint() * big) == 0.0);
    const ComplexMatrix proj = big * big.adjoint();
    CHECK(proj.diagonal().real().sum() == doctest::Approx(512.0));
    CHECK_THROWS_AS(placement_matrix(6, 1), std::invalid_argument);
}

TEST_CASE("prototype filters") {
    const auto ph = prototype_filter(FilterKind::Phydyas, 64, 4.0);
    CHECK(ph.taps.size() == 256);
    const auto he = prototype_filter(FilterKind::Hermite, 64, 1.5);
    CHECK(he.taps.size() == 96);
    for (const auto* g : {&ph, &he}) {
        CHECK(std::abs(g->taps.squaredNorm() - 1.0) < 1e-12);
        const Index n = g->taps.size();
        for (Index i = 0; i < n; ++i) CHECK(std::abs(g->taps[i] - g->taps[n - 1 - i]) < 1e-9);
        // peak in the middle
        Index arg = 0;
        g->taps.maxCoeff(&arg);
        CHECK(std::abs(2 * arg - (n - 1)) <= 1);
    }
    CHECK_THROWS_AS(prototype_filter(FilterKind::Phydyas, 64, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(prototype_filter(FilterKind::Hermite, 64, 1.25), std::invalid_argument);
    CHECK_THROWS_AS(prototype_filter(FilterKind::Rectangular, 64, 2.0), std::invalid_argument);
}

TEST_CASE("PHYDYAS frequency samples") {
    // Only bins |k| <= 3 of the half-sample-shifted ON-point DFT are nonzero,
    // in the ratios 1 : 0.971960 : 1/sqrt2 : 0.235147.
    const Index N = 32;
    const auto g = prototype_filter(FilterKind::Phydyas, N, 4.0);
    const Index len = g.taps.size();
    auto bin = [&](int k) {
        Complex acc(0.0, 0.0);
        for (Index n = 0; n < len; ++n) {
            acc += g.taps[n] * std::polar(1.0, -2.0 * std::numbers::pi * k * (n + 0.5) / len);
        }
        return std::abs(acc);
    };
    const double h0 = bin(0);
    CHECK(bin(1) / h0 == doctest::Approx(0.971960).epsilon(1e-9));
    CHECK(bin(2) / h0 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
    CHECK(bin(3) / h0 == doctest::Approx(0.235147).epsilon(1e-9));
    for (int k = 4; k < 12; ++k) CHECK(bin(k) / h0 < 1e-12);
}

TEST_CASE("filter_matrix examples") {
    PrototypeFilter g;
    g.kind = FilterKind::Rectangular;
    g.overlap = 1.0;
    g.taps.resize(4);
    g.taps << 1.0, 2.0, 3.0, 4.0;
    const ComplexMatrix g1 = filter_matrix(g, 4, 1);
    CHECK(g1.rows() == 4);
    CHECK(g1.cols() == 4);
    CHECK(max_abs(g1 - ComplexMatrix(g.taps.cast<Complex>().asDiagonal())) == 0.0);

    const ComplexMatrix g2 = filter_matrix(g, 4, 2);
    CHECK(g2.rows() == 6);
    CHECK(g2.cols() == 8);
    CHECK(max_abs(g2.block(2, 4, 4, 4) - g2.block(0, 0, 4, 4)) == 0.0);
    CHECK(max_abs(g2.block(0, 4, 2, 4)) == 0.0);

    const auto ph = prototype_filter(FilterKind::Phydyas, 64, 4.0);
    const ComplexMatrix gp = filter_matrix(ph, 64, 8);
    CHECK(gp.rows() == 480);
    CHECK(gp.cols() == 512);

    g.taps.resize(3);
    CHECK_THROWS_AS(filter_matrix(g, 4, 1), std::invalid_argument);
}

TEST_CASE("build_T") {
    const ComplexMatrix t = build_T(4, 2);
    ComplexMatrix ref = ComplexMatrix::Zero(4, 2);
    ref(0, 1) = 1.0;
    ref(3, 0) = 1.0;
    CHECK(max_abs(t - ref) == 0.0);
    for (auto [N, P] : {std::pair<Index, Index>{8, 8}, {256, 256}, {256, 160}, {64, 2}}) {
        const ComplexMatrix tt = build_T(N, P);
        CHECK(identity_deviation(tt.transpose() * tt) == 0.0);
    }
    const ComplexMatrix sq = build_T(8, 8);
    CHECK(identity_deviation(sq * sq.transpose()) == 0.0);  // a permutation when N = P
    CHECK_THROWS_AS(build_T(4, 6), std::invalid_argument);
    CHECK_THROWS_AS(build_T(8, 3), std::invalid_argument);
}

TEST_CASE("build_QP") {
    WaveformParams p;
    p.L = 32;
    p.P = 64;
    p.N = 64;
    p.c1 = 0.05;
    const ComplexMatrix q = build_QP(p);
    CHECK(q.rows() == 64);
    CHECK(q.cols() == 32);
    CHECK(identity_deviation(q.adjoint() * q) < 1e-10);

    // L = P = N with no chirp: Q_P = F^H T
    WaveformParams s;
    s.L = s.P = s.N = 16;
    s.c1 = 0.0;
    const ComplexMatrix q2 = build_QP(s);
    CHECK(max_abs(q2 - dft_matrix(16).adjoint() * build_T(16, 16)) < 1e-12);
}

TEST_CASE("waveform parameters") {
    WaveformParams p;
    p.L = 128;
    p.K = 8;
    p.P = 256;
    p.N = 256;
    p.O = 1.5;
    p.filter = FilterKind::Hermite;
    CHECK(p.frame_length() == 1280);
    p.O = 4.0;
    CHECK(p.frame_length() == 1920);
    CHECK(p.rx_length() == 2048);
    CHECK(p.payload() == 512);
    CHECK(default_c1(256, 2.0, 1) == doctest::Approx(7.0 / 512.0));
    WaveformParams bad = p;
    bad.L = 30;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.P = 300;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.P = 100;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("compensation for a rectangular single block is all ones") {
    WaveformParams p;
    p.L = p.P = p.N = 16;
    p.K = 1;
    p.O = 1.0;
    p.filter = FilterKind::Rectangular;
    p.c1 = 0.05;
    const ComplexVector b = compensation_vector(p, prototype_filter(p.filter, p.N, p.O));
    CHECK(max_abs(b - ComplexVector::Ones(16)) < 1e-12);
}

TEST_CASE("compensation entries are positive and normalize each position") {
    const WaveformParams p = small_params(FilterKind::Phydyas);
    const PrototypeFilter g = prototype_filter(p.filter, p.N, p.O);
    const ComplexVector b = compensation_vector(p, g);
    for (Index i = 0; i < b.size(); ++i) {
        CHECK(b[i].real() > 0.0);
        CHECK(b[i].imag() == 0.0);
        CHECK(std::isfinite(b[i].real()));
    }
    // every single-block impulse response has unit energy after compensation
    const ComplexMatrix g1 = filter_matrix(g, p.N, 1);
    const ComplexMatrix resp = g1 * build_QP(p) * daft_matrix(p.c1, p.c2, p.L) * b.asDiagonal();
    for (Index i = 0; i < p.L; ++i) CHECK(resp.col(i).squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("modem matches the dense chain") {
    for (FilterKind kind : {FilterKind::Hermite, FilterKind::Phydyas}) {
        const WaveformParams p = small_params(kind);
        const AfbmModem modem(p);
        const ComplexMatrix ref = dense_tx(p, modem.compensation());
        CHECK(max_abs(modem.transmit_matrix() - ref) < 1e-10);
        Rng rng(11);
        const ComplexVector x = random_qpsk(rng, p.payload());
        CHECK(max_abs(modem.modulate(x) - ref * x) < 1e-10);
        const ComplexVector r = complex_gaussian_vector(rng, p.frame_length());
        CHECK(max_abs(modem.demodulate(r) - ref.adjoint() * r) < 1e-10);
        const ComplexMatrix G = filter_matrix(modem.filter(), p.N, p.K);
        CHECK(max_abs(modem.filter_adjoint(r) - G.adjoint() * r) < 1e-12);
        const ComplexVector u = complex_gaussian_vector(rng, p.rx_length());
        CHECK(max_abs(modem.filter_apply(u) - G * u) < 1e-12);
    }
}

TEST_CASE("modulate is linear and demodulate is its adjoint") {
    const WaveformParams p = small_params(FilterKind::Phydyas);
    const AfbmModem modem(p);
    Rng rng(5);
    const ComplexVector x1 = random_qpsk(rng, p.payload());
    const ComplexVector x2 = random_qpsk(rng, p.payload());
    CHECK(max_abs(modem.modulate(x1 + x2) - modem.modulate(x1) - modem.modulate(x2)) < 1e-12);
    CHECK(max_abs(modem.modulate(ComplexVector::Zero(p.payload()))) == 0.0);
    CHECK(max_abs(modem.demodulate(ComplexVector::Zero(p.frame_length()))) == 0.0);
    for (int t = 0; t < 5; ++t) {
        const ComplexVector r = complex_gaussian_vector(rng, p.frame_length());
        const ComplexVector x = random_qpsk(rng, p.payload());
        const Complex lhs = modem.demodulate(r).dot(x);
        const Complex rhs = r.dot(modem.modulate(x));
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
    CHECK_THROWS_AS(modem.modulate(ComplexVector::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(modem.demodulate(ComplexVector::Zero(3)), std::invalid_argument);
}

TEST_CASE("single-block rectangular loopback is exact") {
    WaveformParams p;
    p.L = 16;
    p.P = 24;
    p.N = 32;
    p.K = 1;
    p.O = 1.0;
    p.filter = FilterKind::Rectangular;
    p.c1 = default_c1(p.P, 1.0, 1);
    const AfbmModem modem(p);
    Rng rng(3);
    const ComplexVector x = random_qpsk(rng, p.payload());
    CHECK(max_abs(modem.demodulate(modem.modulate(x)) - x) < 1e-12);
    CHECK(modem.noise_offdiagonal_ratio() == doctest::Approx(0.0));
}

TEST_CASE("effective channel") {
    const WaveformParams p = small_params(FilterKind::Hermite);
    const AfbmModem modem(p);
    const Index m = p.frame_length();
    const ComplexMatrix eye = ComplexMatrix::Identity(m, m);
    const EffectiveChannel e1 = modem.effective_channel(eye);
    CHECK(e1.hbar.rows() == p.rx_length());
    CHECK(e1.hbar.cols() == p.payload());
    const Complex alpha(0.3, -1.2);
    const EffectiveChannel ea = modem.effective_channel(ComplexMatrix(alpha * eye));
    CHECK(max_abs(ea.hbar - alpha * e1.hbar) < 1e-12);

    // the full loopback matrix has a unit diagonal by construction of b
    const ComplexMatrix heff = modem.full_effective_channel(e1);
    CHECK(heff.rows() == p.payload());
    CHECK(max_abs(heff.diagonal() - ComplexVector::Ones(p.payload())) < 1e-10);
    CHECK(max_abs(heff - modem.transmit_matrix().adjoint() * modem.transmit_matrix()) < 1e-10);

    // structured and dense channel give the same Hbar
    Rng rng(9);
    ChannelConfig cc;
    cc.max_doppler = 1.0;
    const auto paths = sample_paths(cc, rng);
    const DoublyDispersiveChannel H(paths, m, p.c1);
    const EffectiveChannel fast = modem.effective_channel(H);
    const EffectiveChannel dense = modem.effective_channel(channel_matrix(paths, m, p.c1));
    CHECK(max_abs(fast.hbar - dense.hbar) < 1e-10);
    CHECK(fast.noise_scale == doctest::Approx(modem.noise_scale()));
    CHECK_THROWS_AS(modem.effective_channel(ComplexMatrix::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("noise scale is the mean filtered-noise variance") {
    const WaveformParams p = small_params(FilterKind::Phydyas);
    const AfbmModem modem(p);
    const ComplexMatrix G = filter_matrix(modem.filter(), p.N, p.K);
    const ComplexMatrix gram = G.adjoint() * G;
    CHECK(modem.noise_scale() == doctest::Approx(gram.diagonal().real().mean()).epsilon(1e-12));
    const double off = std::sqrt((gram.squaredNorm() - gram.diagonal().squaredNorm()) / gram.squaredNorm());
    CHECK(modem.noise_offdiagonal_ratio() == doctest::Approx(off).epsilon(1e-10));
}

TEST_CASE("full-size dimensions") {
    WaveformParams p;
    p.filter = FilterKind::Phydyas;
    p.O = 4.0;
    p.c1 = default_c1(256, 2.0, 1);
    const AfbmModem modem(p);
    CHECK(modem.transmit_matrix().rows() == 1920);
    const EffectiveChannel e = modem.effective_channel(
        DoublyDispersiveChannel({ChannelPath{}}, p.frame_length(), p.c1));
    CHECK(e.hbar.rows() == 2048);
    CHECK(e.hbar.cols() == 512);
    // energy bookkeeping: b normalizes each column, so E||s||^2 = E||x||^2
    Rng rng(1);
    double ratio = 0.0;
    for (int t = 0; t < 20; ++t) {
        const ComplexVector x = random_qpsk(rng, p.payload());
        ratio += modem.modulate(x).squaredNorm() / x.squaredNorm() / 20.0;
    }
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("identity-channel loopback does not depend on c1") {
    WaveformParams p = small_params(FilterKind::Phydyas);
    const AfbmModem a(p);
    p.c1 = 0.37;
    const AfbmModem b(p);
    const ComplexMatrix eye = ComplexMatrix::Identity(p.frame_length(), p.frame_length());
    const ComplexMatrix ha = a.full_effective_channel(a.effective_channel(eye));
    const ComplexMatrix hb = b.full_effective_channel(b.effective_channel(eye));
    CHECK(max_abs(ha - hb) < 1e-10);
}
