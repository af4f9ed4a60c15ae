#include "afbm/transforms.hpp"

#include <cmath>
#include <string>

namespace afbm {

Complex unit_phasor_neg(long double turns) {
    long double frac = turns - std::floor(turns);
    const double angle = -kTwoPi * static_cast<double>(frac);
    return {std::cos(angle), std::sin(angle)};
}

namespace {

void require_positive(Index n, const char* what) {
    if (n < 1) {
        throw ParameterError(std::string(what) + ": size must be >= 1, got " + std::to_string(n));
    }
}

ComplexMatrix as_diag(const ComplexVector& d) {
    ComplexMatrix m = ComplexMatrix::Zero(d.size(), d.size());
    m.diagonal() = d;
    return m;
}

}  // namespace

ComplexMatrix dft_matrix(Index n) {
    require_positive(n, "dft_matrix");
    // a*b mod n is exact in integers, so no phase precision is lost for large n.
    ComplexVector roots(n);
    for (Index k = 0; k < n; ++k) {
        roots[k] = unit_phasor_neg(static_cast<long double>(k) / n);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    ComplexMatrix f(n, n);
    for (Index b = 0; b < n; ++b) {
        for (Index a = 0; a < n; ++a) {
            f(a, b) = roots[(a * b) % n] * scale;
        }
    }
    return f;
}

ComplexVector chirp_phases(double c, Index n) {
    require_positive(n, "chirp_diag");
    ComplexVector d(n);
    for (Index m = 0; m < n; ++m) {
        const long double m2 = static_cast<long double>(m) * m;
        d[m] = unit_phasor_neg(static_cast<long double>(c) * m2);
    }
    return d;
}

ComplexMatrix chirp_diag(double c, Index n) { return as_diag(chirp_phases(c, n)); }

ComplexMatrix daft_matrix(double c1, double c2, Index n) {
    const ComplexVector left = chirp_phases(c1, n);
    const ComplexVector right = chirp_phases(c2, n);
    return left.asDiagonal() * dft_matrix(n) * right.asDiagonal();
}

ComplexMatrix truncated_daft(double c1, double c2, Index L, Index P) {
    require_positive(L, "truncated_daft");
    if (L > P) {
        throw ParameterError("truncated_daft: L=" + std::to_string(L) + " exceeds P=" + std::to_string(P));
    }
    return daft_matrix(c1, c2, P).topRows(L);
}

ComplexVector roots_of_unity_phases(Index M, double f) {
    require_positive(M, "roots_of_unity_power");
    ComplexVector d(M);
    for (Index m = 0; m < M; ++m) {
        d[m] = unit_phasor_neg(static_cast<long double>(m) * f / M);
    }
    return d;
}

ComplexMatrix roots_of_unity_power(Index M, double f) { return as_diag(roots_of_unity_phases(M, f)); }

ComplexMatrix cyclic_shift(Index M, Index delay, bool wrap) {
    require_positive(M, "cyclic_shift");
    if (delay < 0 || (!wrap && delay >= M)) {
        throw ParameterError("cyclic_shift: delay " + std::to_string(delay) + " outside [0, " +
                             std::to_string(M) + ")");
    }
    delay %= M;
    ComplexMatrix p = ComplexMatrix::Zero(M, M);
    for (Index n = 0; n < M; ++n) {
        p(n, (n - delay + M) % M) = 1.0;
    }
    return p;
}

ComplexVector ccp_phases(Index M, double c1, Index delay) {
    require_positive(M, "ccp_phase");
    if (delay < 0 || delay >= M) {
        throw ParameterError("ccp_phase: delay " + std::to_string(delay) + " outside [0, " +
                             std::to_string(M) + ")");
    }
    ComplexVector d = ComplexVector::Ones(M);
    const long double mm = static_cast<long double>(M);
    for (Index n = 0; n < delay; ++n) {
        const long double m = static_cast<long double>(delay - n);
        d[n] = unit_phasor_neg(static_cast<long double>(c1) * (mm * mm - 2.0L * mm * m));
    }
    return d;
}

ComplexMatrix ccp_phase(Index M, double c1, Index delay) { return as_diag(ccp_phases(M, c1, delay)); }

}  // namespace afbm
