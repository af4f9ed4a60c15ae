// transforms.hpp - elementary matrices of the AFBM signal model.
//
// DFT, quadratic-phase (chirp) diagonals, the discrete affine Fourier
// transform (DAFT) and its row-truncated form, fractional powers of the
// roots-of-unity diagonal, circular delay permutations and the
// chirp-cyclic-prefix phase diagonal. Everything is materialized densely.

#pragma once

#include "afbm/types.hpp"

namespace afbm {

/// Unitary n-point DFT: entry (a,b) = exp(-j2*pi*a*b/n) / sqrt(n).
ComplexMatrix dft_matrix(Index n);

/// Diagonal chirp exp(-j2*pi*c*m^2), m = 0..n-1.
ComplexMatrix chirp_diag(double c, Index n);

/// Diagonal entries of chirp_diag as a vector.
ComplexVector chirp_phases(double c, Index n);

/// W = Lambda_{c1} F Lambda_{c2}.
ComplexMatrix daft_matrix(double c1, double c2, Index n);

/// First L rows of the P-point DAFT. Throws ParameterError when L > P.
ComplexMatrix truncated_daft(double c1, double c2, Index L, Index P);

/// Z^f with Z = diag(exp(-j2*pi*m/M)); f may be fractional.
ComplexMatrix roots_of_unity_power(Index M, double f);
ComplexVector roots_of_unity_phases(Index M, double f);

/// Permutation Pi^l with (Pi^l x)[n] = x[(n - l) mod M], i.e. a circular
/// delay by l samples. Throws ParameterError when l >= M unless
/// `wrap` is set, in which case l is reduced modulo M.
ComplexMatrix cyclic_shift(Index M, Index delay, bool wrap = false);

/// Chirp-cyclic-prefix phase diag[e^{-j2pi phi(l)}, ..., e^{-j2pi phi(1)}, 1, ..., 1]
/// with phi(m) = c1 (M^2 - 2 M m).
ComplexMatrix ccp_phase(Index M, double c1, Index delay);
ComplexVector ccp_phases(Index M, double c1, Index delay);

}  // namespace afbm
