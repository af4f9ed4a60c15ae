// detection.hpp - symbol detectors for r = H x + w.
//
// GaBP keeps one soft replica and one MSE per edge (n, m) of the dense
// observation matrix and iterates
//   soft interference cancellation -> extrinsic belief -> QPSK denoiser -> damping
// for a fixed budget, then fuses all rows of each column in a final
// consensus step. Leave-one-out sums are formed as (full sum - own term),
// so an iteration costs O(rows * cols).

#pragma once

#include "afbm/types.hpp"

#include <optional>
#include <vector>

namespace afbm {

struct GaBPConfig {
    int max_iterations = 20;
    double damping = 0.5;  // beta, weight of the new replica
    double symbol_energy = 1.0;
    double eps = 1e-12;  // variance floor; 1/eps is the ceiling
    /// Stop once mean |x_hat(i) - x_hat(i-1)| falls below this; disabled when unset.
    std::optional<double> convergence_tol;

    void validate() const;
};

struct GaBPState {
    ComplexMatrix x_hat;  // rows x cols soft replicas
    RealMatrix var_hat;   // their MSEs
    int iteration = 0;
};

struct SicMessages {
    ComplexMatrix r_tilde;
    RealMatrix var_tilde;
};

struct Beliefs {
    ComplexMatrix x_bar;
    RealMatrix var_bar;
};

struct GaBPDiagnostics {
    int iterations = 0;
    std::vector<double> mean_abs_trajectory;  // mean |x_hat| after each iteration
    double residual_norm = 0.0;               // ||r - H x_hat||
    std::vector<Index> unresolved;            // columns with no energy
};

struct GaBPResult {
    ComplexVector estimate;
    GaBPDiagnostics diagnostics;
};

GaBPState gabp_init(Index rows, Index cols, double symbol_energy);

/// r~_{n,m} = r_n - sum_{e != m} h_{n,e} x^_{n,e}
/// s~2_{n,m} = sum_{e != m} |h_{n,e}|^2 s^2_{n,e} + noise_var   (floored at eps)
void sic_step(const GaBPState& state, const ComplexMatrix& H, const ComplexVector& r, double noise_var,
              double eps, SicMessages& out);
SicMessages sic_step(const GaBPState& state, const ComplexMatrix& H, const ComplexVector& r, double noise_var,
                     double eps = 1e-12);

/// Extrinsic mean and variance over all rows except n. An empty or
/// information-free extrinsic set yields mean 0 with variance 1/eps.
void belief_step(const SicMessages& sic, const ComplexMatrix& H, double eps, Beliefs& out);
Beliefs belief_step(const SicMessages& sic, const ComplexMatrix& H, double eps = 1e-12);

/// x^ = c_x (tanh(2 c_x Re x_bar / v) + j tanh(2 c_x Im x_bar / v)), c_x = sqrt(E_S / 2).
ComplexMatrix denoise_qpsk(const ComplexMatrix& x_bar, const RealMatrix& var_bar, double symbol_energy);
void denoise_qpsk_inplace(ComplexMatrix& x_bar, const RealMatrix& var_bar, double symbol_energy);

/// x^(i) = b x_new + (1-b) x^(i-1);  s^2(i) = b (E_S - |x^(i-1)|^2) + (1-b) s^2(i-1).
GaBPState damp(const GaBPState& state, const ComplexMatrix& x_new, double damping, double symbol_energy);
void damp_inplace(GaBPState& state, const ComplexMatrix& x_new, double damping, double symbol_energy);

struct ConsensusResult {
    ComplexVector estimate;
    std::vector<Index> unresolved;
};

ConsensusResult consensus(const SicMessages& sic, const ComplexMatrix& H);

GaBPResult gabp_detect(const ComplexMatrix& H, const ComplexVector& r, double noise_var, const GaBPConfig& cfg);

/// (H^H H + noise_var I)^{-1} H^H r. Throws NumericalError when the system
/// is not positive definite (noise_var = 0 with a rank-deficient Gram).
ComplexVector lmmse_detect(const ComplexMatrix& H, const ComplexVector& r, double noise_var);

/// QPSK alphabet scaled to symbol_energy, in Gray order (bits 00, 10, 01, 11).
std::vector<Complex> qpsk_alphabet(double symbol_energy);

/// Exhaustive argmin_x ||r - H x||^2 over alphabet^cols. Throws
/// NumericalError when |alphabet|^cols exceeds max_candidates.
ComplexVector map_oracle(const ComplexMatrix& H, const ComplexVector& r, const std::vector<Complex>& alphabet,
                         std::uint64_t max_candidates = 1'000'000);

/// Two bits per symbol: bit0 = (Re < 0), bit1 = (Im < 0). Zero maps to 0.
Bits hard_demap(const ComplexVector& x);

}  // namespace afbm
