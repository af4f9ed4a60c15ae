#include "afbm/detection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace afbm {

namespace {

// Plain complex arithmetic; std::complex operator* goes through the
// NaN-recovering libgcc path, which dominates the inner loops otherwise.
inline Complex mul(Complex a, Complex b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline Complex mul_conj(Complex a, Complex b) {  // conj(a) * b
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}
inline double abs2(Complex a) { return a.real() * a.real() + a.imag() * a.imag(); }

// tanh through one exp call; about three times cheaper than std::tanh and
// within a few ulp of it in absolute terms.
inline double fast_tanh(double x) {
    const double a = std::abs(x);
    if (a > 20.0) return std::copysign(1.0, x);  // tanh(20) = 1 - 8e-18
    const double e = std::exp(-2.0 * a);
    return std::copysign((1.0 - e) / (1.0 + e), x);
}

// (tanh a, tanh b) sharing one division.
inline Complex tanh_pair(double a, double b) {
    const double ua = std::abs(a);
    const double ub = std::abs(b);
    if (ua > 20.0 || ub > 20.0) return {fast_tanh(a), fast_tanh(b)};
    const double ea = std::exp(-2.0 * ua);
    const double eb = std::exp(-2.0 * ub);
    const double da = 1.0 + ea;
    const double db = 1.0 + eb;
    const double r = 1.0 / (da * db);
    return {std::copysign((1.0 - ea) * db * r, a), std::copysign((1.0 - eb) * da * r, b)};
}

void check_state(const GaBPState& state, const ComplexMatrix& H) {
    if (state.x_hat.rows() != H.rows() || state.x_hat.cols() != H.cols() || state.var_hat.rows() != H.rows() ||
        state.var_hat.cols() != H.cols()) {
        throw DimensionError("GaBP: state shape does not match the channel matrix");
    }
}

}  // namespace

void GaBPConfig::validate() const {
    if (max_iterations < 1) {
        throw ParameterError("GaBP: max_iterations must be >= 1");
    }
    if (!(damping > 0.0 && damping <= 1.0)) {
        throw ParameterError("GaBP: damping must lie in (0, 1]");
    }
    if (!(symbol_energy > 0.0)) {
        throw ParameterError("GaBP: symbol energy must be positive");
    }
    if (!(eps > 0.0)) {
        throw ParameterError("GaBP: eps must be positive");
    }
}

GaBPState gabp_init(Index rows, Index cols, double symbol_energy) {
    if (rows < 1 || cols < 1) {
        throw DimensionError("gabp_init: dimensions must be positive");
    }
    GaBPState s;
    s.x_hat = ComplexMatrix::Zero(rows, cols);
    s.var_hat = RealMatrix::Constant(rows, cols, symbol_energy);
    s.iteration = 0;
    return s;
}

void sic_step(const GaBPState& state, const ComplexMatrix& H, const ComplexVector& r, double noise_var,
              double eps, SicMessages& out) {
    check_state(state, H);
    if (r.size() != H.rows()) {
        throw DimensionError("sic_step: observation length does not match H");
    }
    const Index rows = H.rows();
    const Index cols = H.cols();
    out.r_tilde.resize(rows, cols);
    out.var_tilde.resize(rows, cols);

    ComplexVector sum_hx = ComplexVector::Zero(rows);
    RealVector sum_hv = RealVector::Zero(rows);
    for (Index m = 0; m < cols; ++m) {
        const Complex* h = H.col(m).data();
        const Complex* x = state.x_hat.col(m).data();
        const double* v = state.var_hat.col(m).data();
        for (Index n = 0; n < rows; ++n) {
            sum_hx[n] += mul(h[n], x[n]);
            sum_hv[n] += abs2(h[n]) * v[n];
        }
    }
    for (Index m = 0; m < cols; ++m) {
        const Complex* h = H.col(m).data();
        const Complex* x = state.x_hat.col(m).data();
        const double* v = state.var_hat.col(m).data();
        Complex* rt = out.r_tilde.col(m).data();
        double* vt = out.var_tilde.col(m).data();
        for (Index n = 0; n < rows; ++n) {
            rt[n] = r[n] - sum_hx[n] + mul(h[n], x[n]);
            vt[n] = std::max(sum_hv[n] - abs2(h[n]) * v[n] + noise_var, eps);
        }
    }
}

SicMessages sic_step(const GaBPState& state, const ComplexMatrix& H, const ComplexVector& r, double noise_var,
                     double eps) {
    SicMessages out;
    sic_step(state, H, r, noise_var, eps, out);
    return out;
}

void belief_step(const SicMessages& sic, const ComplexMatrix& H, double eps, Beliefs& out) {
    const Index rows = H.rows();
    const Index cols = H.cols();
    if (sic.r_tilde.rows() != rows || sic.r_tilde.cols() != cols || sic.var_tilde.rows() != rows ||
        sic.var_tilde.cols() != cols) {
        throw DimensionError("belief_step: message shape does not match H");
    }
    out.x_bar.resize(rows, cols);
    out.var_bar.resize(rows, cols);
    const double ceiling = 1.0 / eps;
    for (Index m = 0; m < cols; ++m) {
        const Complex* h = H.col(m).data();
        const Complex* rt = sic.r_tilde.col(m).data();
        const double* vt = sic.var_tilde.col(m).data();
        double info = 0.0;
        Complex mean_acc(0.0, 0.0);
        for (Index n = 0; n < rows; ++n) {
            const double inv = 1.0 / vt[n];
            info += abs2(h[n]) * inv;
            mean_acc += mul_conj(h[n], rt[n]) * inv;
        }
        Complex* xb = out.x_bar.col(m).data();
        double* vb = out.var_bar.col(m).data();
        for (Index n = 0; n < rows; ++n) {
            const double inv = 1.0 / vt[n];
            const double ext_info = info - abs2(h[n]) * inv;
            if (!(ext_info > eps)) {
                vb[n] = ceiling;
                xb[n] = Complex(0.0, 0.0);
                continue;
            }
            const double var = std::clamp(1.0 / ext_info, eps, ceiling);
            vb[n] = var;
            xb[n] = (mean_acc - mul_conj(h[n], rt[n]) * inv) * var;
        }
    }
}

Beliefs belief_step(const SicMessages& sic, const ComplexMatrix& H, double eps) {
    Beliefs out;
    belief_step(sic, H, eps, out);
    return out;
}

void denoise_qpsk_inplace(ComplexMatrix& x_bar, const RealMatrix& var_bar, double symbol_energy) {
    if (x_bar.rows() != var_bar.rows() || x_bar.cols() != var_bar.cols()) {
        throw DimensionError("denoise_qpsk: mean and variance shapes differ");
    }
    const double cx = std::sqrt(symbol_energy / 2.0);
    const Index total = x_bar.size();
    Complex* x = x_bar.data();
    const double* v = var_bar.data();
    for (Index i = 0; i < total; ++i) {
        const double gain = 2.0 * cx / v[i];
        x[i] = Complex(cx * fast_tanh(gain * x[i].real()), cx * fast_tanh(gain * x[i].imag()));
    }
}

ComplexMatrix denoise_qpsk(const ComplexMatrix& x_bar, const RealMatrix& var_bar, double symbol_energy) {
    ComplexMatrix out = x_bar;
    denoise_qpsk_inplace(out, var_bar, symbol_energy);
    return out;
}

void damp_inplace(GaBPState& state, const ComplexMatrix& x_new, double damping, double symbol_energy) {
    if (x_new.rows() != state.x_hat.rows() || x_new.cols() != state.x_hat.cols()) {
        throw DimensionError("damp: replica shapes differ");
    }
    if (!(damping > 0.0 && damping <= 1.0)) {
        throw ParameterError("damp: damping must lie in (0, 1]");
    }
    const double keep = 1.0 - damping;
    const Index total = x_new.size();
    Complex* x = state.x_hat.data();
    double* v = state.var_hat.data();
    const Complex* xn = x_new.data();
    for (Index i = 0; i < total; ++i) {
        const Complex old = x[i];
        const double fresh_var = std::max(symbol_energy - abs2(old), 0.0);
        x[i] = damping * xn[i] + keep * old;
        v[i] = damping * fresh_var + keep * v[i];
    }
    ++state.iteration;
}

GaBPState damp(const GaBPState& state, const ComplexMatrix& x_new, double damping, double symbol_energy) {
    GaBPState out = state;
    damp_inplace(out, x_new, damping, symbol_energy);
    return out;
}

ConsensusResult consensus(const SicMessages& sic, const ComplexMatrix& H) {
    const Index rows = H.rows();
    const Index cols = H.cols();
    if (sic.r_tilde.rows() != rows || sic.r_tilde.cols() != cols) {
        throw DimensionError("consensus: message shape does not match H");
    }
    ConsensusResult out;
    out.estimate.resize(cols);
    for (Index m = 0; m < cols; ++m) {
        const Complex* h = H.col(m).data();
        const Complex* rt = sic.r_tilde.col(m).data();
        const double* vt = sic.var_tilde.col(m).data();
        double info = 0.0;
        Complex acc(0.0, 0.0);
        for (Index n = 0; n < rows; ++n) {
            const double inv = 1.0 / vt[n];
            info += abs2(h[n]) * inv;
            acc += mul_conj(h[n], rt[n]) * inv;
        }
        if (!(info > 0.0)) {
            out.unresolved.push_back(m);
            out.estimate[m] = Complex(0.0, 0.0);
        } else {
            out.estimate[m] = acc / info;
        }
    }
    return out;
}

GaBPResult gabp_detect(const ComplexMatrix& H, const ComplexVector& r, double noise_var, const GaBPConfig& cfg) {
    cfg.validate();
    if (r.size() != H.rows()) {
        throw DimensionError("gabp_detect: observation length " + std::to_string(r.size()) +
                             " does not match H rows " + std::to_string(H.rows()));
    }
    if (noise_var < 0.0) {
        throw ParameterError("gabp_detect: noise variance must be nonnegative");
    }
    // Same recursion as sic_step -> belief_step -> denoise_qpsk -> damp, fused
    // into one sweep per iteration. Column m's messages depend on the other
    // columns only through the row sums, so the new sums can be accumulated
    // while the replicas are updated in place.
    const Index rows = H.rows();
    const Index cols = H.cols();
    const double eps = cfg.eps;
    const double es = cfg.symbol_energy;
    const double cx = std::sqrt(es / 2.0);
    const double beta = cfg.damping;
    const double keep = 1.0 - beta;

    GaBPState state = gabp_init(rows, cols, es);
    ComplexVector sum_hx = ComplexVector::Zero(rows);
    RealVector sum_hv = RealVector::Zero(rows);
    for (Index m = 0; m < cols; ++m) {
        for (Index n = 0; n < rows; ++n) sum_hv[n] += abs2(H(n, m)) * es;
    }
    ComplexVector next_hx(rows);
    RealVector next_hv(rows);
    ComplexVector rt(rows);
    RealVector inv(rows);
    ComplexVector fused_mean(cols);
    RealVector fused_info(cols);

    GaBPResult result;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        next_hx.setZero();
        next_hv.setZero();
        double delta = 0.0;
        double abs_sum = 0.0;
        for (Index m = 0; m < cols; ++m) {
            const Complex* h = H.col(m).data();
            Complex* x = state.x_hat.col(m).data();
            double* v = state.var_hat.col(m).data();
            double info = 0.0;
            Complex acc(0.0, 0.0);
            for (Index n = 0; n < rows; ++n) {
                const double h2 = abs2(h[n]);
                rt[n] = r[n] - sum_hx[n] + mul(h[n], x[n]);
                inv[n] = 1.0 / std::max(sum_hv[n] - h2 * v[n] + noise_var, eps);
                info += h2 * inv[n];
                acc += mul_conj(h[n], rt[n]) * inv[n];
            }
            fused_info[m] = info;
            fused_mean[m] = acc;
            for (Index n = 0; n < rows; ++n) {
                const double h2 = abs2(h[n]);
                const double ext = info - h2 * inv[n];
                Complex xd(0.0, 0.0);  // empty extrinsic set: mean 0, denoised to 0
                if (ext > eps) {
                    // x_bar = m * var and the denoiser gain is 2 c_x / var, so the
                    // tanh argument is 2 c_x m whatever the variance clamp did.
                    const Complex m = acc - mul_conj(h[n], rt[n]) * inv[n];
                    xd = cx * tanh_pair(2.0 * cx * m.real(), 2.0 * cx * m.imag());
                }
                const Complex old = x[n];
                if (cfg.convergence_tol) delta += std::abs(xd - old) * beta;
                const double fresh = std::max(es - abs2(old), 0.0);
                x[n] = beta * xd + keep * old;
                v[n] = beta * fresh + keep * v[n];
                abs_sum += std::sqrt(abs2(x[n]));
                next_hx[n] += mul(h[n], x[n]);
                next_hv[n] += h2 * v[n];
            }
        }
        sum_hx.swap(next_hx);
        sum_hv.swap(next_hv);
        ++state.iteration;
        const double edges = static_cast<double>(rows * cols);
        result.diagnostics.mean_abs_trajectory.push_back(abs_sum / edges);
        if (cfg.convergence_tol && delta / edges < *cfg.convergence_tol) {
            break;
        }
    }
    result.diagnostics.iterations = state.iteration;
    result.estimate.resize(cols);
    for (Index m = 0; m < cols; ++m) {
        if (!(fused_info[m] > 0.0)) {
            result.diagnostics.unresolved.push_back(m);
            result.estimate[m] = Complex(0.0, 0.0);
        } else {
            result.estimate[m] = fused_mean[m] / fused_info[m];
        }
    }
    result.diagnostics.residual_norm = (r - H * result.estimate).norm();
    return result;
}

ComplexVector lmmse_detect(const ComplexMatrix& H, const ComplexVector& r, double noise_var) {
    if (r.size() != H.rows()) {
        throw DimensionError("lmmse_detect: observation length does not match H");
    }
    if (noise_var < 0.0) {
        throw ParameterError("lmmse_detect: noise variance must be nonnegative");
    }
    ComplexMatrix gram = H.adjoint() * H;
    gram.diagonal().array() += noise_var;
    Eigen::LLT<ComplexMatrix> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
        throw NumericalError("lmmse_detect: singular system");
    }
    return llt.solve(H.adjoint() * r);
}

std::vector<Complex> qpsk_alphabet(double symbol_energy) {
    const double cx = std::sqrt(symbol_energy / 2.0);
    return {{cx, cx}, {-cx, cx}, {cx, -cx}, {-cx, -cx}};
}

ComplexVector map_oracle(const ComplexMatrix& H, const ComplexVector& r, const std::vector<Complex>& alphabet,
                         std::uint64_t max_candidates) {
    if (r.size() != H.rows()) {
        throw DimensionError("map_oracle: observation length does not match H");
    }
    if (alphabet.empty()) {
        throw ParameterError("map_oracle: empty alphabet");
    }
    const Index cols = H.cols();
    const std::uint64_t q = alphabet.size();
    std::uint64_t total = 1;
    for (Index m = 0; m < cols; ++m) {
        if (total > max_candidates / q) {
            throw NumericalError("map_oracle: search space exceeds " + std::to_string(max_candidates));
        }
        total *= q;
    }

    // Odometer over digit vectors with incremental residual updates.
    std::vector<std::size_t> digit(static_cast<std::size_t>(cols), 0);
    ComplexVector x = ComplexVector::Constant(cols, alphabet[0]);
    ComplexVector residual = r - H * x;
    double best = residual.squaredNorm();
    ComplexVector best_x = x;
    for (std::uint64_t c = 1; c < total; ++c) {
        Index m = 0;
        while (true) {
            const std::size_t next = (digit[m] + 1) % q;
            const Complex change = alphabet[next] - alphabet[digit[m]];
            residual.noalias() -= H.col(m) * change;
            digit[m] = next;
            x[m] = alphabet[next];
            if (next != 0) break;
            ++m;
        }
        const double cost = residual.squaredNorm();
        if (cost < best) {
            best = cost;
            best_x = x;
        }
    }
    return best_x;
}

Bits hard_demap(const ComplexVector& x) {
    Bits bits(static_cast<std::size_t>(2 * x.size()));
    for (Index i = 0; i < x.size(); ++i) {
        bits[2 * i] = x[i].real() < 0.0 ? 1 : 0;
        bits[2 * i + 1] = x[i].imag() < 0.0 ? 1 : 0;
    }
    return bits;
}

}  // namespace afbm
