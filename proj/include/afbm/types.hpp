// types.hpp - common numeric types for the AFBM simulation library.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace afbm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

using Bits = std::vector<std::uint8_t>;

/// Raised when operand shapes do not agree with an operation's contract.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a parameter set violates a structural invariant.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical procedure cannot produce a meaningful answer
/// (singular system, filter nulls, search space too large).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// exp(-j*2*pi*turns), with the argument reduced modulo one full turn first.
Complex unit_phasor_neg(long double turns);

}  // namespace afbm
