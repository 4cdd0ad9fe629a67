#pragma once

// Complex 4x4 transfer-matrix algebra for the interferometer network.
//
// A transfer matrix relates the mode amplitudes on the left side of a
// circuit block to those on its right side:
//
//   (a1_out, a1_in, a3_out, a3_in)^T = M * (a4_in, a4_out, a2_in, a2_out)^T
//
// Blocks compose by ordinary matrix multiplication, leftmost block first.

#include <array>
#include <complex>
#include <cstddef>
#include <span>

namespace mzq {

using Complex = std::complex<double>;

class TransferMatrix4 {
 public:
  static constexpr std::size_t kDim = 4;

  // Zero matrix.
  constexpr TransferMatrix4() = default;
  explicit constexpr TransferMatrix4(const std::array<Complex, 16>& row_major)
      : m_(row_major) {}

  static TransferMatrix4 identity();
  static TransferMatrix4 diagonal(const std::array<Complex, 4>& d);

  Complex& operator()(std::size_t row, std::size_t col) { return m_[row * kDim + col]; }
  const Complex& operator()(std::size_t row, std::size_t col) const {
    return m_[row * kDim + col];
  }

  const std::array<Complex, 16>& data() const { return m_; }

  bool is_finite() const;

  friend TransferMatrix4 operator*(const TransferMatrix4& a, const TransferMatrix4& b);
  friend bool operator==(const TransferMatrix4&, const TransferMatrix4&) = default;

 private:
  std::array<Complex, 16> m_{};
};

// Mode amplitudes on both sides, in the ordering of the port relation above.
struct PortVector {
  Complex a1_out, a1_in, a3_out, a3_in;
  Complex a4_in, a4_out, a2_in, a2_out;
};

// Outgoing amplitudes for one drive configuration (a1_in = a3_in = 0).
struct ScatterSolution {
  Complex a2_in, a4_in;
  Complex a1_out, a3_out, a2_out, a4_out;

  PortVector ports() const;
};

// S-parameters of the interferometer: S_ij = a_i,out / a_j,in for a unit
// drive at port j. Cross paths are s12/s34; through paths s32/s14.
struct SParameters {
  Complex s12, s32, s22, s42;  // drive at port 2
  Complex s34, s14, s44, s24;  // drive at port 4
};

// Ordered product ms[0] * ms[1] * ... * ms[n-1].
// Throws EmptyCascade for an empty list and NonFinite on NaN/Inf entries.
TransferMatrix4 cascade(std::span<const TransferMatrix4> ms);

// Solves the port relation for the four outgoing amplitudes with no signal
// entering ports 1 and 3. Throws SingularSystem when the 1-norm condition
// estimate of the 4x4 system exceeds 1e12.
ScatterSolution solve_ports(const TransferMatrix4& total, Complex a2_in, Complex a4_in);

// Both unit-drive solutions of solve_ports, sharing one factorization.
SParameters s_parameters(const TransferMatrix4& total);

// The 4x4 system A x = b solved by solve_ports, with
// x = (a1_out, a3_out, a4_out, a2_out). Exposed for independent checks.
struct PortSystem {
  std::array<Complex, 16> a;
  std::array<Complex, 4> b;
};
PortSystem port_system(const TransferMatrix4& total, Complex a2_in, Complex a4_in);

inline constexpr double kSingularConditionLimit = 1e12;

}  // namespace mzq
