#include "mzq/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mzq/error.hpp"

namespace mzq {

namespace {

bool finite(const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// In-place LU with partial pivoting of a 4x4 row-major complex matrix.
struct Lu4 {
  std::array<Complex, 16> lu;
  std::array<int, 4> perm{0, 1, 2, 3};
  bool singular = false;

  explicit Lu4(const std::array<Complex, 16>& a) : lu(a) {
    for (int k = 0; k < 4; ++k) {
      int piv = k;
      double best = std::abs(lu[k * 4 + k]);
      for (int i = k + 1; i < 4; ++i) {
        const double v = std::abs(lu[i * 4 + k]);
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (best == 0.0) {
        singular = true;
        return;
      }
      if (piv != k) {
        for (int j = 0; j < 4; ++j) std::swap(lu[k * 4 + j], lu[piv * 4 + j]);
        std::swap(perm[k], perm[piv]);
      }
      for (int i = k + 1; i < 4; ++i) {
        const Complex f = lu[i * 4 + k] / lu[k * 4 + k];
        lu[i * 4 + k] = f;
        for (int j = k + 1; j < 4; ++j) lu[i * 4 + j] -= f * lu[k * 4 + j];
      }
    }
  }

  std::array<Complex, 4> solve(const std::array<Complex, 4>& b) const {
    std::array<Complex, 4> y{};
    for (int i = 0; i < 4; ++i) {
      Complex s = b[perm[i]];
      for (int j = 0; j < i; ++j) s -= lu[i * 4 + j] * y[j];
      y[i] = s;
    }
    std::array<Complex, 4> x{};
    for (int i = 3; i >= 0; --i) {
      Complex s = y[i];
      for (int j = i + 1; j < 4; ++j) s -= lu[i * 4 + j] * x[j];
      x[i] = s / lu[i * 4 + i];
    }
    return x;
  }
};

double norm1(const std::array<Complex, 16>& a) {
  double best = 0.0;
  for (int j = 0; j < 4; ++j) {
    double col = 0.0;
    for (int i = 0; i < 4; ++i) col += std::abs(a[i * 4 + j]);
    best = std::max(best, col);
  }
  return best;
}

// Condition number in the 1-norm, using the exact inverse (4 solves).
double condition1(const Lu4& lu, const std::array<Complex, 16>& a) {
  if (lu.singular) return INFINITY;
  std::array<Complex, 16> inv{};
  for (int j = 0; j < 4; ++j) {
    std::array<Complex, 4> e{};
    e[j] = 1.0;
    const auto col = lu.solve(e);
    for (int i = 0; i < 4; ++i) inv[i * 4 + j] = col[i];
  }
  const double c = norm1(a) * norm1(inv);
  return std::isfinite(c) ? c : INFINITY;
}

Lu4 factor_checked(const std::array<Complex, 16>& a) {
  Lu4 lu(a);
  const double cond = condition1(lu, a);
  if (!(cond <= kSingularConditionLimit)) {
    std::ostringstream msg;
    msg << "port system is numerically singular (condition estimate " << cond << ")";
    fail(ErrorCode::SingularSystem, msg.str());
  }
  return lu;
}

void require_finite(const TransferMatrix4& m, const char* what) {
  if (!m.is_finite()) fail(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
}

std::array<Complex, 16> system_matrix(const TransferMatrix4& m) {
  // Unknowns x = (a1_out, a3_out, a4_out, a2_out).
  return {1.0, 0.0, -m(0, 1), -m(0, 3),  //
          0.0, 0.0, -m(1, 1), -m(1, 3),  //
          0.0, 1.0, -m(2, 1), -m(2, 3),  //
          0.0, 0.0, -m(3, 1), -m(3, 3)};
}

std::array<Complex, 4> system_rhs(const TransferMatrix4& m, Complex a2_in, Complex a4_in) {
  return {m(0, 0) * a4_in + m(0, 2) * a2_in, m(1, 0) * a4_in + m(1, 2) * a2_in,
          m(2, 0) * a4_in + m(2, 2) * a2_in, m(3, 0) * a4_in + m(3, 2) * a2_in};
}

ScatterSolution unpack(const std::array<Complex, 4>& x, Complex a2_in, Complex a4_in) {
  return ScatterSolution{a2_in, a4_in, x[0], x[1], x[3], x[2]};
}

}  // namespace

TransferMatrix4 TransferMatrix4::identity() {
  return diagonal({1.0, 1.0, 1.0, 1.0});
}

TransferMatrix4 TransferMatrix4::diagonal(const std::array<Complex, 4>& d) {
  TransferMatrix4 m;
  for (std::size_t i = 0; i < kDim; ++i) m(i, i) = d[i];
  return m;
}

bool TransferMatrix4::is_finite() const {
  return std::all_of(m_.begin(), m_.end(), finite);
}

TransferMatrix4 operator*(const TransferMatrix4& a, const TransferMatrix4& b) {
  TransferMatrix4 c;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      Complex s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

PortVector ScatterSolution::ports() const {
  return PortVector{a1_out, 0.0, a3_out, 0.0, a4_in, a4_out, a2_in, a2_out};
}

TransferMatrix4 cascade(std::span<const TransferMatrix4> ms) {
  if (ms.empty()) fail(ErrorCode::EmptyCascade, "cascade of an empty component list");
  for (const auto& m : ms) require_finite(m, "cascade input");
  TransferMatrix4 total = ms.front();
  for (std::size_t i = 1; i < ms.size(); ++i) total = total * ms[i];
  return total;
}

PortSystem port_system(const TransferMatrix4& total, Complex a2_in, Complex a4_in) {
  return PortSystem{system_matrix(total), system_rhs(total, a2_in, a4_in)};
}

ScatterSolution solve_ports(const TransferMatrix4& total, Complex a2_in, Complex a4_in) {
  require_finite(total, "total transfer matrix");
  if (!finite(a2_in) || !finite(a4_in)) fail(ErrorCode::NonFinite, "drive amplitude is not finite");
  if (a2_in == 0.0 && a4_in == 0.0) {
    fail(ErrorCode::InvalidArgument, "solve_ports needs at least one nonzero drive");
  }
  const auto a = system_matrix(total);
  const Lu4 lu = factor_checked(a);
  return unpack(lu.solve(system_rhs(total, a2_in, a4_in)), a2_in, a4_in);
}

SParameters s_parameters(const TransferMatrix4& total) {
  require_finite(total, "total transfer matrix");
  const auto a = system_matrix(total);
  const Lu4 lu = factor_checked(a);
  const auto d2 = unpack(lu.solve(system_rhs(total, 1.0, 0.0)), 1.0, 0.0);
  const auto d4 = unpack(lu.solve(system_rhs(total, 0.0, 1.0)), 0.0, 1.0);
  return SParameters{d2.a1_out, d2.a3_out, d2.a2_out, d2.a4_out,
                     d4.a3_out, d4.a1_out, d4.a4_out, d4.a2_out};
}

}  // namespace mzq
