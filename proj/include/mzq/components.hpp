#pragma once

// Component transfer matrices (lines, beam splitters, the qubit scatterer)
// and the Mach-Zehnder circuit built from them:
//
//   M = M_BS * M_TL * M_Q * M_TL * M_BS
//
// Angular frequencies are in rad/s throughout; trace grids are in Hz.

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mzq/netcore.hpp"

namespace mzq {

// Per-index line segment parameters. Index k of the transfer matrix gets
// exp(i c_k) with c_k = i * attenuation[k] + phase_rate[k] * omega. Indices
// 0 and 1 belong to arm a, 2 and 3 to arm b.
struct LineParams {
  std::array<double, 4> phase_rate{};   // s (rad per rad/s)
  std::array<double, 4> attenuation{};  // nepers, >= 0

  // Lossless arms whose round-trip phase difference is a multiple `order` of
  // 2 pi at center_omega, so all power goes to the cross port there. Arm b
  // is the longer arm.
  static LineParams imbalanced_arms(double center_omega, int order, double base_delay = 0.0);

  void validate() const;
};

struct BeamSplitterModel {
  enum class Kind { Ideal, BranchLine };
  Kind kind = Kind::Ideal;
  double center_omega = 0.0;  // rad/s, BranchLine design frequency

  static BeamSplitterModel ideal() { return {}; }
  static BeamSplitterModel branch_line(double center_omega) {
    return {Kind::BranchLine, center_omega};
  }
};

struct QubitScatterer {
  double omega01 = 0.0;    // rad/s
  double gamma1 = 0.0;     // rad/s
  double gamma_phi = 0.0;  // rad/s
  double r0 = 1.0;         // maximum reflection amplitude, (0, 1]
  double rabi = 0.0;       // rad/s

  double gamma2() const { return 0.5 * gamma1 + gamma_phi; }
  void validate() const;
};

enum class QubitArm { A, B };

// Reciprocal is the standard two-port transfer block
//   (1/t) [[t^2 - r^2, r], [-r, 1]],
// which is the identity for r = 0. Literal keeps -r^2/t in the corner, as
// sometimes printed for this circuit; it is not transparent at r = 0.
enum class QubitMatrixForm { Reciprocal, Literal };

// Optional instrument response applied on top of the circuit:
// S -> scale * exp(-i * delay * (omega - reference_omega)) * S.
struct Calibration {
  Complex scale{1.0, 0.0};
  double delay = 0.0;  // s
  double reference_omega = 0.0;

  Complex factor(double omega) const;
};

struct CircuitSpec {
  BeamSplitterModel splitter;
  LineParams lines;
  std::optional<QubitScatterer> qubit;
  QubitArm qubit_arm = QubitArm::A;
  QubitMatrixForm qubit_form = QubitMatrixForm::Reciprocal;
  std::optional<Calibration> calibration;

  void validate() const;
};

enum class Path { S12, S32, S34, S14 };

std::string_view to_string(Path p) noexcept;
std::optional<Path> parse_path(std::string_view name) noexcept;
bool is_cross(Path p) noexcept;
inline constexpr std::array<Path, 4> kAllPaths{Path::S12, Path::S32, Path::S34, Path::S14};

enum class DrivePort { Port2, Port4, Both };

struct SpectrumTrace {
  std::vector<double> freqs;                    // Hz, strictly increasing
  std::map<Path, std::vector<Complex>> values;  // one array per recorded path
  double noise_sigma = 0.0;
  std::string label;
  double flux = std::numeric_limits<double>::quiet_NaN();  // Phi_0, if known

  bool has(Path p) const { return values.count(p) != 0; }
  const std::vector<Complex>& at(Path p) const;
  void validate() const;
};

struct QubitRT {
  Complex r;
  Complex t;
};

inline constexpr double kDegenerateTransmission = 1e-9;

TransferMatrix4 tl_matrix(const LineParams& p, double omega);
TransferMatrix4 bs_matrix(const BeamSplitterModel& b, double omega);
QubitRT qubit_rt(const QubitScatterer& q, double omega);

// Throws DegenerateScatterer when |t| < kDegenerateTransmission.
TransferMatrix4 qubit_matrix(const QubitRT& rt, QubitArm arm = QubitArm::A,
                             QubitMatrixForm form = QubitMatrixForm::Reciprocal);
TransferMatrix4 qubit_matrix(const QubitScatterer& q, double omega, QubitArm arm = QubitArm::A,
                             QubitMatrixForm form = QubitMatrixForm::Reciprocal);

// Branch-line coupler S-parameters seen from port 1: reflection, through,
// coupled and isolated amplitudes.
struct BranchLineS {
  Complex s11, s21, s31, s41;
};
BranchLineS branch_line_s(double omega, double center_omega);

// The cascade for one frequency, with the qubit block supplied by the caller.
TransferMatrix4 total_matrix(const CircuitSpec& spec, double omega,
                             const std::optional<QubitRT>& rt);
TransferMatrix4 total_matrix(const CircuitSpec& spec, double omega);

// All S-parameters at one frequency, calibration applied.
SParameters evaluate(const CircuitSpec& spec, double omega);

SpectrumTrace sweep(const CircuitSpec& spec, std::span<const double> freqs_hz,
                    DrivePort drive = DrivePort::Both);

SpectrumTrace synthesize(const CircuitSpec& spec, std::span<const double> freqs_hz,
                         DrivePort drive, double noise_sigma, std::uint64_t seed);

std::vector<double> linspace(double start, double stop, std::size_t n);

}  // namespace mzq
