#include "mzq/components.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mzq/error.hpp"
#include "mzq/kernels.hpp"

namespace mzq {

namespace {

using C2 = std::array<Complex, 4>;  // row-major 2x2

C2 mul(const C2& a, const C2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

C2 sub(const C2& a, const C2& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }

C2 inv(const C2& a) {
  const Complex det = a[0] * a[3] - a[1] * a[2];
  return {a[3] / det, -a[1] / det, -a[2] / det, a[0] / det};
}

// Reflection and transmission of a symmetric half-circuit given its
// normalized ABCD matrix.
struct HalfResponse {
  Complex gamma, trans;
};

HalfResponse half_circuit(Complex stub_admittance, double theta) {
  constexpr double z = std::numbers::sqrt2 / 2.0;  // Z0/sqrt(2) series arms
  const Complex j(0.0, 1.0);
  const C2 shunt{1.0, 0.0, stub_admittance, 1.0};
  const C2 line{std::cos(theta), j * z * std::sin(theta), j * std::sin(theta) / z,
                std::cos(theta)};
  const C2 abcd = mul(mul(shunt, line), shunt);
  const Complex sum = abcd[0] + abcd[1] + abcd[2] + abcd[3];
  return {(abcd[0] + abcd[1] - abcd[2] - abcd[3]) / sum, 2.0 / sum};
}

// Four-port S-matrix split into left ports (L1, L2) and right ports (R1, R2)
// converted to the (out, in) / (in, out) transfer-matrix layout.
TransferMatrix4 transfer_from_blocks(const C2& s_ll, const C2& s_lr, const C2& s_rl,
                                     const C2& s_rr) {
  const C2 s_rl_inv = inv(s_rl);
  const C2 out_from_in = sub(s_lr, mul(mul(s_ll, s_rl_inv), s_rr));
  const C2 out_from_out = mul(s_ll, s_rl_inv);
  const C2 in_from_in = mul(s_rl_inv, s_rr);
  TransferMatrix4 t;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t m = 0; m < 2; ++m) {
      t(2 * k, 2 * m) = out_from_in[2 * k + m];
      t(2 * k, 2 * m + 1) = out_from_out[2 * k + m];
      t(2 * k + 1, 2 * m) = -in_from_in[2 * k + m];
      t(2 * k + 1, 2 * m + 1) = s_rl_inv[2 * k + m];
    }
  }
  return t;
}

void check_omega(double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    fail(ErrorCode::InvalidArgument, "angular frequency must be positive and finite");
  }
}

void check_grid(std::span<const double> freqs) {
  if (freqs.empty()) fail(ErrorCode::InvalidArgument, "frequency grid is empty");
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (!(freqs[i] > 0.0) || !std::isfinite(freqs[i])) {
      fail(ErrorCode::InvalidArgument, "frequency grid must be positive and finite");
    }
    if (i > 0 && !(freqs[i] > freqs[i - 1])) {
      fail(ErrorCode::InvalidArgument, "frequency grid must be strictly increasing");
    }
  }
}

std::vector<Path> paths_for(DrivePort drive) {
  switch (drive) {
    case DrivePort::Port2: return {Path::S12, Path::S32};
    case DrivePort::Port4: return {Path::S34, Path::S14};
    case DrivePort::Both: break;
  }
  return {kAllPaths.begin(), kAllPaths.end()};
}

Complex pick(const SParameters& s, Path p) {
  switch (p) {
    case Path::S12: return s.s12;
    case Path::S32: return s.s32;
    case Path::S34: return s.s34;
    case Path::S14: return s.s14;
  }
  return {};
}

kernels::LineshapeParams lineshape(const QubitScatterer& q) {
  const double g2 = q.gamma2();
  const double sat = q.rabi == 0.0 ? 0.0 : (q.rabi * q.rabi) / (q.gamma1 * g2);
  return {q.omega01, g2, q.r0, sat};
}

}  // namespace

LineParams LineParams::imbalanced_arms(double center_omega, int order, double base_delay) {
  if (!(center_omega > 0.0)) fail(ErrorCode::InvalidArgument, "center frequency must be positive");
  // Two segments per arm, so the round-trip phase difference per arm is
  // 2 * (delay_b - delay_a) * omega.
  const double extra = std::numbers::pi * order / center_omega;
  LineParams p;
  p.phase_rate = {base_delay, base_delay, base_delay + extra, base_delay + extra};
  return p;
}

void LineParams::validate() const {
  for (std::size_t k = 0; k < 4; ++k) {
    if (!(attenuation[k] >= 0.0) || !std::isfinite(attenuation[k])) {
      fail(ErrorCode::InvalidArgument, "line attenuation must be finite and >= 0");
    }
    if (!std::isfinite(phase_rate[k])) fail(ErrorCode::InvalidArgument, "line phase rate must be finite");
  }
}

void QubitScatterer::validate() const {
  if (!std::isfinite(omega01) || !std::isfinite(gamma1) || !std::isfinite(gamma_phi) ||
      !std::isfinite(r0) || !std::isfinite(rabi)) {
    fail(ErrorCode::InvalidArgument, "qubit parameters must be finite");
  }
  if (!(gamma2() > 0.0)) fail(ErrorCode::InvalidArgument, "qubit gamma2 = gamma1/2 + gamma_phi must be > 0");
  if (!(r0 > 0.0 && r0 <= 1.0)) fail(ErrorCode::InvalidArgument, "qubit r0 must lie in (0, 1]");
  if (rabi != 0.0 && !(gamma1 > 0.0)) {
    fail(ErrorCode::InvalidArgument, "a nonzero Rabi frequency needs gamma1 > 0");
  }
}

Complex Calibration::factor(double omega) const {
  return scale * std::polar(1.0, -delay * (omega - reference_omega));
}

void CircuitSpec::validate() const {
  lines.validate();
  if (splitter.kind == BeamSplitterModel::Kind::BranchLine && !(splitter.center_omega > 0.0)) {
    fail(ErrorCode::InvalidArgument, "branch-line splitter needs a positive center frequency");
  }
  if (qubit) qubit->validate();
}

std::string_view to_string(Path p) noexcept {
  switch (p) {
    case Path::S12: return "s12";
    case Path::S32: return "s32";
    case Path::S34: return "s34";
    case Path::S14: return "s14";
  }
  return "?";
}

std::optional<Path> parse_path(std::string_view name) noexcept {
  for (Path p : kAllPaths) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

bool is_cross(Path p) noexcept { return p == Path::S12 || p == Path::S34; }

const std::vector<Complex>& SpectrumTrace::at(Path p) const {
  const auto it = values.find(p);
  if (it == values.end()) {
    fail(ErrorCode::InvalidArgument, "trace has no path " + std::string(to_string(p)));
  }
  return it->second;
}

void SpectrumTrace::validate() const {
  check_grid(freqs);
  if (values.empty()) fail(ErrorCode::InvalidArgument, "trace has no paths");
  for (const auto& [path, v] : values) {
    if (v.size() != freqs.size()) {
      fail(ErrorCode::InvalidArgument,
           "path " + std::string(to_string(path)) + " is not length-matched to the grid");
    }
  }
}

TransferMatrix4 tl_matrix(const LineParams& p, double omega) {
  check_omega(omega);
  std::array<Complex, 4> d;
  for (std::size_t k = 0; k < 4; ++k) {
    // exp(i (i r + phi)) = exp(-r) exp(i phi)
    d[k] = std::polar(std::exp(-p.attenuation[k]), p.phase_rate[k] * omega);
  }
  return TransferMatrix4::diagonal(d);
}

BranchLineS branch_line_s(double omega, double center_omega) {
  const double theta = 0.5 * std::numbers::pi * omega / center_omega;
  const double stub = 0.5 * theta;
  const Complex j(0.0, 1.0);
  const HalfResponse even = half_circuit(j * std::tan(stub), theta);
  const HalfResponse odd = half_circuit(-j / std::tan(stub), theta);
  return {0.5 * (even.gamma + odd.gamma), 0.5 * (even.trans + odd.trans),
          0.5 * (even.trans - odd.trans), 0.5 * (even.gamma - odd.gamma)};
}

TransferMatrix4 bs_matrix(const BeamSplitterModel& b, double omega) {
  check_omega(omega);
  if (b.kind == BeamSplitterModel::Kind::Ideal) {
    const double h = std::numbers::sqrt2 / 2.0;
    const Complex j(0.0, h);
    return TransferMatrix4({-j, 0.0, -h, 0.0,  //
                            0.0, j, 0.0, -h,   //
                            -h, 0.0, -j, 0.0,  //
                            0.0, -h, 0.0, j});
  }
  // Left ports {1, 4}, right ports {2, 3} of the coupler.
  const BranchLineS s = branch_line_s(omega, b.center_omega);
  const C2 s_ll{s.s11, s.s41, s.s41, s.s11};
  const C2 s_lr{s.s21, s.s31, s.s31, s.s21};
  return transfer_from_blocks(s_ll, s_lr, s_lr, s_ll);
}

QubitRT qubit_rt(const QubitScatterer& q, double omega) {
  q.validate();
  const auto p = lineshape(q);
  double re = 0.0, im = 0.0;
  kernels::detail::qubit_reflection_scalar(&omega, 1, p, &re, &im);
  const Complex r(re, im);
  return {r, 1.0 - r};
}

TransferMatrix4 qubit_matrix(const QubitRT& rt, QubitArm arm, QubitMatrixForm form) {
  const Complex r = rt.r, t = rt.t;
  if (!(std::abs(t) >= kDegenerateTransmission)) {
    std::ostringstream msg;
    msg << "qubit transmission |t| = " << std::abs(t) << " is below " << kDegenerateTransmission;
    fail(ErrorCode::DegenerateScatterer, msg.str());
  }
  const Complex corner = form == QubitMatrixForm::Reciprocal ? (t * t - r * r) / t : -(r * r) / t;
  TransferMatrix4 m = TransferMatrix4::identity();
  const std::size_t o = arm == QubitArm::A ? 0 : 2;
  m(o, o) = corner;
  m(o, o + 1) = r / t;
  m(o + 1, o) = -r / t;
  m(o + 1, o + 1) = 1.0 / t;
  return m;
}

TransferMatrix4 qubit_matrix(const QubitScatterer& q, double omega, QubitArm arm,
                             QubitMatrixForm form) {
  return qubit_matrix(qubit_rt(q, omega), arm, form);
}

TransferMatrix4 total_matrix(const CircuitSpec& spec, double omega,
                             const std::optional<QubitRT>& rt) {
  const TransferMatrix4 bs = bs_matrix(spec.splitter, omega);
  const TransferMatrix4 tl = tl_matrix(spec.lines, omega);
  const TransferMatrix4 q =
      rt ? qubit_matrix(*rt, spec.qubit_arm, spec.qubit_form) : TransferMatrix4::identity();
  const std::array<TransferMatrix4, 5> chain{bs, tl, q, tl, bs};
  return cascade(chain);
}

TransferMatrix4 total_matrix(const CircuitSpec& spec, double omega) {
  std::optional<QubitRT> rt;
  if (spec.qubit) rt = qubit_rt(*spec.qubit, omega);
  return total_matrix(spec, omega, rt);
}

SParameters evaluate(const CircuitSpec& spec, double omega) {
  SParameters s = s_parameters(total_matrix(spec, omega));
  if (spec.calibration) {
    const Complex f = spec.calibration->factor(omega);
    for (Complex* v : {&s.s12, &s.s32, &s.s22, &s.s42, &s.s34, &s.s14, &s.s44, &s.s24}) *v *= f;
  }
  return s;
}

SpectrumTrace sweep(const CircuitSpec& spec, std::span<const double> freqs_hz, DrivePort drive) {
  spec.validate();
  check_grid(freqs_hz);
  const std::size_t n = freqs_hz.size();

  std::vector<double> omega(n);
  std::transform(freqs_hz.begin(), freqs_hz.end(), omega.begin(),
                 [](double f) { return 2.0 * std::numbers::pi * f; });

  std::vector<double> r_re, r_im;
  if (spec.qubit) {
    r_re.resize(n);
    r_im.resize(n);
    kernels::qubit_reflection(omega, lineshape(*spec.qubit), r_re, r_im);
  }

  SpectrumTrace trace;
  trace.freqs.assign(freqs_hz.begin(), freqs_hz.end());
  const std::vector<Path> paths = paths_for(drive);
  for (Path p : paths) trace.values[p].resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::optional<QubitRT> rt;
    if (spec.qubit) {
      const Complex r(r_re[i], r_im[i]);
      rt = QubitRT{r, 1.0 - r};
    }
    SParameters s;
    try {
      s = s_parameters(total_matrix(spec, omega[i], rt));
    } catch (const Error& e) {
      std::ostringstream msg;
      msg.precision(12);
      msg << e.what() << " at f = " << freqs_hz[i] << " Hz";
      throw Error(e.code(), msg.str());
    }
    const Complex f = spec.calibration ? spec.calibration->factor(omega[i]) : Complex(1.0);
    for (Path p : paths) trace.values[p][i] = f * pick(s, p);
  }
  return trace;
}

SpectrumTrace synthesize(const CircuitSpec& spec, std::span<const double> freqs_hz,
                         DrivePort drive, double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    fail(ErrorCode::InvalidArgument, "noise_sigma must be finite and >= 0");
  }
  SpectrumTrace trace = sweep(spec, freqs_hz, drive);
  trace.noise_sigma = noise_sigma;
  if (noise_sigma == 0.0) return trace;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (auto& [path, v] : trace.values) {
    for (Complex& z : v) {
      const double re = noise(gen);
      const double im = noise(gen);
      z += Complex(re, im);
    }
  }
  return trace;
}

std::vector<double> linspace(double start, double stop, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = start;
    return out;
  }
  const double step = (stop - start) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = start + step * static_cast<double>(i);
  out[n - 1] = stop;
  return out;
}

}  // namespace mzq
