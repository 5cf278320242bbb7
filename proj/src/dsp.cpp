#include "elp/dsp.hpp"

#include <algorithm>
#include <cmath>

namespace elp::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Butterworth pole quality factors for an even-order cascade.
std::vector<double> butterworth_qs(int order) {
  if (order < 2 || order % 2 != 0)
    throw Error("filter order must be even and >= 2");
  std::vector<double> qs;
  for (int k = 0; k < order / 2; ++k) {
    double theta = kPi * (2.0 * k + 1.0) / (2.0 * order);
    qs.push_back(1.0 / (2.0 * std::sin(theta)));
  }
  return qs;
}

void check_corner(double corner_hz, double fs) {
  if (fs <= 0) throw Error("sampling rate must be positive");
  if (corner_hz <= 0) throw Error("filter corner must be positive");
  if (corner_hz >= fs / 2.0)
    throw Error("filter corner " + std::to_string(corner_hz) +
                " Hz at or above Nyquist (" + std::to_string(fs / 2.0) +
                " Hz)");
}

Biquad lowpass_biquad(double corner_hz, double fs, double q) {
  double w0 = 2.0 * kPi * corner_hz / fs;
  double cw = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  double a0 = 1.0 + alpha;
  Biquad s;
  s.b0 = (1.0 - cw) / 2.0 / a0;
  s.b1 = (1.0 - cw) / a0;
  s.b2 = s.b0;
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

Biquad highpass_biquad(double corner_hz, double fs, double q) {
  double w0 = 2.0 * kPi * corner_hz / fs;
  double cw = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  double a0 = 1.0 + alpha;
  Biquad s;
  s.b0 = (1.0 + cw) / 2.0 / a0;
  s.b1 = -(1.0 + cw) / a0;
  s.b2 = s.b0;
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

}  // namespace

std::complex<double> Biquad::response(double freq_hz, double fs) const {
  double w = 2.0 * kPi * freq_hz / fs;
  std::complex<double> z1 = std::polar(1.0, -w);
  std::complex<double> z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

std::vector<Biquad> design_lowpass(double corner_hz, double fs, int order) {
  check_corner(corner_hz, fs);
  std::vector<Biquad> sos;
  for (double q : butterworth_qs(order))
    sos.push_back(lowpass_biquad(corner_hz, fs, q));
  return sos;
}

std::vector<Biquad> design_highpass(double corner_hz, double fs, int order) {
  check_corner(corner_hz, fs);
  std::vector<Biquad> sos;
  for (double q : butterworth_qs(order))
    sos.push_back(highpass_biquad(corner_hz, fs, q));
  return sos;
}

std::vector<Biquad> design_bandpass(double low_hz, double high_hz, double fs,
                                    int order) {
  if (!(low_hz < high_hz))
    throw Error("bandpass corners must satisfy low < high");
  auto sos = design_highpass(low_hz, fs, order);
  auto lp = design_lowpass(high_hz, fs, order);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

std::vector<Biquad> design(const FilterSpec& spec, double fs) {
  switch (spec.kind) {
    case FilterKind::kLowpass:
      return design_lowpass(spec.high_hz, fs, spec.order);
    case FilterKind::kHighpass:
      return design_highpass(spec.low_hz, fs, spec.order);
    case FilterKind::kBandpass:
      return design_bandpass(spec.low_hz, spec.high_hz, fs, spec.order);
  }
  throw Error("unknown filter kind");
}

std::vector<double> filter_forward(std::span<const double> x,
                                   const std::vector<Biquad>& sos) {
  std::vector<double> y(x.begin(), x.end());
  for (const Biquad& s : sos) {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : y) {
      double in = v;
      double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> filtfilt(std::span<const double> x,
                             const std::vector<Biquad>& sos) {
  std::vector<double> y = filter_forward(x, sos);
  std::reverse(y.begin(), y.end());
  y = filter_forward(y, sos);
  std::reverse(y.begin(), y.end());
  return y;
}

std::vector<double> bandpass(std::span<const double> x, double fs,
                             const FilterSpec& spec) {
  return filtfilt(x, design(spec, fs));
}

double zero_phase_gain(const std::vector<Biquad>& sos, double freq_hz,
                       double fs) {
  double g = 1.0;
  for (const Biquad& s : sos) g *= std::norm(s.response(freq_hz, fs));
  return g;  // |H|^2: one forward plus one backward pass
}

std::vector<double> resample_to_length(std::span<const double> x,
                                       std::size_t n_out) {
  std::vector<double> y(n_out);
  if (n_out == 0) return y;
  if (x.empty()) throw Error("cannot resample an empty signal to a length");
  const std::size_t n = x.size();
  if (n == 1 || n_out == 1) {
    std::fill(y.begin(), y.end(), x[0]);
    if (n_out >= 1) y[n_out - 1] = x[n - 1];
    if (n == 1) std::fill(y.begin(), y.end(), x[0]);
    return y;
  }
  const double scale = static_cast<double>(n - 1) / static_cast<double>(n_out - 1);
  for (std::size_t i = 0; i < n_out; ++i) {
    double pos = static_cast<double>(i) * scale;
    auto j = static_cast<std::size_t>(pos);
    if (j >= n - 1) {
      y[i] = x[n - 1];
      continue;
    }
    double f = pos - static_cast<double>(j);
    // x[j] + f*(x[j+1]-x[j]) keeps constants bit-exact.
    y[i] = x[j] + f * (x[j + 1] - x[j]);
  }
  return y;
}

std::vector<double> resample_linear(std::span<const double> x, double fs_in,
                                    double fs_out) {
  if (fs_in <= 0 || fs_out <= 0)
    throw Error("resample rates must be positive");
  if (x.empty()) return {};
  auto n_out = static_cast<std::size_t>(std::max<long long>(
      0, round_half_even_ll(static_cast<double>(x.size()) * fs_out / fs_in)));
  return resample_to_length(x, n_out);
}

std::vector<double> znorm(std::span<const double> x, double eps) {
  if (eps <= 0) throw Error("znorm eps must be positive");
  std::vector<double> y(x.size(), 0.0);
  double sd = stddev(x);
  if (sd < eps) return y;
  double m = mean(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - m) / sd;
  return y;
}

bool is_flat(std::span<const double> x, double eps) {
  if (eps <= 0) throw Error("is_flat eps must be positive");
  return stddev(x) < eps;
}

}  // namespace elp::dsp
