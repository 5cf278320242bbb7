#pragma once

#include <complex>
#include <span>
#include <vector>

#include "elp/common.hpp"

namespace elp::dsp {

enum class FilterKind { kLowpass, kHighpass, kBandpass };

struct FilterSpec {
  FilterKind kind = FilterKind::kBandpass;
  double low_hz = 5.0;   // lower corner (bandpass/highpass)
  double high_hz = 15.0; // upper corner (bandpass/lowpass)
  int order = 2;         // per corner; even, each pair of poles is one biquad
};

// One second-order section, direct form II transposed.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;  // a0 normalized to 1

  std::complex<double> response(double freq_hz, double fs) const;
};

// Butterworth designs as biquad cascades. `order` must be even and >= 2.
std::vector<Biquad> design_lowpass(double corner_hz, double fs, int order);
std::vector<Biquad> design_highpass(double corner_hz, double fs, int order);
// Bandpass = highpass(low) cascaded with lowpass(high).
std::vector<Biquad> design_bandpass(double low_hz, double high_hz, double fs,
                                    int order);

std::vector<Biquad> design(const FilterSpec& spec, double fs);

// Single causal pass, zero initial state.
std::vector<double> filter_forward(std::span<const double> x,
                                   const std::vector<Biquad>& sos);

// Forward-backward application: zero phase, squared magnitude response,
// output length equals input length.
std::vector<double> filtfilt(std::span<const double> x,
                             const std::vector<Biquad>& sos);

// Zero-phase bandpass per `spec`. Throws if a corner reaches Nyquist.
std::vector<double> bandpass(std::span<const double> x, double fs,
                             const FilterSpec& spec);

// Magnitude of the combined forward-backward response at `freq_hz`.
double zero_phase_gain(const std::vector<Biquad>& sos, double freq_hz,
                       double fs);

// Linear resampling. Output length = round(n * fs_out / fs_in); sample i maps
// to input position i*(n-1)/(n_out-1), so both endpoints are preserved
// exactly and constants pass through unchanged.
std::vector<double> resample_linear(std::span<const double> x, double fs_in,
                                    double fs_out);

// Same interpolation onto exactly `n_out` points.
std::vector<double> resample_to_length(std::span<const double> x,
                                       std::size_t n_out);

// Zero mean, unit population std. Inputs with std < eps come back all zero.
std::vector<double> znorm(std::span<const double> x, double eps = 1e-8);

// True when znorm would zero the input (population std < eps).
bool is_flat(std::span<const double> x, double eps = 1e-8);

}  // namespace elp::dsp
