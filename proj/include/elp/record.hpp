#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elp/common.hpp"

namespace elp::ingest {

struct ChannelInfo {
  std::string name;
  double gain_adu_per_mv = 200.0;  // WFDB convention when the header omits it
  int baseline_adu = 0;
  int resolution_bits = 12;
};

struct Annotation {
  std::size_t sample_index = 0;
  char symbol = 'N';
  std::string aux;  // rhythm changes carry "(AFIB" style strings here
};

// A fully decoded recording: per-channel samples in millivolts plus the
// annotation stream. Immutable after construction by convention; parsing
// functions return it by value and nothing in the pipeline mutates it.
struct EcgRecord {
  std::string record_id;
  std::vector<ChannelInfo> channels;
  std::vector<std::vector<double>> signal;  // [channel][sample], mV
  double fs = 0.0;
  std::vector<Annotation> annotations;

  std::size_t n_samples() const {
    return signal.empty() ? 0 : signal[0].size();
  }

  // Checks the structural invariants: equal channel lengths, fs > 0,
  // strictly increasing in-range annotation indices. Throws on violation.
  void validate() const;
};

}  // namespace elp::ingest
