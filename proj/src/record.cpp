#include "elp/record.hpp"

namespace elp::ingest {

void EcgRecord::validate() const {
  if (fs <= 0) throw Error("record " + record_id + ": fs must be positive");
  if (channels.size() != signal.size())
    throw Error("record " + record_id + ": channel descriptor count " +
                std::to_string(channels.size()) + " != signal channel count " +
                std::to_string(signal.size()));
  for (std::size_t c = 1; c < signal.size(); ++c)
    if (signal[c].size() != signal[0].size())
      throw Error("record " + record_id + ": channel lengths differ");
  std::size_t n = n_samples();
  std::size_t prev = 0;
  bool first = true;
  for (const Annotation& a : annotations) {
    if (a.sample_index >= n)
      throw Error("record " + record_id + ": annotation index " +
                  std::to_string(a.sample_index) + " out of range");
    if (!first && a.sample_index <= prev)
      throw Error("record " + record_id +
                  ": annotation indices not strictly increasing at " +
                  std::to_string(a.sample_index));
    prev = a.sample_index;
    first = false;
  }
}

}  // namespace elp::ingest
