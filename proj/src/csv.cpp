#include "elp/csv.hpp"

#include <cstdio>
#include <sstream>

#include "elp/common.hpp"

namespace elp::ingest {

namespace {

bool parse_cell(const std::string& tok, double* out) {
  std::size_t pos = 0;
  try {
    *out = std::stod(tok, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == tok.size();
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

EcgRecord parse_csv_record(const std::string& text, double fs,
                           const std::string& record_id) {
  if (fs <= 0.0) throw Error("csv: sampling frequency must be positive");
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  std::vector<double> samples;

  while (std::getline(stream, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;

    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = t.find(',', start);
      cells.push_back(trim(t.substr(
          start, comma == std::string::npos ? std::string::npos
                                            : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() > 2)
      throw ParseError("csv line " + std::to_string(line_no) +
                       ": expected 1 or 2 columns, got " +
                       std::to_string(cells.size()));

    double value = 0.0;
    const std::string& value_cell = cells.back();
    if (!parse_cell(value_cell, &value)) {
      if (header_allowed) {  // one textual header row is tolerated
        header_allowed = false;
        continue;
      }
      throw ParseError("csv line " + std::to_string(line_no) +
                       ": non-numeric value '" + value_cell + "'");
    }
    if (cells.size() == 2) {
      double idx = 0.0;
      if (!parse_cell(cells[0], &idx))
        throw ParseError("csv line " + std::to_string(line_no) +
                         ": non-numeric index '" + cells[0] + "'");
    }
    header_allowed = false;
    samples.push_back(value);
  }

  if (samples.empty()) throw ParseError("csv: no samples");

  EcgRecord record;
  record.record_id = record_id;
  record.fs = fs;
  ChannelInfo info;
  info.name = "csv";
  record.channels.push_back(info);
  record.signal.push_back(std::move(samples));
  record.validate();
  return record;
}

std::string write_csv_record(const EcgRecord& record, std::size_t channel) {
  record.validate();
  if (channel >= record.signal.size())
    throw Error("csv: channel " + std::to_string(channel) + " out of range");
  std::ostringstream out;
  out << "# record " << record.record_id << "\n";
  out << "# fs " << record.fs << "\n";
  out << "# channel " << record.channels[channel].name << "\n";
  const auto& x = record.signal[channel];
  char buf[64];
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, x[i]);
    out << buf;
  }
  return out.str();
}

}  // namespace elp::ingest
