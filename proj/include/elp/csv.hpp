#pragma once

#include <string>

#include "elp/record.hpp"

namespace elp::ingest {

// Parses a single-channel CSV dump: one sample per line, either "value" or
// "index,value". Lines starting with '#' and a single non-numeric header
// line are skipped. Values are millivolts. Bad cells raise ParseError with
// the line number.
EcgRecord parse_csv_record(const std::string& text, double fs,
                           const std::string& record_id);

// Canonical dump of one channel as "index,value" rows preceded by '#'
// metadata lines. parse_csv_record reads it back.
std::string write_csv_record(const EcgRecord& record,
                             std::size_t channel = 0);

}  // namespace elp::ingest
