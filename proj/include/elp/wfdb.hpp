#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elp/record.hpp"

namespace elp::ingest {

// One line of the .hea signal section.
struct WfdbSignalSpec {
  std::string file_name;
  int format = 212;
  double gain = 200.0;  // adu per mV
  int baseline = 0;     // adu at 0 mV
  int adc_resolution = 12;
  int adc_zero = 0;
  std::string description;
};

struct WfdbHeader {
  std::string record_name;
  std::size_t n_channels = 0;
  double fs = 250.0;
  std::size_t n_samples = 0;
  std::vector<WfdbSignalSpec> signals;
  std::vector<std::string> warnings;  // defaulted gains and the like
};

// Parses the textual .hea format. Only storage formats 212 and 16 are
// accepted; anything else raises an "unsupported format" error naming the
// code. Malformed lines raise ParseError with the line number.
WfdbHeader parse_wfdb_header(const std::string& text);

std::string write_wfdb_header(const WfdbHeader& header);

// ---- signal payloads ----------------------------------------------------
//
// Format 212 packs two 12-bit two's-complement samples into 3 bytes:
// byte0 = low 8 bits of s0, low nibble of byte1 = high 4 bits of s0,
// high nibble of byte1 = high 4 bits of s1, byte2 = low 8 bits of s1.
// Multi-channel signals interleave one sample per channel per frame.

struct Format212Encoded {
  std::vector<std::uint8_t> bytes;
  bool padded = false;  // odd sample count: final half-pair zero-filled
};

// Decodes `n_values` samples from the flat interleaved stream.
std::vector<int> decode_format212(std::span<const std::uint8_t> bytes,
                                  std::size_t n_values);
// Values must lie in [-2048, 2047].
Format212Encoded encode_format212(std::span<const int> values);

// Format 16: little-endian int16, interleaved.
std::vector<int> decode_format16(std::span<const std::uint8_t> bytes,
                                 std::size_t n_values);
std::vector<std::uint8_t> encode_format16(std::span<const int> values);

// Splits a flat interleaved stream into per-channel vectors.
std::vector<std::vector<int>> deinterleave(std::span<const int> values,
                                           std::size_t n_channels);
std::vector<int> interleave(const std::vector<std::vector<int>>& channels);

// mV = (adu - baseline) / gain.
std::vector<double> adu_to_mv(std::span<const int> adu, double gain,
                              int baseline);
std::vector<int> mv_to_adu(std::span<const double> mv, double gain,
                           int baseline, int resolution_bits);

// ---- annotations ----------------------------------------------------------
//
// MIT annotation format: 16-bit little-endian words, top 6 bits the code,
// low 10 bits the sample interval from the previous annotation. SKIP extends
// the interval to 32 bits (high word first), AUX attaches a string to the
// preceding annotation, NUM/SUB modifiers are skipped. Stream ends at 0x0000.

std::vector<Annotation> parse_wfdb_annotations(
    std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wfdb_annotations(
    std::span<const Annotation> annotations);

char annotation_code_to_symbol(int code);  // '?' for codes without mnemonic
int annotation_symbol_to_code(char symbol);

// ---- whole records ---------------------------------------------------------

// Reads <base>.hea and its .dat payload; attaches <base>.<ann_ext>
// annotations when that file exists. `base` is the path without extension.
EcgRecord read_wfdb_record(const std::string& base,
                           const std::string& ann_ext = "atr");

// Writes <dir>/<record_id>.hea/.dat (+ .atr when annotations are present).
// Samples are quantized through each channel's gain/baseline.
void write_wfdb_record(const EcgRecord& record, const std::string& dir,
                       int format = 212);

}  // namespace elp::ingest
