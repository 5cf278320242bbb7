#include "elp/wfdb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "elp/common.hpp"

namespace elp::ingest {

namespace {

// Annotation codes 1..41 and their mnemonics. Gaps hold 0.
constexpr char kAnnotationSymbols[42] = {
    0,   'N', 'L', 'R', 'a', 'V', 'F', 'J', 'A', 'S', 'E',
    'j', '/', 'Q', '~', 0,   '|', 0,   's', 'T', '*', 'D',
    '"', '=', 'p', 'B', '^', 't', '+', 'u', '?', '!', '[',
    ']', 'e', 'n', '@', 'x', 'f', '(', ')', 'r'};

constexpr int kCodeSkip = 59;
constexpr int kCodeNum = 60;
constexpr int kCodeSub = 61;
constexpr int kCodeAux = 62;

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void header_error(std::size_t line_no, const std::string& what) {
  throw ParseError("wfdb header line " + std::to_string(line_no) + ": " + what);
}

long parse_long(const std::string& tok, std::size_t line_no,
                const std::string& what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    header_error(line_no, "expected integer for " + what + ", got '" + tok +
                              "'");
  }
  if (pos != tok.size())
    header_error(line_no, "trailing characters in " + what + " '" + tok + "'");
  return v;
}

double parse_double(const std::string& tok, std::size_t line_no,
                    const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    header_error(line_no, "expected number for " + what + ", got '" + tok +
                              "'");
  }
  if (pos != tok.size())
    header_error(line_no, "trailing characters in " + what + " '" + tok + "'");
  return v;
}

// Strips an optional "/..." suffix (segment counts, counter frequencies).
std::string before_slash(const std::string& tok) {
  auto slash = tok.find('/');
  return slash == std::string::npos ? tok : tok.substr(0, slash);
}

}  // namespace

WfdbHeader parse_wfdb_header(const std::string& text) {
  WfdbHeader header;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  bool record_line_seen = false;
  std::size_t signals_needed = 0;

  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;

    if (!record_line_seen) {
      record_line_seen = true;
      if (tokens.size() < 2)
        header_error(line_no, "record line needs name and signal count");
      header.record_name = before_slash(tokens[0]);
      if (header.record_name.empty())
        header_error(line_no, "empty record name");
      long nsig = parse_long(tokens[1], line_no, "signal count");
      if (nsig <= 0) header_error(line_no, "signal count must be positive");
      header.n_channels = static_cast<std::size_t>(nsig);
      signals_needed = header.n_channels;
      if (tokens.size() >= 3) {
        double fs = parse_double(before_slash(tokens[2]), line_no,
                                 "sampling frequency");
        if (fs <= 0.0)
          header_error(line_no, "sampling frequency must be positive");
        header.fs = fs;
      } else {
        header.warnings.push_back("no sampling frequency, defaulting to 250");
      }
      if (tokens.size() >= 4) {
        long n = parse_long(tokens[3], line_no, "sample count");
        if (n < 0) header_error(line_no, "negative sample count");
        header.n_samples = static_cast<std::size_t>(n);
      }
      continue;
    }

    if (signals_needed == 0) continue;  // trailing info lines
    --signals_needed;

    if (tokens.size() < 2)
      header_error(line_no, "signal line needs file name and format");
    WfdbSignalSpec spec;
    spec.file_name = tokens[0];

    const std::string& fmt_tok = tokens[1];
    std::size_t fmt_end = 0;
    while (fmt_end < fmt_tok.size() &&
           (std::isdigit(static_cast<unsigned char>(fmt_tok[fmt_end])) ||
            (fmt_end == 0 && fmt_tok[fmt_end] == '-')))
      ++fmt_end;
    if (fmt_end == 0)
      header_error(line_no, "malformed format '" + fmt_tok + "'");
    if (fmt_end != fmt_tok.size())
      header_error(line_no, "unsupported format modifier in '" + fmt_tok +
                                "' (samples per frame must be 1)");
    spec.format = static_cast<int>(
        parse_long(fmt_tok.substr(0, fmt_end), line_no, "format"));
    if (spec.format != 212 && spec.format != 16)
      header_error(line_no, "unsupported storage format " +
                                std::to_string(spec.format) +
                                " (supported: 212, 16)");
    spec.adc_resolution = spec.format == 212 ? 12 : 16;

    bool baseline_given = false;
    if (tokens.size() >= 3) {
      // gain token: G, G(B), G/units, G(B)/units
      std::string g = before_slash(tokens[2]);
      auto open = g.find('(');
      if (open != std::string::npos) {
        auto close = g.find(')', open);
        if (close == std::string::npos)
          header_error(line_no, "unterminated baseline in '" + tokens[2] + "'");
        spec.baseline = static_cast<int>(parse_long(
            g.substr(open + 1, close - open - 1), line_no, "baseline"));
        baseline_given = true;
        g = g.substr(0, open);
      }
      double gain = parse_double(g, line_no, "gain");
      if (gain < 0.0) header_error(line_no, "negative gain");
      if (gain == 0.0) {
        spec.gain = 200.0;
        header.warnings.push_back("channel " +
                                  std::to_string(header.signals.size()) +
                                  ": zero gain, defaulting to 200 adu/mV");
      } else {
        spec.gain = gain;
      }
    } else {
      header.warnings.push_back("channel " +
                                std::to_string(header.signals.size()) +
                                ": no gain, defaulting to 200 adu/mV");
    }
    if (tokens.size() >= 4) {
      long bits = parse_long(tokens[3], line_no, "adc resolution");
      if (bits <= 0 || bits > 32)
        header_error(line_no, "adc resolution out of range");
      spec.adc_resolution = static_cast<int>(bits);
    }
    if (tokens.size() >= 5) {
      spec.adc_zero =
          static_cast<int>(parse_long(tokens[4], line_no, "adc zero"));
      if (!baseline_given) spec.baseline = spec.adc_zero;
    }
    // tokens 5..7 are init value / checksum / block size; the rest is the
    // description.
    if (tokens.size() >= 9) {
      std::string desc = tokens[8];
      for (std::size_t i = 9; i < tokens.size(); ++i) desc += " " + tokens[i];
      spec.description = desc;
    }
    header.signals.push_back(std::move(spec));
  }

  if (!record_line_seen) throw ParseError("wfdb header: no record line");
  if (signals_needed != 0)
    throw ParseError("wfdb header: expected " +
                     std::to_string(header.n_channels) +
                     " signal lines, found " +
                     std::to_string(header.signals.size()));
  return header;
}

std::string write_wfdb_header(const WfdbHeader& header) {
  if (header.signals.size() != header.n_channels)
    throw Error("wfdb header: signal spec count mismatch");
  std::ostringstream out;
  out << header.record_name << ' ' << header.n_channels << ' ';
  char fs_buf[32];
  std::snprintf(fs_buf, sizeof(fs_buf), "%g", header.fs);
  out << fs_buf << ' ' << header.n_samples << '\n';
  for (const auto& s : header.signals) {
    std::snprintf(fs_buf, sizeof(fs_buf), "%g", s.gain);
    out << s.file_name << ' ' << s.format << ' ' << fs_buf << '('
        << s.baseline << ")/mV " << s.adc_resolution << ' ' << s.adc_zero
        << " 0 0 0 " << (s.description.empty() ? "ECG" : s.description)
        << '\n';
  }
  return out.str();
}

std::vector<int> decode_format212(std::span<const std::uint8_t> bytes,
                                  std::size_t n_values) {
  // Each pair of samples occupies 3 bytes; a trailing lone sample needs only
  // the first 2 bytes of its group.
  const std::size_t needed =
      (n_values / 2) * 3 + (n_values % 2 != 0 ? 2 : 0);
  if (bytes.size() < needed)
    throw ParseError("format 212 payload truncated: need " +
                     std::to_string(needed) + " bytes, have " +
                     std::to_string(bytes.size()));
  std::vector<int> out(n_values);
  for (std::size_t i = 0; i < n_values; i += 2) {
    const std::size_t base = (i / 2) * 3;
    int s0 = bytes[base] | ((bytes[base + 1] & 0x0F) << 8);
    if (s0 >= 2048) s0 -= 4096;
    out[i] = s0;
    if (i + 1 < n_values) {
      int s1 = bytes[base + 2] | ((bytes[base + 1] & 0xF0) << 4);
      if (s1 >= 2048) s1 -= 4096;
      out[i + 1] = s1;
    }
  }
  return out;
}

Format212Encoded encode_format212(std::span<const int> values) {
  Format212Encoded enc;
  enc.padded = values.size() % 2 != 0;
  const std::size_t n_pairs = (values.size() + 1) / 2;
  enc.bytes.resize(n_pairs * 3);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    auto fetch = [&](std::size_t i) -> int {
      if (i >= values.size()) return 0;
      int v = values[i];
      if (v < -2048 || v > 2047)
        throw Error("format 212 sample " + std::to_string(i) +
                    " out of 12-bit range: " + std::to_string(v));
      return v & 0xFFF;
    };
    int s0 = fetch(2 * p);
    int s1 = fetch(2 * p + 1);
    enc.bytes[3 * p] = static_cast<std::uint8_t>(s0 & 0xFF);
    enc.bytes[3 * p + 1] =
        static_cast<std::uint8_t>(((s0 >> 8) & 0x0F) | (((s1 >> 8) & 0x0F) << 4));
    enc.bytes[3 * p + 2] = static_cast<std::uint8_t>(s1 & 0xFF);
  }
  return enc;
}

std::vector<int> decode_format16(std::span<const std::uint8_t> bytes,
                                 std::size_t n_values) {
  if (bytes.size() < n_values * 2)
    throw ParseError("format 16 payload truncated: need " +
                     std::to_string(n_values * 2) + " bytes, have " +
                     std::to_string(bytes.size()));
  std::vector<int> out(n_values);
  for (std::size_t i = 0; i < n_values; ++i) {
    int v = bytes[2 * i] | (bytes[2 * i + 1] << 8);
    if (v >= 32768) v -= 65536;
    out[i] = v;
  }
  return out;
}

std::vector<std::uint8_t> encode_format16(std::span<const int> values) {
  std::vector<std::uint8_t> out(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    int v = values[i];
    if (v < -32768 || v > 32767)
      throw Error("format 16 sample " + std::to_string(i) +
                  " out of 16-bit range: " + std::to_string(v));
    out[2 * i] = static_cast<std::uint8_t>(v & 0xFF);
    out[2 * i + 1] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
  }
  return out;
}

std::vector<std::vector<int>> deinterleave(std::span<const int> values,
                                           std::size_t n_channels) {
  if (n_channels == 0) throw Error("deinterleave: zero channels");
  if (values.size() % n_channels != 0)
    throw Error("deinterleave: " + std::to_string(values.size()) +
                " values not divisible by " + std::to_string(n_channels) +
                " channels");
  const std::size_t n = values.size() / n_channels;
  std::vector<std::vector<int>> out(n_channels, std::vector<int>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < n_channels; ++c)
      out[c][i] = values[i * n_channels + c];
  return out;
}

std::vector<int> interleave(const std::vector<std::vector<int>>& channels) {
  if (channels.empty()) throw Error("interleave: zero channels");
  const std::size_t n = channels[0].size();
  for (const auto& ch : channels)
    if (ch.size() != n) throw Error("interleave: unequal channel lengths");
  std::vector<int> out(n * channels.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels.size(); ++c)
      out[i * channels.size() + c] = channels[c][i];
  return out;
}

std::vector<double> adu_to_mv(std::span<const int> adu, double gain,
                              int baseline) {
  if (gain <= 0.0) throw Error("adu_to_mv: gain must be positive");
  std::vector<double> out(adu.size());
  for (std::size_t i = 0; i < adu.size(); ++i)
    out[i] = (adu[i] - baseline) / gain;
  return out;
}

std::vector<int> mv_to_adu(std::span<const double> mv, double gain,
                           int baseline, int resolution_bits) {
  if (gain <= 0.0) throw Error("mv_to_adu: gain must be positive");
  const long long lo = -(1ll << (resolution_bits - 1));
  const long long hi = (1ll << (resolution_bits - 1)) - 1;
  std::vector<int> out(mv.size());
  for (std::size_t i = 0; i < mv.size(); ++i) {
    long long v = round_half_even_ll(mv[i] * gain) + baseline;
    out[i] = static_cast<int>(std::clamp(v, lo, hi));
  }
  return out;
}

char annotation_code_to_symbol(int code) {
  if (code > 0 && code < 42 && kAnnotationSymbols[code] != 0)
    return kAnnotationSymbols[code];
  return '?';
}

int annotation_symbol_to_code(char symbol) {
  for (int c = 1; c < 42; ++c)
    if (kAnnotationSymbols[c] == symbol) return c;
  throw Error(std::string("no annotation code for symbol '") + symbol + "'");
}

std::vector<Annotation> parse_wfdb_annotations(
    std::span<const std::uint8_t> bytes) {
  std::vector<Annotation> out;
  std::size_t pos = 0;
  long long time = 0;
  auto read_word = [&]() -> unsigned {
    if (pos + 2 > bytes.size())
      throw ParseError("annotation stream truncated at byte " +
                       std::to_string(pos));
    unsigned w = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2;
    return w;
  };

  while (true) {
    if (pos >= bytes.size()) break;  // missing terminator: accept at EOF
    const std::size_t word_at = pos;
    unsigned w = read_word();
    int code = static_cast<int>(w >> 10);
    int data = static_cast<int>(w & 0x3FF);
    if (w == 0) break;

    if (code == kCodeSkip) {
      // 32-bit interval follows, high word first.
      unsigned hi = read_word();
      unsigned lo = read_word();
      time += static_cast<std::int32_t>((hi << 16) | lo);
      continue;
    }
    if (code == kCodeNum || code == kCodeSub) continue;
    if (code == kCodeAux) {
      if (out.empty())
        throw ParseError("annotation aux data at byte " +
                         std::to_string(word_at) + " with no annotation");
      std::size_t len = static_cast<std::size_t>(data);
      std::size_t take = len + (len % 2);  // odd lengths are padded
      if (pos + take > bytes.size())
        throw ParseError("annotation aux data truncated at byte " +
                         std::to_string(pos) + ": need " +
                         std::to_string(take) + " bytes");
      std::string aux(reinterpret_cast<const char*>(bytes.data() + pos), len);
      while (!aux.empty() && aux.back() == '\0') aux.pop_back();
      out.back().aux = aux;
      pos += take;
      continue;
    }
    if (code >= 50)
      throw ParseError("annotation code " + std::to_string(code) +
                       " at byte " + std::to_string(word_at) +
                       " is not defined");
    time += data;
    if (time < 0)
      throw ParseError("annotation time went negative at byte " +
                       std::to_string(word_at));
    Annotation a;
    a.sample_index = static_cast<std::size_t>(time);
    a.symbol = annotation_code_to_symbol(code);
    out.push_back(a);
  }
  return out;
}

std::vector<std::uint8_t> encode_wfdb_annotations(
    std::span<const Annotation> annotations) {
  std::vector<std::uint8_t> out;
  auto put_word = [&](unsigned w) {
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xFF));
  };

  long long prev = 0;
  for (const auto& a : annotations) {
    long long t = static_cast<long long>(a.sample_index);
    if (t < prev)
      throw Error("annotations out of order at sample " + std::to_string(t));
    long long delta = t - prev;
    prev = t;
    int code = annotation_symbol_to_code(a.symbol);
    if (delta > 1023) {
      put_word(static_cast<unsigned>(kCodeSkip) << 10);
      put_word(static_cast<unsigned>((delta >> 16) & 0xFFFF));
      put_word(static_cast<unsigned>(delta & 0xFFFF));
      delta = 0;
    }
    put_word((static_cast<unsigned>(code) << 10) |
             static_cast<unsigned>(delta & 0x3FF));
    if (!a.aux.empty()) {
      if (a.aux.size() > 0x3FF)
        throw Error("annotation aux string too long at sample " +
                    std::to_string(t));
      put_word((static_cast<unsigned>(kCodeAux) << 10) |
               static_cast<unsigned>(a.aux.size()));
      for (char c : a.aux) out.push_back(static_cast<std::uint8_t>(c));
      if (a.aux.size() % 2 != 0) out.push_back(0);
    }
  }
  put_word(0);
  return out;
}

EcgRecord read_wfdb_record(const std::string& base,
                           const std::string& ann_ext) {
  namespace fs = std::filesystem;
  const std::string hea_path = base + ".hea";
  WfdbHeader header = parse_wfdb_header(read_file_text(hea_path));

  for (std::size_t c = 1; c < header.signals.size(); ++c) {
    if (header.signals[c].file_name != header.signals[0].file_name)
      throw Error("record " + header.record_name +
                  ": multi-file signals are not supported");
    if (header.signals[c].format != header.signals[0].format)
      throw Error("record " + header.record_name +
                  ": mixed storage formats are not supported");
  }

  const std::string dat_path =
      (fs::path(hea_path).parent_path() / header.signals[0].file_name)
          .string();
  auto payload = read_file_bytes(dat_path);

  std::size_t n_samples = header.n_samples;
  const int format = header.signals[0].format;
  if (n_samples == 0) {
    // Header did not state a length; infer from the payload size.
    std::size_t per_frame = header.n_channels;
    std::size_t total = format == 212 ? (payload.size() / 3) * 2
                                      : payload.size() / 2;
    n_samples = total / per_frame;
  }

  const std::size_t n_values = n_samples * header.n_channels;
  std::vector<int> flat = format == 212 ? decode_format212(payload, n_values)
                                        : decode_format16(payload, n_values);
  auto per_channel = deinterleave(flat, header.n_channels);

  EcgRecord record;
  record.record_id = header.record_name;
  record.fs = header.fs;
  for (std::size_t c = 0; c < header.n_channels; ++c) {
    const auto& s = header.signals[c];
    ChannelInfo info;
    info.name = s.description.empty() ? "ch" + std::to_string(c)
                                      : s.description;
    info.gain_adu_per_mv = s.gain;
    info.baseline_adu = s.baseline;
    info.resolution_bits = s.adc_resolution;
    record.channels.push_back(info);
    record.signal.push_back(adu_to_mv(per_channel[c], s.gain, s.baseline));
  }

  const std::string ann_path = base + "." + ann_ext;
  if (!ann_ext.empty() && fs::exists(ann_path))
    record.annotations = parse_wfdb_annotations(read_file_bytes(ann_path));

  record.validate();
  return record;
}

void write_wfdb_record(const EcgRecord& record, const std::string& dir,
                       int format) {
  namespace fs = std::filesystem;
  record.validate();
  if (format != 212 && format != 16)
    throw Error("unsupported storage format " + std::to_string(format));
  fs::create_directories(dir);

  WfdbHeader header;
  header.record_name = record.record_id;
  header.n_channels = record.channels.size();
  header.fs = record.fs;
  header.n_samples = record.n_samples();

  std::vector<std::vector<int>> adu;
  for (std::size_t c = 0; c < record.channels.size(); ++c) {
    const auto& info = record.channels[c];
    WfdbSignalSpec spec;
    spec.file_name = record.record_id + ".dat";
    spec.format = format;
    spec.gain = info.gain_adu_per_mv;
    spec.baseline = info.baseline_adu;
    spec.adc_resolution = format == 212 ? 12 : 16;
    spec.adc_zero = info.baseline_adu;
    spec.description = info.name;
    header.signals.push_back(spec);
    adu.push_back(mv_to_adu(record.signal[c], info.gain_adu_per_mv,
                            info.baseline_adu, spec.adc_resolution));
  }

  auto flat = interleave(adu);
  std::vector<std::uint8_t> payload;
  if (format == 212)
    payload = encode_format212(flat).bytes;
  else
    payload = encode_format16(flat);

  const auto base = fs::path(dir) / record.record_id;
  write_file_text(base.string() + ".hea", write_wfdb_header(header));
  write_file_bytes(base.string() + ".dat", payload);
  if (!record.annotations.empty())
    write_file_bytes(base.string() + ".atr",
                     encode_wfdb_annotations(record.annotations));
}

}  // namespace elp::ingest
