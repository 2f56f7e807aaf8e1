#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "backlab/errors.hpp"
#include "backlab/trainlog.hpp"

namespace backlab {

// Plain comma-separated tables. Every emitter in this project writes numbers
// or bare tokens, so fields containing commas, quotes, or newlines are
// rejected outright instead of quoted — that keeps the reader trivial and the
// round-trip property exact.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Shortest decimal form that strtod parses back to the identical bits.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_int(int64_t v) { return std::to_string(v); }

inline double parse_double(const std::string& s, const std::string& where) {
  require(!s.empty(), ErrKind::format, where + ": empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(end == s.c_str() + s.size(), ErrKind::format,
          where + ": '" + s + "' is not a number");
  return v;
}

inline int64_t parse_int(const std::string& s, const std::string& where) {
  require(!s.empty(), ErrKind::format, where + ": empty integer field");
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  require(end == s.c_str() + s.size(), ErrKind::format,
          where + ": '" + s + "' is not an integer");
  return static_cast<int64_t>(v);
}

namespace detail {

inline void check_csv_field(const std::string& f) {
  for (char c : f) {
    require(c != ',' && c != '\n' && c != '\r' && c != '"', ErrKind::format,
            "csv field '" + f + "' contains a delimiter; emitters must not produce these");
  }
}

}  // namespace detail

inline std::string csv_to_string(const CsvTable& t) {
  std::ostringstream out;
  const auto emit_row = [&out](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      detail::check_csv_field(row[i]);
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  emit_row(t.header);
  for (const auto& row : t.rows) {
    require(row.size() == t.header.size(), ErrKind::format,
            "csv row has " + std::to_string(row.size()) + " fields, header has " +
                std::to_string(t.header.size()));
    emit_row(row);
  }
  return out.str();
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open '" + path + "' for writing");
  const std::string body = csv_to_string(t);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  require(f.good(), ErrKind::io, "short write to '" + path + "'");
}

inline CsvTable parse_csv(const std::string& body, const std::string& where) {
  CsvTable t;
  std::istringstream in(body);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      require(fields.size() == t.header.size(), ErrKind::format,
              where + ": row with " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  require(!first, ErrKind::format, where + ": empty csv");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open '" + path + "'");
  std::ostringstream body;
  body << f.rdbuf();
  return parse_csv(body.str(), path);
}

// Per-epoch training curve, one row per epoch. NaN metrics (hook not
// installed) serialize as the literal "nan" and parse back as NaN.
inline CsvTable trainlog_to_csv(const TrainLog& log) {
  CsvTable t;
  t.header = {"epoch", "loss", "ca", "asr", "seconds", "steps"};
  for (const EpochRow& r : log.rows) {
    t.rows.push_back({format_int(r.epoch), format_double(r.loss), format_double(r.ca),
                      format_double(r.asr), format_double(r.seconds), format_int(r.steps)});
  }
  return t;
}

inline TrainLog trainlog_from_csv(const CsvTable& t, const std::string& where) {
  require(t.header == std::vector<std::string>({"epoch", "loss", "ca", "asr", "seconds", "steps"}),
          ErrKind::format, where + ": unexpected training-log header");
  TrainLog log;
  for (const auto& row : t.rows) {
    EpochRow r;
    r.epoch = static_cast<int>(parse_int(row[0], where));
    r.loss = parse_double(row[1], where);
    r.ca = parse_double(row[2], where);
    r.asr = parse_double(row[3], where);
    r.seconds = parse_double(row[4], where);
    r.steps = parse_int(row[5], where);
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace backlab
