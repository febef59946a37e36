#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

// One beat per line: "<seconds>[<ws><position-in-bar>]". The optional
// second column is ignored. Blank lines and '#' comments are skipped.
inline BeatAnnotation parse_beats(std::istream& in, const std::string& source = "<stream>") {
  std::vector<double> times;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const char* begin = line.c_str() + first;
    char* end = nullptr;
    errno = 0;
    double t = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE || (*end != '\0' && *end != ' ' && *end != '\t'))
      throw DataError(source + ":" + std::to_string(line_no) + ": malformed beat time");
    times.push_back(t);
  }
  try {
    return BeatAnnotation(std::move(times));
  } catch (const InvalidArgument& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline BeatAnnotation read_beats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open beat file: " + path);
  return parse_beats(in, path);
}

inline std::string format_beats(const BeatAnnotation& beats) {
  std::string out;
  char buf[64];
  for (double t : beats.times()) {
    std::snprintf(buf, sizeof buf, "%.6f\n", t);
    out += buf;
  }
  return out;
}

inline void write_beats(const std::string& path, const BeatAnnotation& beats) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open beat file for writing: " + path);
  out << format_beats(beats);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace vocalbeat
