#include "evcoupler/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evc {

int Table::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return int(i);
  throw std::runtime_error("csv: missing column '" + name + "'");
}

std::vector<double> Table::column(const std::string& name) const {
  const int c = col(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

static std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

Table parse_csv(const std::string& text, const std::string& origin) {
  Table t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (t.header.empty()) {
      for (auto& f : fields) {
        // trim spaces around header names
        size_t b = f.find_first_not_of(" \t");
        size_t e = f.find_last_not_of(" \t");
        t.header.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
      }
      continue;
    }
    if (fields.size() != t.header.size())
      throw std::runtime_error(origin + ": row " + std::to_string(lineno) +
                               " has " + std::to_string(fields.size()) +
                               " fields, expected " +
                               std::to_string(t.header.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(f.c_str(), &end);
      // allow surrounding whitespace only
      const char* p = end;
      while (*p == ' ' || *p == '\t') ++p;
      const char* s = f.c_str();
      while (*s == ' ' || *s == '\t') ++s;
      if (s == end || *p != '\0' || errno == ERANGE)
        throw std::runtime_error(origin + ": row " + std::to_string(lineno) +
                                 ", column " + std::to_string(c + 1) + " ('" +
                                 t.header[c] + "'): not a number: '" + f + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw std::runtime_error(origin + ": empty file");
  return t;
}

Table read_csv(const std::string& path) {
  return parse_csv(read_file(path), path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename " + tmp + " -> " + path + ": " +
                             std::strerror(errno));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace evc
