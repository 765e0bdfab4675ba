#pragma once

// CSV tables, key = value configuration files and run manifests. Floats are
// written with 17 significant digits so a file round-trips bit-exactly.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "slkato/common.hpp"
#include "slkato/mesh.hpp"

namespace slkato {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string fmt17(int v) { return std::to_string(v); }
inline std::string fmt17(long long v) { return std::to_string(v); }
inline std::string fmt17(std::size_t v) { return std::to_string(v); }
inline std::string fmt17(const std::string& v) { return v; }
inline std::string fmt17(const char* v) { return v; }

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... Ts>
  void add(const Ts&... cells) {
    rows.push_back({fmt17(cells)...});
  }
  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (first) throw ConfigError(path.string() + ": empty CSV");
  return t;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number: '" + s + "'");
  }
}

inline int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError(what + ": not an integer: '" + s + "'");
  }
}

/// Sparse triplet dump with 0-based indices; zeros are skipped.
inline CsvTable matrix_table(const MatC& a) {
  CsvTable t{{"i", "j", "re", "im"}, {}};
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != cplx(0.0)) t.add(static_cast<int>(i), static_cast<int>(j), a(i, j).real(), a(i, j).imag());
  return t;
}

inline MatC matrix_from_table(const CsvTable& t, Eigen::Index rows, Eigen::Index cols) {
  const int ci = t.column("i"), cj = t.column("j"), cr = t.column("re"), cm = t.column("im");
  if (ci < 0 || cj < 0 || cr < 0 || cm < 0) throw ConfigError("matrix CSV needs columns i,j,re,im");
  MatC a = MatC::Zero(rows, cols);
  for (const auto& r : t.rows) {
    const int i = parse_int(r[ci], "i"), j = parse_int(r[cj], "j");
    if (i < 0 || j < 0 || i >= rows || j >= cols) throw ConfigError("matrix CSV index out of range");
    a(i, j) = cplx(parse_double(r[cr], "re"), parse_double(r[cm], "im"));
  }
  return a;
}

/// Coefficient table `x,re,im`, linearly interpolated and held constant outside its range.
inline CoefficientFn coefficient_from_table(const CsvTable& t) {
  const int cx = t.column("x"), cr = t.column("re"), cm = t.column("im");
  if (cx < 0 || cr < 0 || cm < 0) throw ConfigError("coefficient CSV needs columns x,re,im");
  std::vector<std::pair<double, cplx>> pts;
  for (const auto& r : t.rows)
    pts.emplace_back(parse_double(r[cx], "x"), cplx(parse_double(r[cr], "re"), parse_double(r[cm], "im")));
  if (pts.empty()) throw ConfigError("coefficient CSV has no rows");
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].first > pts[i - 1].first)) throw ConfigError("coefficient CSV has repeated x values");
  return [pts = std::move(pts)](double x, double) {
    if (x <= pts.front().first) return pts.front().second;
    if (x >= pts.back().first) return pts.back().second;
    const auto it = std::upper_bound(pts.begin(), pts.end(), x, [](double v, const auto& p) { return v < p.first; });
    const auto& [x1, v1] = *it;
    const auto& [x0, v0] = *(it - 1);
    const double t = (x - x0) / (x1 - x0);
    return (1.0 - t) * v0 + t * v1;
  };
}

// ---------------------------------------------------------------------------
// Scalars from text

/// "1.5", "-2i", "1+0.5i", "3-4i", "i".
inline cplx parse_complex(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw ConfigError("empty complex number");
  if (s.back() != 'i' && s.back() != 'j') return parse_double(s, "complex");
  s.pop_back();
  // Split at the last sign that is not part of an exponent.
  std::size_t split = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  auto imag_part = [](const std::string& t) {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    return parse_double(t, "complex");
  };
  if (split == std::string::npos) return {0.0, imag_part(s)};
  return {parse_double(s.substr(0, split), "complex"), imag_part(s.substr(split))};
}

/// "dirichlet", "neumann", "pi/4", "0.3pi", or a complex angle "1+0.5i".
inline BoundaryCondition parse_theta(const std::string& text) {
  const std::string s = lower(trim(text));
  if (s == "dirichlet") return BoundaryCondition::dirichlet();
  if (s == "neumann") return BoundaryCondition::neumann();
  const auto p = s.find("pi");
  if (p != std::string::npos) {
    const std::string pre = s.substr(0, p), post = s.substr(p + 2);
    double factor = pre.empty() ? 1.0 : pre == "-" ? -1.0 : parse_double(pre.back() == '*' ? pre.substr(0, pre.size() - 1) : pre, "theta");
    if (!post.empty()) {
      if (post[0] != '/') throw ConfigError("theta: cannot parse '" + text + "'");
      factor /= parse_double(post.substr(1), "theta");
    }
    return BoundaryCondition::robin(factor * pi);
  }
  return BoundaryCondition::robin(parse_complex(s));
}

inline std::string format_complex(cplx z) {
  return fmt17(z.real()) + (z.imag() < 0 || std::signbit(z.imag()) ? "-" : "+") + fmt17(std::abs(z.imag())) + "i";
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == ';') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// key = value files

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& is, const std::string& source = "config") {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  return parse_key_values(is, path.string());
}

/// Ordered key = value record of one run.
class Manifest {
 public:
  template <class T>
  void set(const std::string& key, const T& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = fmt17(value);
        return;
      }
    entries_.emplace_back(key, fmt17(value));
  }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, cplx value) { set(key, format_complex(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return {};
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace slkato
