#include "shadowfit/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace shadowfit {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(std::size_t lineno, const std::string& what) {
  throw std::runtime_error("csv line " + std::to_string(lineno) + ": " + what);
}

double parse_number(const std::string& s, std::size_t lineno, const std::string& col) {
  const std::string t = trim(s);
  if (t.empty()) fail(lineno, "empty value in column " + col);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) fail(lineno, "non-numeric value '" + s + "' in column " + col);
    return v;
  } catch (const std::invalid_argument&) {
    fail(lineno, "non-numeric value '" + s + "' in column " + col);
  } catch (const std::out_of_range&) {
    fail(lineno, "value out of range '" + s + "' in column " + col);
  }
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);

  const auto header = split_line(line);
  if (header.size() < 3 || trim(header[0]) != "r" || trim(header[1]) != "y")
    throw std::runtime_error("csv: header must start with r,y and name u*/z* columns");

  int du = 0, dz = 0;
  bool in_z = false;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (!in_z && name == "u" + std::to_string(du + 1)) {
      ++du;
    } else if (name == "z" + std::to_string(dz + 1)) {
      in_z = true;
      ++dz;
    } else {
      throw std::runtime_error("csv: unexpected header column '" + name + "'");
    }
  }
  if (dz < 1) throw std::runtime_error("csv: at least one z column is required");

  std::vector<std::uint8_t> r;
  std::vector<double> yv;
  std::vector<double> uv, zv;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      fail(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));

    const double rveal = parse_number(fields[0], lineno, "r");
    if (rveal != 0.0 && rveal != 1.0) fail(lineno, "r must be 0 or 1");
    const bool observed = rveal == 1.0;

    const std::string yfield = trim(fields[1]);
    if (observed && yfield.empty()) fail(lineno, "y missing although r = 1");
    if (!observed && !yfield.empty()) fail(lineno, "y present although r = 0");

    r.push_back(observed ? 1 : 0);
    yv.push_back(observed ? parse_number(yfield, lineno, "y")
                          : std::numeric_limits<double>::quiet_NaN());
    for (int c = 0; c < du; ++c)
      uv.push_back(parse_number(fields[2 + static_cast<std::size_t>(c)], lineno,
                                "u" + std::to_string(c + 1)));
    for (int c = 0; c < dz; ++c)
      zv.push_back(parse_number(fields[2 + static_cast<std::size_t>(du + c)], lineno,
                                "z" + std::to_string(c + 1)));
  }

  const int n = static_cast<int>(r.size());
  if (n == 0) throw std::runtime_error("csv: no data rows in " + path);

  Dataset data;
  data.r = std::move(r);
  data.y = Eigen::Map<Vec>(yv.data(), n);
  data.u = Mat(n, du);
  data.z = Mat(n, dz);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < du; ++c) data.u(i, c) = uv[static_cast<std::size_t>(i) * du + c];
    for (int c = 0; c < dz; ++c) data.z(i, c) = zv[static_cast<std::size_t>(i) * dz + c];
  }
  data.validate();
  return data;
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);

  out << "r,y";
  for (int c = 0; c < data.u_dim(); ++c) out << ",u" << c + 1;
  for (int c = 0; c < data.z_dim(); ++c) out << ",z" << c + 1;
  out << "\n";

  for (int i = 0; i < data.N(); ++i) {
    const bool observed = data.r[static_cast<std::size_t>(i)] != 0;
    out << (observed ? 1 : 0) << ",";
    if (observed) out << data.y[i];
    for (int c = 0; c < data.u_dim(); ++c) out << "," << data.u(i, c);
    for (int c = 0; c < data.z_dim(); ++c) out << "," << data.z(i, c);
    out << "\n";
  }
}

}  // namespace shadowfit
