#include "deconfound/dataset_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace deconfound {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::filesystem::path& path) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0')
    throw InvalidParam(path.string() + ": cannot parse number '" + field + "'");
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidParam("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParam("cannot open " + path.string());
  return in;
}

// Counts consecutive headers named <prefix>1..<prefix>m starting at `at`.
Index count_prefixed(const std::vector<std::string>& header, std::size_t at,
                     const std::string& prefix) {
  Index m = 0;
  while (at < header.size() &&
         header[at] == prefix + std::to_string(m + 1)) {
    ++m;
    ++at;
  }
  return m;
}

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out = open_out(path);
  const Index p = d.x.cols(), k = d.a.cols();
  for (Index j = 0; j < p; ++j) out << "x" << j + 1 << ",";
  for (Index j = 0; j < k; ++j) out << "a" << j + 1 << ",";
  out << "y,split\n";
  const char* tag = d.split == Split::train ? "train" : "test";
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < p; ++j) out << fmt(d.x(i, j)) << ",";
    for (Index j = 0; j < k; ++j) out << fmt(d.a(i, j)) << ",";
    out << fmt(d.y[i]) << "," << tag << "\n";
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw InvalidParam(path.string() + ": empty file");
  const std::vector<std::string> header = split_line(line);
  const Index p = count_prefixed(header, 0, "x");
  const Index k = count_prefixed(header, static_cast<std::size_t>(p), "a");
  if (p < 1 || k < 1 ||
      header.size() != static_cast<std::size_t>(p + k + 2) ||
      header[p + k] != "y" || header[p + k + 1] != "split")
    throw InvalidParam(path.string() + ": expected header x1..xp,a1..ak,y,split");

  std::vector<std::vector<double>> rows;
  std::string split_tag;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw InvalidParam(path.string() + ": row with " +
                         std::to_string(fields.size()) + " fields");
    const std::string& tag = fields.back();
    if (tag != "train" && tag != "test")
      throw InvalidParam(path.string() + ": unknown split tag '" + tag + "'");
    if (split_tag.empty())
      split_tag = tag;
    else if (split_tag != tag)
      throw InvalidParam(path.string() + ": mixed split tags in one file");
    std::vector<double> row(p + k + 1);
    for (Index j = 0; j < p + k + 1; ++j)
      row[j] = parse_double(fields[j], path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidParam(path.string() + ": no data rows");

  Dataset d;
  const Index n = static_cast<Index>(rows.size());
  d.x.resize(n, p);
  d.a.resize(n, k);
  d.y.resize(n);
  bool binary = true;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) d.x(i, j) = rows[i][j];
    for (Index j = 0; j < k; ++j) d.a(i, j) = rows[i][p + j];
    d.y[i] = rows[i][p + k];
    binary = binary && (d.y[i] == 0.0 || d.y[i] == 1.0);
  }
  d.split = split_tag == "train" ? Split::train : Split::test;
  d.binary_y = binary;
  d.standardized = false;  // not recorded in the schema
  return d;
}

void write_prediction_csv(const std::filesystem::path& path,
                          const PredictionTable& t) {
  if (t.y_hat.size() != t.y.size() || t.y.size() != t.a.rows())
    throw DimensionMismatch("prediction table rows disagree");
  std::ofstream out = open_out(path);
  out << "y_hat,y";
  for (Index j = 0; j < t.a.cols(); ++j) out << ",a" << j + 1;
  out << "\n";
  for (Index i = 0; i < t.y.size(); ++i) {
    out << fmt(t.y_hat[i]) << "," << fmt(t.y[i]);
    for (Index j = 0; j < t.a.cols(); ++j) out << "," << fmt(t.a(i, j));
    out << "\n";
  }
}

PredictionTable read_prediction_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw InvalidParam(path.string() + ": empty file");
  const std::vector<std::string> header = split_line(line);
  if (header.size() < 3 || header[0] != "y_hat" || header[1] != "y" ||
      count_prefixed(header, 2, "a") !=
          static_cast<Index>(header.size()) - 2)
    throw InvalidParam(path.string() + ": expected header y_hat,y,a1..ak");
  const Index k = static_cast<Index>(header.size()) - 2;

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw InvalidParam(path.string() + ": malformed row");
    std::vector<double> row(k + 2);
    for (Index j = 0; j < k + 2; ++j) row[j] = parse_double(fields[j], path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidParam(path.string() + ": no data rows");

  PredictionTable t;
  const Index n = static_cast<Index>(rows.size());
  t.y_hat.resize(n);
  t.y.resize(n);
  t.a.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    t.y_hat[i] = rows[i][0];
    t.y[i] = rows[i][1];
    for (Index j = 0; j < k; ++j) t.a(i, j) = rows[i][2 + j];
  }
  return t;
}

}  // namespace deconfound
