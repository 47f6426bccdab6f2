#include "longpeer/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace longpeer::io {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    rows.push_back(std::move(fields));
  }
  return rows;
}

double parse_double(const std::string& field, const std::string& context) {
  try {
    size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size())
      fail(ErrorKind::ParseError, context + ": trailing characters in '" + field + "'");
    if (!std::isfinite(v))
      fail(ErrorKind::NonFiniteValue, context + ": '" + field + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, context + ": cannot parse '" + field + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_dataset(const LongitudinalDataset& ds, const std::string& outcomes_path,
                   const std::string& curves_path) {
  std::ofstream out(outcomes_path);
  if (!out) fail(ErrorKind::FileNotFound, "cannot open " + outcomes_path);
  out << "subject,t,y";
  for (const auto& name : ds.covariate_names) out << "," << name;
  out << "\n";
  for (const auto& rec : ds.records) {
    out << rec.subject_id << "," << format_double(rec.t) << "," << format_double(rec.y);
    for (int k = 0; k < rec.x.size(); ++k) out << "," << format_double(rec.x[k]);
    out << "\n";
  }

  std::ofstream curves(curves_path);
  if (!curves) fail(ErrorKind::FileNotFound, "cannot open " + curves_path);
  curves << "subject,t";
  for (int j = 1; j <= ds.grid.size(); ++j) curves << ",w_" << j;
  curves << "\n";
  for (const auto& rec : ds.records) {
    curves << rec.subject_id << "," << format_double(rec.t);
    for (int j = 0; j < rec.w.size(); ++j) curves << "," << format_double(rec.w[j]);
    curves << "\n";
  }
}

Matrix read_basis_csv(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) fail(ErrorKind::QBasisNotFound, path);
  probe.close();
  const auto rows = read_csv(path);
  if (rows.empty()) fail(ErrorKind::ParseError, path + ": empty basis file");
  const size_t cols = rows[0].size();
  Matrix Q(static_cast<int>(rows.size()), static_cast<int>(cols));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      fail(ErrorKind::ParseError, path + ": ragged row " + std::to_string(i + 1));
    for (size_t j = 0; j < cols; ++j)
      Q(static_cast<int>(i), static_cast<int>(j)) =
          parse_double(rows[i][j], path + " row " + std::to_string(i + 1));
  }
  return Q;
}

void write_matrix_csv(const Matrix& m, const std::string& path,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FileNotFound, "cannot open " + path);
  if (!header.empty()) {
    for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << "\n";
  }
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << "\n";
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FileNotFound, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::FileNotFound, "cannot open " + path);
  out << content;
}

std::string content_hash(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) { return content_hash(read_file(path)); }

}  // namespace longpeer::io
