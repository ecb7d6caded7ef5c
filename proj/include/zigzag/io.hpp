#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zigzag/analysis.hpp"
#include "zigzag/core.hpp"

namespace zigzag {

// Round-trip exact serialization: 17 significant digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Writes via a temporary file and renames, so partially written outputs
// never appear under the final name.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

// skeleton.csv: header "t,xi_1..xi_d,theta_1..theta_d", one row per point.
inline void write_skeleton_csv(const std::filesystem::path& path, const Skeleton& skel) {
  std::ostringstream out;
  out << "t";
  for (Index i = 0; i < skel.dim(); ++i) out << ",xi_" << (i + 1);
  for (Index i = 0; i < skel.dim(); ++i) out << ",theta_" << (i + 1);
  out << "\n";
  for (std::size_t k = 0; k < skel.size(); ++k) {
    out << format_double(skel.time(k));
    for (Index i = 0; i < skel.dim(); ++i) out << ',' << format_double(skel.position(k)[i]);
    for (Index i = 0; i < skel.dim(); ++i) out << ',' << format_double(skel.velocity(k)[i]);
    out << "\n";
  }
  atomic_write(path, out.str());
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace detail

inline Skeleton read_skeleton_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open skeleton file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty skeleton file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "t" || header.size() % 2 == 0)
    throw std::runtime_error("malformed skeleton header");
  const Index d = static_cast<Index>((header.size() - 1) / 2);

  Skeleton skel(d);
  Vector pos(d), vel(d);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (static_cast<Index>(fields.size()) != 1 + 2 * d)
      throw std::runtime_error("malformed skeleton row");
    const double t = std::stod(fields[0]);
    for (Index i = 0; i < d; ++i) pos[i] = std::stod(fields[1 + i]);
    for (Index i = 0; i < d; ++i) vel[i] = std::stod(fields[1 + d + i]);
    skel.append(t, pos, vel);
  }
  return skel;
}

inline void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  std::ostringstream out;
  out << "t";
  for (Index i = 0; i < samples.positions.cols(); ++i) out << ",xi_" << (i + 1);
  out << "\n";
  for (std::size_t k = 0; k < samples.size(); ++k) {
    out << format_double(samples.times[k]);
    for (Index i = 0; i < samples.positions.cols(); ++i)
      out << ',' << format_double(samples.positions(static_cast<Index>(k), i));
    out << "\n";
  }
  atomic_write(path, out.str());
}

// Datasets: one row per observation, covariates first, label last. The
// Gaussian-mean model has a single value per row and no label.

inline void write_dataset_csv(const std::filesystem::path& path, const Matrix& covariates,
                              const Eigen::VectorXi* labels = nullptr) {
  std::ostringstream out;
  for (Index j = 0; j < covariates.rows(); ++j) {
    for (Index i = 0; i < covariates.cols(); ++i) {
      if (i) out << ',';
      out << format_double(covariates(j, i));
    }
    if (labels) out << ',' << (*labels)[j];
    out << "\n";
  }
  atomic_write(path, out.str());
}

inline Matrix read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(std::stod(f));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged dataset rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty dataset: " + path.string());
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < rows[j].size(); ++i)
      m(static_cast<Index>(j), static_cast<Index>(i)) = rows[j][i];
  return m;
}

// Flat key=value experiment configs; '#' starts a comment. Later keys
// override earlier ones, command-line --set overrides apply last.
class ParamMap {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  void apply_override(const std::string& keyvalue) {
    const auto eq = keyvalue.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override must look like key=value: " + keyvalue);
    set(trim(keyvalue.substr(0, eq)), trim(keyvalue.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoll(it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return it->second == "1" || it->second == "true" || it->second == "yes";
  }

  std::vector<long long> get_int_list(const std::string& key) const {
    std::vector<long long> out;
    std::istringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoll(trim(item)));
    return out;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto t = trim(item);
      if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  static ParamMap from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    ParamMap p;
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) continue;
      p.set(key, trim(line.substr(eq + 1)));
    }
    return p;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace zigzag
