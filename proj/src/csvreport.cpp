#include "roinet/csvreport.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "roinet/errors.hpp"

namespace roinet {

namespace {

const char* kHeader = "method,seed,accuracy,mean_pixel_acc,mean_iou,n_test";

std::string cell(double v) {
  if (v < 0.0) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void append_metrics_csv(const std::string& path, const MetricsReport& report) {
  bool need_header = true;
  {
    std::ifstream probe(path, std::ios::binary);
    if (probe && probe.peek() != EOF) need_header = false;
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path + " for append");
  if (need_header) out << kHeader << "\n";
  out << report.method << "," << report.seed << "," << cell(report.accuracy) << ","
      << cell(report.mean_pixel_acc) << "," << cell(report.mean_iou) << ","
      << report.n_test << "\n";
  if (!out) throw IoError("write failed for " + path);
}

std::vector<MetricsReport> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty metrics file");
  if (line != kHeader)
    throw FormatError(path + ": unexpected header '" + line + "'");
  std::vector<MetricsReport> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 6)
      throw FormatError(path + ": line " + std::to_string(lineno) +
                        " has " + std::to_string(f.size()) + " fields, want 6");
    MetricsReport r;
    try {
      r.method = f[0];
      r.seed = std::stoull(f[1]);
      r.accuracy = f[2].empty() ? -1.0 : std::stod(f[2]);
      r.mean_pixel_acc = f[3].empty() ? -1.0 : std::stod(f[3]);
      r.mean_iou = f[4].empty() ? -1.0 : std::stod(f[4]);
      r.n_test = std::stoi(f[5]);
    } catch (const std::exception&) {
      throw FormatError(path + ": line " + std::to_string(lineno) + " unparseable");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_metrics_table(const std::vector<MetricsReport>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(26) << "method" << std::right << std::setw(12)
     << "seed" << std::setw(10) << "accuracy" << std::setw(12) << "pixel_acc"
     << std::setw(10) << "mean_iou" << std::setw(8) << "n_test" << "\n";
  os << std::string(78, '-') << "\n";
  auto num = [](double v) { return v < 0.0 ? std::string("-") : cell(v); };
  for (const MetricsReport& r : rows) {
    os << std::left << std::setw(26) << r.method << std::right << std::setw(12)
       << r.seed << std::setw(10) << num(r.accuracy) << std::setw(12)
       << num(r.mean_pixel_acc) << std::setw(10) << num(r.mean_iou)
       << std::setw(8) << r.n_test << "\n";
  }
  return os.str();
}

}  // namespace roinet
