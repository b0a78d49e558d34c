#include "purify/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "purify/errors.hpp"

namespace purify {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentReport::add(int m, const std::string& metric, double mean, double std, int reps,
                           double epsilon) {
  rows.push_back({to_string(config.preset), m, metric, mean, std, reps, epsilon, config.seed});
}

const ReportRow* ExperimentReport::find(int m, const std::string& metric) const {
  for (const auto& r : rows)
    if (r.m == m && r.metric == metric) return &r;
  return nullptr;
}

double ExperimentReport::value(int m, const std::string& metric) const {
  const ReportRow* r = find(m, metric);
  if (!r) throw FormatError("report has no row (m=" + std::to_string(m) + ", " + metric + ")");
  return r->mean;
}

void validate_report(const ExperimentReport& report) {
  for (const auto& r : report.rows) {
    const std::string where = " in row (m=" + std::to_string(r.m) + ", " + r.metric + ")";
    if (r.metric.empty() || r.preset.empty()) throw FormatError("row without metric or preset name");
    if (r.metric.find_first_of(",\n\"") != std::string::npos) throw FormatError("metric name is not CSV-safe" + where);
    if (!std::isfinite(r.mean) || !std::isfinite(r.std) || r.std < 0) throw FormatError("non-finite mean or std" + where);
    if (r.reps < 1) throw FormatError("repetition count must be positive" + where);
    if (!std::isfinite(r.epsilon) || r.epsilon < 0) throw FormatError("bad epsilon" + where);
  }
}

std::string to_csv(const ExperimentReport& report) {
  validate_report(report);
  std::ostringstream out;
  for (const auto& line : config_echo(report.config)) out << "# " << line << '\n';
  if (report.calibrated_epsilon) out << "# calibrated_epsilon=" << num(*report.calibrated_epsilon) << '\n';
  for (const auto& n : report.notes) out << "# " << n << '\n';
  out << "preset,m,metric,mean,std,reps,epsilon,seed\n";
  for (const auto& r : report.rows)
    out << r.preset << ',' << r.m << ',' << r.metric << ',' << num(r.mean) << ',' << num(r.std) << ','
        << r.reps << ',' << num(r.epsilon) << ',' << r.seed << '\n';
  return out.str();
}

void write_csv(const ExperimentReport& report, const std::string& path) {
  const std::string csv = to_csv(report);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << csv;
  if (!f) throw FormatError("write to " + path + " failed");
}

void write_svg(const ExperimentReport& report, const std::string& path) {
  const std::string svg = to_svg(report);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << svg;
  if (!f) throw FormatError("write to " + path + " failed");
}

}  // namespace purify
