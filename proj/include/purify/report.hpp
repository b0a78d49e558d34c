#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "purify/config.hpp"

namespace purify {

struct ReportRow {
  std::string preset;
  int m = 0;  // 0 for rows that summarize the whole sweep
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int reps = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;  // emitted as '#' comment lines
  std::optional<double> calibrated_epsilon;
  double wall_seconds = 0.0;  // never written to the CSV

  void add(int m, const std::string& metric, double mean, double std, int reps, double epsilon);
  const ReportRow* find(int m, const std::string& metric) const;
  double value(int m, const std::string& metric) const;  // throws when missing
};

// Throws FormatError on rows without a metric name, non-finite values, or a
// non-positive repetition count.
void validate_report(const ExperimentReport& report);

// Header `preset,m,metric,mean,std,reps,epsilon,seed`; numbers in %.17g.
std::string to_csv(const ExperimentReport& report);
void write_csv(const ExperimentReport& report, const std::string& path);

// Static SVG with one line-chart panel per metric (mean vs m, +-std bars).
std::string to_svg(const ExperimentReport& report);
void write_svg(const ExperimentReport& report, const std::string& path);

}  // namespace purify
