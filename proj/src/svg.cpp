#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "purify/report.hpp"

namespace purify {

namespace {

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct Point {
  double x, y, err;
};

void panel(std::ostringstream& out, double ox, double oy, double w, double h, const std::string& title,
           const std::vector<Point>& pts) {
  out << "<g transform=\"translate(" << ox << ',' << oy << ")\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"#999\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"-6\" text-anchor=\"middle\" font-size=\"12\">" << title
      << "</text>\n";
  double xmin = pts.front().x, xmax = pts.front().x, ymin = pts.front().y - pts.front().err,
         ymax = pts.front().y + pts.front().err;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y - p.err);
    ymax = std::max(ymax, p.y + p.err);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymax += 0.5 * std::max(1e-12, std::abs(ymax));
    ymin -= 0.5 * std::max(1e-12, std::abs(ymin));
  }
  // m goes on a log axis.
  const bool logx = xmin > 0;
  auto tx = [&](double x) {
    const double a = logx ? std::log(x) : x, lo = logx ? std::log(xmin) : xmin, hi = logx ? std::log(xmax) : xmax;
    return hi == lo ? w / 2 : 10 + (w - 20) * (a - lo) / (hi - lo);
  };
  auto ty = [&](double y) { return h - 10 - (h - 20) * (y - ymin) / (ymax - ymin); };
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : pts) out << tx(p.x) << ',' << ty(p.y) << ' ';
  out << "\"/>\n";
  for (const auto& p : pts) {
    out << "<circle cx=\"" << tx(p.x) << "\" cy=\"" << ty(p.y) << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
    if (p.err > 0)
      out << "<line x1=\"" << tx(p.x) << "\" x2=\"" << tx(p.x) << "\" y1=\"" << ty(p.y - p.err)
          << "\" y2=\"" << ty(p.y + p.err) << "\" stroke=\"#1f77b4\"/>\n";
    out << "<text x=\"" << tx(p.x) << "\" y=\"" << h + 12 << "\" text-anchor=\"middle\" font-size=\"9\">"
        << fmt(p.x, "%g") << "</text>\n";
  }
  out << "<text x=\"2\" y=\"10\" font-size=\"9\">" << fmt(ymax) << "</text>\n";
  out << "<text x=\"2\" y=\"" << h - 2 << "\" font-size=\"9\">" << fmt(ymin) << "</text>\n";
  out << "</g>\n";
}

}  // namespace

std::string to_svg(const ExperimentReport& report) {
  std::map<std::string, std::vector<Point>> series;
  std::vector<std::string> order;
  for (const auto& r : report.rows) {
    if (r.m <= 0) continue;
    if (!series.count(r.metric)) order.push_back(r.metric);
    series[r.metric].push_back({static_cast<double>(r.m), r.mean, r.std});
  }
  const int cols = 3, pw = 220, ph = 150, gap = 50;
  const int n = static_cast<int>(order.size());
  const int rows = std::max(1, (n + cols - 1) / cols);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * (pw + gap) + gap << "\" height=\""
      << rows * (ph + gap) + gap << "\" font-family=\"sans-serif\">\n";
  out << "<text x=\"" << gap << "\" y=\"18\" font-size=\"14\">" << to_string(report.config.preset)
      << " (mean vs m, bars = std)</text>\n";
  for (int i = 0; i < n; ++i) {
    auto pts = series[order[static_cast<std::size_t>(i)]];
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
    panel(out, gap + (i % cols) * (pw + gap), gap + (i / cols) * (ph + gap), pw, ph,
          order[static_cast<std::size_t>(i)], pts);
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace purify
