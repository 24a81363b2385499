#include "bcmlab/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <bcm/error.hpp>
#include <bcm/format.hpp>

namespace bcmlab {
namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 60, kBottom = 56;
constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0, hi = 1;  // in transformed units

  double tr(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }

  void fit(const std::vector<double>& vals) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : vals) {
      lo = std::min(lo, tr(v));
      hi = std::max(hi, tr(v));
    }
    if (!(hi > lo)) {
      const double pad = log ? 0.5 : std::max(std::abs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::ceil(lo); e <= hi; e += 1) t.push_back(e);
      if (t.size() >= 2) return t;
      t.clear();
      for (double e = std::floor(lo); e <= std::ceil(hi); e += 1)
        for (double m : {1.0, 2.0, 5.0}) {
          const double v = e + std::log10(m);
          if (v >= lo && v <= hi) t.push_back(v);
        }
      if (t.size() < 2) t = {lo, hi};
      return t;
    }
    const double span = hi - lo;
    const double raw = span / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    return t;
  }

  std::string label(double t) const {
    if (log) return bcm::format("%.3g", std::pow(10.0, t));
    return bcm::format("%g", t);
  }
};

std::string num(double v) { return bcm::format("%.2f", v); }

}  // namespace

void write_svg(std::ostream& os, const PlotSpec& spec) {
  Axis ax{spec.logx}, ay{spec.logy};
  std::vector<double> xs, ys;
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (ax.usable(s.x[i]) && ay.usable(s.y[i])) {
        xs.push_back(s.x[i]);
        ys.push_back(s.y[i]);
      }
  if (xs.empty()) bcm::fail_validation("plot '" + spec.title + "': table is empty");
  ax.fit(xs);
  ay.fit(ys);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.tr(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.tr(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft) << "\" y=\"20\" font-size=\"14\">" << escape(spec.title) << "</text>\n";
  for (std::size_t i = 0; i < spec.notes.size(); ++i)
    os << "<text x=\"" << num(kLeft) << "\" y=\"" << num(36 + 13 * i) << "\">" << escape(spec.notes[i]) << "</text>\n";

  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    os << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x) << "\" y2=\""
       << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
       << escape(ax.label(t)) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = kTop + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
    os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
       << escape(ay.label(t)) << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
     << escape(spec.xlabel) << "</text>\n";
  os << "<text transform=\"translate(16 " << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.ylabel) << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const char* color = kColors[si % kColors.size()];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (ax.usable(s.x[i]) && ay.usable(s.y[i])) pts.emplace_back(px(s.x[i]), py(s.y[i]));
    if (pts.empty()) continue;
    const bool line = s.style != Series::Style::markers && pts.size() > 1;
    const bool marks = s.style != Series::Style::line || pts.size() == 1;
    if (line) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
      os << "\"/>\n";
    }
    if (marks)
      for (const auto& [x, y] : pts)
        os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = kTop + 10 + 16 * si;
    os << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 30)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kLeft + pw + 34) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
}

void write_svg(const std::string& path, const PlotSpec& spec) {
  std::ostringstream buf;
  write_svg(buf, spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) bcm::fail_validation("cannot write " + path);
  out << buf.str();
}

}  // namespace bcmlab
