#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bcmlab {

struct Series {
  enum class Style { markers, line, markers_line };
  std::string label;
  std::vector<double> x, y;
  Style style = Style::markers_line;
};

struct PlotSpec {
  std::string title;
  std::string xlabel, ylabel;
  bool logx = false, logy = false;
  std::vector<Series> series;
  std::vector<std::string> notes;  // printed under the title
};

/// Static SVG, no external references. Identical specs give identical bytes.
/// Points with non-finite or (on log axes) non-positive coordinates are
/// skipped. Throws a validation error when nothing is left to draw.
void write_svg(std::ostream& os, const PlotSpec& spec);
void write_svg(const std::string& path, const PlotSpec& spec);

}  // namespace bcmlab
