#pragma once

#include <sstream>
#include <string>
#include <vector>

namespace flowpath {

/// Minimal pure-geometry SVG writer: primitives only, no raster or font
/// dependencies. Coordinates are raw canvas pixels.
class SvgCanvas {
public:
    SvgCanvas(double width, double height) : w_(width), h_(height) {}

    void line(double x1, double y1, double x2, double y2, const std::string& color,
              double width = 1.0);
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                  double width = 1.5);
    void circle(double cx, double cy, double r, const std::string& fill, double opacity = 1.0);
    void rect(double x, double y, double w, double h, const std::string& fill);
    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& anchor = "start", const std::string& color = "#222222");
    void comment(const std::string& s);

    std::string str() const;

private:
    double w_, h_;
    std::ostringstream body_;
};

std::string xml_escape(const std::string& s);

}  // namespace flowpath
