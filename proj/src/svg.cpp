#include "flowpath/svg.hpp"

#include <cstdio>

namespace flowpath {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& color,
                     double width) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << color << "\" stroke-width=\""
          << num(width) << "\"/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts,
                         const std::string& color, double width) {
    if (pts.empty()) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width)
          << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << num(x) << ',' << num(y) << ' ';
    body_ << "\"/>\n";
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill, double opacity) {
    body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill) {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& s, double size,
                     const std::string& anchor, const std::string& color) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << color
          << "\">" << xml_escape(s) << "</text>\n";
}

void SvgCanvas::comment(const std::string& s) {
    std::string safe = s;
    for (std::size_t p; (p = safe.find("--")) != std::string::npos;) safe.replace(p, 2, "==");
    body_ << "<!-- " << safe << " -->\n";
}

std::string SvgCanvas::str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\""
        << num(h_) << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << num(w_) << "\" height=\"" << num(h_)
        << "\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
}

}  // namespace flowpath
