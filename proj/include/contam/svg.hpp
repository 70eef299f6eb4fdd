#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

namespace contam {
namespace svg {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Color {
    int r = 0, g = 0, b = 0;

    std::string hex() const {
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return buf;
    }
};

/// Linear interpolation between two colors, t clamped to [0, 1].
inline Color lerp(Color a, Color b, double t) {
    t = std::clamp(t, 0.0, 1.0);
    auto mix = [t](int x, int y) { return static_cast<int>(std::lround(x + (y - x) * t)); };
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

/// Minimal SVG document builder; enough for the heatmap and histogram plots.
class Document {
  public:
    Document(double width, double height) : width_(width), height_(height) {
        body_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
              << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
              << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
              << "\">\n";
        body_ << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
              << "\" fill=\"#ffffff\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              double opacity = 1.0, const std::string& stroke = "") {
        body_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
              << "\" fill=\"" << fill << "\"";
        if (opacity < 1.0) body_ << " fill-opacity=\"" << opacity << "\"";
        if (!stroke.empty()) body_ << " stroke=\"" << stroke << "\" stroke-width=\"1\"";
        body_ << "/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#000000",
              double width = 1.0) {
        body_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
              << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
    }

    void text(double x, double y, double size, const std::string& content,
              const std::string& anchor = "middle", const std::string& fill = "#000000",
              const std::string& cls = "") {
        body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill
              << "\"";
        if (!cls.empty()) body_ << " class=\"" << cls << "\"";
        body_ << ">" << xml_escape(content) << "</text>\n";
    }

    std::string finish() const { return body_.str() + "</svg>\n"; }

    double width() const { return width_; }
    double height() const { return height_; }

  private:
    double width_, height_;
    std::ostringstream body_;
};

}  // namespace svg
}  // namespace contam
