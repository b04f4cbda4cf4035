#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "swiptmac/csv.hpp"
#include "swiptmac/errors.hpp"

namespace swiptmac {

/// Self-contained line plot, deterministic byte for byte: fixed canvas, fixed
/// palette, numbers rendered with the CSV formatter. Intended for quick looks
/// at boundaries and sweeps, not publication graphics.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_series(std::string name, std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size()) throw invalid_parameter("SvgPlot: x/y size mismatch");
    series_.push_back({std::move(name), std::move(x), std::move(y)});
  }

  std::string to_string() const {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series_) {
      for (double v : s.x) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
      }
      for (double v : s.y) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
    if (!(xmin <= xmax)) {
      xmin = 0.0;
      xmax = 1.0;
    }
    if (!(ymin <= ymax)) {
      ymin = 0.0;
      ymax = 1.0;
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;

    const double x0 = 70, y0 = 40, w = 520, h = 380;  // plot box
    const auto px = [&](double x) { return x0 + w * (x - xmin) / (xmax - xmin); };
    const auto py = [&](double y) { return y0 + h * (1.0 - (y - ymin) / (ymax - ymin)); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    out += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    out += "<rect x=\"" + csv_number(x0) + "\" y=\"" + csv_number(y0) + "\" width=\"" +
           csv_number(w) + "\" height=\"" + csv_number(h) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    out += text(320, 20, title_, "middle", 14);
    out += text(320, 470, xlabel_, "middle", 12);
    out += "<text x=\"16\" y=\"230\" text-anchor=\"middle\" font-size=\"12\" "
           "font-family=\"sans-serif\" transform=\"rotate(-90 16 230)\">" +
           escape(ylabel_) + "</text>\n";
    out += text(x0, y0 + h + 16, csv_number(xmin), "start", 10);
    out += text(x0 + w, y0 + h + 16, csv_number(xmax), "end", 10);
    out += text(x0 - 4, y0 + h, csv_number(ymin), "end", 10);
    out += text(x0 - 4, y0 + 10, csv_number(ymax), "end", 10);

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      const char* color = palette[k % 6];
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (!pts.empty()) pts += " ";
        pts += csv_number(px(s.x[i])) + "," + csv_number(py(s.y[i]));
      }
      out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
      const double ly = y0 + 16 + 16 * static_cast<double>(k);
      out += "<line x1=\"" + csv_number(x0 + w - 120) + "\" y1=\"" + csv_number(ly - 4) +
             "\" x2=\"" + csv_number(x0 + w - 100) + "\" y2=\"" + csv_number(ly - 4) +
             "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      out += text(x0 + w - 96, ly, s.name, "start", 10);
    }
    out += "</svg>\n";
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw invalid_parameter("SvgPlot: cannot open '" + path + "' for writing");
    f << to_string();
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
  };

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '&')
        out += "&amp;";
      else if (c == '<')
        out += "&lt;";
      else if (c == '>')
        out += "&gt;";
      else
        out += c;
    }
    return out;
  }

  static std::string text(double x, double y, const std::string& s, const char* anchor,
                          int size) {
    return "<text x=\"" + csv_number(x) + "\" y=\"" + csv_number(y) + "\" text-anchor=\"" +
           anchor + "\" font-size=\"" + std::to_string(size) +
           "\" font-family=\"sans-serif\">" + escape(s) + "</text>\n";
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
};

}  // namespace swiptmac
