#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace phononet {

/// Minimal deterministic SVG canvas with a data-to-pixel mapping.
class SvgPlot {
 public:
  SvgPlot(double x0, double x1, double y0, double y1, int width = 720, int height = 540,
          bool equal_aspect = false)
      : x0_(x0), x1_(x1), y0_(y0), y1_(y1), w_(width), h_(height) {
    if (equal_aspect) {
      const double sx = (w_ - l_ - r_) / (x1_ - x0_), sy = (h_ - t_ - b_) / (y1_ - y0_);
      const double s = std::min(sx, sy);
      const double cx = 0.5 * (x0_ + x1_), cy = 0.5 * (y0_ + y1_);
      const double hx = 0.5 * (w_ - l_ - r_) / s, hy = 0.5 * (h_ - t_ - b_) / s;
      x0_ = cx - hx, x1_ = cx + hx, y0_ = cy - hy, y1_ = cy + hy;
    }
    frame_ = true;
  }

  double px(double x) const { return l_ + (x - x0_) / (x1_ - x0_) * (w_ - l_ - r_); }
  double py(double y) const { return h_ - b_ - (y - y0_) / (y1_ - y0_) * (h_ - t_ - b_); }

  void title(const std::string& s) {
    if (!s.empty()) add("<text x=\"" + num(w_ / 2.0) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" + esc(s) + "</text>");
  }
  void axis_labels(const std::string& xl, const std::string& yl) {
    xlabel_ = xl;
    ylabel_ = yl;
  }
  void no_axes() { frame_ = false; }

  void band(double ylo, double yhi, const std::string& fill) { rect(x0_, ylo, x1_, yhi, fill); }
  void rect(double xa, double ya, double xb, double yb, const std::string& fill) {
    const double X0 = px(std::min(xa, xb)), X1 = px(std::max(xa, xb));
    const double Y0 = py(std::max(ya, yb)), Y1 = py(std::min(ya, yb));
    add("<rect x=\"" + num(X0) + "\" y=\"" + num(Y0) + "\" width=\"" + num(X1 - X0) + "\" height=\"" +
        num(Y1 - Y0) + "\" fill=\"" + fill + "\" stroke=\"none\"/>");
  }
  void hline(double y, const std::string& color, const std::string& dash) {
    add("<line x1=\"" + num(px(x0_)) + "\" y1=\"" + num(py(y)) + "\" x2=\"" + num(px(x1_)) + "\" y2=\"" +
        num(py(y)) + "\" stroke=\"" + color + "\" stroke-width=\"1\" stroke-dasharray=\"" + dash + "\"/>");
  }
  void line(double xa, double ya, double xb, double yb, const std::string& color, double width,
            const std::string& dash = "") {
    add("<line x1=\"" + num(px(xa)) + "\" y1=\"" + num(py(ya)) + "\" x2=\"" + num(px(xb)) + "\" y2=\"" +
        num(py(yb)) + "\" stroke=\"" + color + "\" stroke-width=\"" + num(width) + "\"" +
        (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") + "/>");
  }
  void vtick(double x, const std::string& label) {
    line(x, y0_, x, y1_, "#bbbbbb", 0.8);
    add("<text x=\"" + num(px(x)) + "\" y=\"" + num(h_ - b_ + 18) + "\" text-anchor=\"middle\" font-size=\"12\">" +
        esc(label) + "</text>");
  }
  void text(double x, double y, const std::string& s, const std::string& anchor, int size = 11) {
    add("<text x=\"" + num(px(x)) + "\" y=\"" + num(py(y) - 3) + "\" text-anchor=\"" + anchor +
        "\" font-size=\"" + std::to_string(size) + "\">" + esc(s) + "</text>");
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, double width) {
    std::string d;
    for (const auto& [x, y] : pts) d += num(px(x)) + "," + num(py(y)) + " ";
    add("<polyline points=\"" + d + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(width) + "\"/>");
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               const std::string& stroke = "none", double width = 0.0) {
    std::string d;
    for (const auto& [x, y] : pts) d += num(px(x)) + "," + num(py(y)) + " ";
    add("<polygon points=\"" + d + "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
        num(width) + "\"/>");
  }
  void circle(double x, double y, double r_px, const std::string& fill) {
    add("<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"" + num(r_px) + "\" fill=\"" + fill + "\"/>");
  }

  std::string str() const {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w_) + "\" height=\"" +
         std::to_string(h_) + "\" viewBox=\"0 0 " + std::to_string(w_) + " " + std::to_string(h_) +
         "\" font-family=\"sans-serif\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<clipPath id=\"plot\"><rect x=\"" + num(l_) + "\" y=\"" + num(t_) + "\" width=\"" +
         num(w_ - l_ - r_) + "\" height=\"" + num(h_ - t_ - b_) + "\"/></clipPath>\n";
    s += "<g clip-path=\"url(#plot)\">\n" + body_ + "</g>\n";
    s += overlay_;
    if (frame_) s += axes();
    s += "</svg>\n";
    return s;
  }

  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }

 private:
  void add(const std::string& el) {
    // Text and titles stay visible outside the clip box.
    if (el.rfind("<text", 0) == 0) overlay_ += el + "\n";
    else body_ += el + "\n";
  }
  static std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  }
  std::string axes() const {
    std::string s = "<rect x=\"" + num(l_) + "\" y=\"" + num(t_) + "\" width=\"" + num(w_ - l_ - r_) +
                    "\" height=\"" + num(h_ - t_ - b_) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double y = y0_ + (y1_ - y0_) * i / 5.0;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", y);
      s += "<text x=\"" + num(l_ - 6) + "\" y=\"" + num(py(y) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
           buf + "</text>\n";
      const double x = x0_ + (x1_ - x0_) * i / 5.0;
      std::snprintf(buf, sizeof buf, "%.3g", x);
      s += "<text x=\"" + num(px(x)) + "\" y=\"" + num(h_ - b_ + 32) + "\" text-anchor=\"middle\" font-size=\"10\" fill=\"#666666\">" +
           buf + "</text>\n";
    }
    s += "<text x=\"" + num(w_ / 2.0) + "\" y=\"" + num(h_ - 6.0) + "\" text-anchor=\"middle\" font-size=\"13\">" +
         esc(xlabel_) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num(h_ / 2.0) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         num(h_ / 2.0) + ")\">" + esc(ylabel_) + "</text>\n";
    return s;
  }

  double x0_, x1_, y0_, y1_;
  int w_, h_;
  double l_ = 70, r_ = 20, t_ = 34, b_ = 52;
  bool frame_ = true;
  std::string xlabel_, ylabel_, body_, overlay_;
};

}  // namespace phononet
