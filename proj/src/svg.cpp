#include "mladi/svg.hpp"

#include <algorithm>
#include <sstream>

namespace mladi::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kMarginLeft = 70;
constexpr double kMarginRight = 150;
constexpr double kMarginTop = 40;
constexpr double kMarginBottom = 60;

const char* kPalette[] = {"#2166ac", "#4393c3", "#92c5de", "#cccccc",
                          "#f4a582", "#d6604d", "#b2182b", "#555555"};
constexpr int kPaletteSize = 8;

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

class Canvas {
 public:
  Canvas(const std::string& title, const std::string& x_label, const std::string& y_label) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
         << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    text(kWidth / 2, kMarginTop / 2 + 6, title, 16, "middle");
    text((kMarginLeft + kWidth - kMarginRight) / 2, kHeight - 12, x_label, 12, "middle");
    out_ << "<text x=\"18\" y=\"" << (kMarginTop + plot_h() / 2)
         << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
         << (kMarginTop + plot_h() / 2) << ")\" font-family=\"sans-serif\">" << esc(y_label)
         << "</text>\n";
    // axes
    line(kMarginLeft, kMarginTop, kMarginLeft, kMarginTop + plot_h(), "#000000", 1);
    line(kMarginLeft, kMarginTop + plot_h(), kMarginLeft + plot_w(), kMarginTop + plot_h(),
         "#000000", 1);
  }

  static double plot_w() { return kWidth - kMarginLeft - kMarginRight; }
  static double plot_h() { return kHeight - kMarginTop - kMarginBottom; }
  static double px(double frac) { return kMarginLeft + frac * plot_w(); }
  static double py(double frac) { return kMarginTop + (1.0 - frac) * plot_h(); }

  void line(double x1, double y1, double x2, double y2, const std::string& color, double w) {
    out_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
         << "\" stroke=\"" << color << "\" stroke-width=\"" << w << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& color) {
    out_ << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r << "\" fill=\"" << color
         << "\" fill-opacity=\"0.75\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "#000000") {
    out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
         << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size, const std::string& anchor) {
    out_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
         << "\" text-anchor=\"" << anchor << "\" font-family=\"sans-serif\">" << esc(s)
         << "</text>\n";
  }

  void axis_ticks(double vx_min, double vx_max, double vy_min, double vy_max) {
    for (int i = 0; i <= 4; ++i) {
      double f = i / 4.0;
      std::ostringstream xv, yv;
      xv.precision(3);
      yv.precision(3);
      xv << vx_min + f * (vx_max - vx_min);
      yv << vy_min + f * (vy_max - vy_min);
      text(px(f), kMarginTop + plot_h() + 16, xv.str(), 10, "middle");
      text(kMarginLeft - 6, py(f) + 4, yv.str(), 10, "end");
      if (i > 0) {
        line(px(f), kMarginTop, px(f), kMarginTop + plot_h(), "#eeeeee", 0.5);
        line(kMarginLeft, py(f), kMarginLeft + plot_w(), py(f), "#eeeeee", 0.5);
      }
    }
  }

  void legend(const std::vector<std::string>& labels) {
    double x = kMarginLeft + plot_w() + 14;
    double y = kMarginTop + 8;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      rect(x, y - 8, 10, 10, kPalette[i % kPaletteSize]);
      text(x + 16, y + 1, labels[i], 11, "start");
      y += 18;
    }
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

}  // namespace

std::string scatter(const ScatterSpec& spec) {
  Canvas c(spec.title, spec.x_label, spec.y_label);
  c.axis_ticks(spec.x_min, spec.x_max, spec.y_min, spec.y_max);
  const double xr = spec.x_max - spec.x_min;
  const double yr = spec.y_max - spec.y_min;
  for (const auto& p : spec.points) {
    double fx = xr > 0 ? (p.x - spec.x_min) / xr : 0.5;
    double fy = yr > 0 ? (p.y - spec.y_min) / yr : 0.5;
    fx = std::clamp(fx, 0.0, 1.0);
    fy = std::clamp(fy, 0.0, 1.0);
    c.circle(Canvas::px(fx), Canvas::py(fy), 2.5, kPalette[p.color_group % kPaletteSize]);
  }
  c.legend(spec.group_labels);
  return c.finish();
}

std::string bars(const BarSpec& spec) {
  Canvas c(spec.title, spec.x_label, spec.y_label);
  double vmax = 0;
  for (double v : spec.values) vmax = std::max(vmax, v);
  if (vmax <= 0) vmax = 1;
  c.axis_ticks(0, static_cast<double>(spec.values.size()), 0, vmax);
  const std::size_t n = spec.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    double fw = 1.0 / static_cast<double>(n);
    double fx = (static_cast<double>(i) + 0.15) * fw;
    double fh = spec.values[i] / vmax;
    double x = Canvas::px(fx);
    double w = 0.7 * fw * Canvas::plot_w();
    double y = Canvas::py(fh);
    c.rect(x, y, w, Canvas::py(0) - y, kPalette[0]);
    c.text(x + w / 2, Canvas::py(0) + 16, spec.labels[i], 10, "middle");
  }
  return c.finish();
}

std::string boxplot(const BoxPlotSpec& spec) {
  Canvas c(spec.title, spec.x_label, spec.y_label);
  const double yr = spec.y_max - spec.y_min;
  auto fy = [&](double v) { return yr > 0 ? std::clamp((v - spec.y_min) / yr, 0.0, 1.0) : 0.5; };
  c.axis_ticks(0, static_cast<double>(spec.boxes.size()), spec.y_min, spec.y_max);
  const std::size_t n = spec.boxes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = spec.boxes[i];
    double fw = 1.0 / static_cast<double>(n);
    double cx = Canvas::px((static_cast<double>(i) + 0.5) * fw);
    double half = 0.25 * fw * Canvas::plot_w();
    if (b.count > 0) {
      c.line(cx, Canvas::py(fy(b.min)), cx, Canvas::py(fy(b.max)), "#000000", 1);
      double top = Canvas::py(fy(b.q3));
      double bot = Canvas::py(fy(b.q1));
      c.rect(cx - half, top, 2 * half, bot - top, "#92c5de");
      c.line(cx - half, Canvas::py(fy(b.median)), cx + half, Canvas::py(fy(b.median)), "#b2182b",
             2);
    }
    c.text(cx, Canvas::py(0) + 16, b.label + " (n=" + std::to_string(b.count) + ")", 10, "middle");
  }
  return c.finish();
}

}  // namespace mladi::svg
