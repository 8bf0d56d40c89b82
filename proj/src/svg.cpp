#include "regen/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace regen::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

struct Frame {
  double x0, x1, y0, y1;
  bool log_x;

  double px(double x) const {
    const double u = log_x ? (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0))
                           : (x - x0) / (x1 - x0);
    return kLeft + u * (kWidth - kLeft - kRight);
  }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void pad(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double d = std::max(1.0, std::abs(lo)) * 0.5;
    lo -= d;
    hi += d;
    return;
  }
  const double d = 0.05 * (hi - lo);
  lo -= d;
  hi += d;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const Axes& a) {
  const double xl = kLeft, xr = kWidth - kRight, yt = kTop, yb = kHeight - kBottom;
  os << "<rect x=\"" << fmt(xl) << "\" y=\"" << fmt(yt) << "\" width=\"" << fmt(xr - xl) << "\" height=\""
     << fmt(yb - yt) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double y = f.py(yv);
    os << "<line x1=\"" << fmt(xl - 4) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(xl) << "\" y2=\"" << fmt(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(xl - 6) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">" << tick_label(yv)
       << "</text>\n";
    double xv;
    if (f.log_x) {
      xv = std::pow(10.0, std::log10(f.x0) + (std::log10(f.x1) - std::log10(f.x0)) * i / 4.0);
    } else {
      xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    }
    const double x = f.px(xv);
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(yb) << "\" x2=\"" << fmt(x) << "\" y2=\"" << fmt(yb + 4)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(yb + 18) << "\" text-anchor=\"middle\">" << tick_label(xv)
       << "</text>\n";
  }
  os << "<text x=\"" << fmt((xl + xr) / 2) << "\" y=\"" << fmt(kHeight - 18) << "\" text-anchor=\"middle\">"
     << escape(a.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << fmt((yt + yb) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << fmt((yt + yb) / 2) << ")\">" << escape(a.y_label) << "</text>\n";
}

void legend_entry(std::ostringstream& os, int idx, const std::string& label, const char* color, bool dashed) {
  const double x = kWidth - kRight + 12;
  const double y = kTop + 14 + 18 * idx;
  os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 22) << "\" y2=\"" << fmt(y)
     << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"5,3\"" : "")
     << "/>\n";
  os << "<text x=\"" << fmt(x + 28) << "\" y=\"" << fmt(y + 4) << "\">" << escape(label) << "</text>\n";
}

}  // namespace

std::string line_plot(const Axes& a, const std::vector<Series>& series, const std::optional<Band>& band) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (a.log_x && s.x[i] <= 0.0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (band) {
    y0 = std::min(y0, band->lo);
    y1 = std::max(y1, band->hi);
  }
  if (!std::isfinite(x0)) {
    x0 = a.log_x ? 1.0 : 0.0;
    x1 = a.log_x ? 10.0 : 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (!(x1 > x0)) x1 = a.log_x ? x0 * 10.0 : x0 + 1.0;
  pad(y0, y1);
  const Frame f{x0, x1, y0, y1, a.log_x};

  std::ostringstream os;
  header(os, a.title);
  int legend = 0;
  if (band) {
    const double top = f.py(band->hi), bot = f.py(band->lo);
    os << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(kWidth - kLeft - kRight)
       << "\" height=\"" << fmt(std::max(bot - top, 0.5)) << "\" fill=\"#bbbbbb\" fill-opacity=\"0.45\"/>\n";
    legend_entry(os, legend++, band->label, "#bbbbbb", false);
  }
  axes(os, f, a);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\""
       << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (a.log_x && s.x[i] <= 0.0)) continue;
      os << fmt(f.px(s.x[i])) << "," << fmt(f.py(s.y[i])) << " ";
    }
    os << "\"/>\n";
    legend_entry(os, legend++, s.label, color, s.dashed);
  }
  os << "</svg>\n";
  return os.str();
}

std::string histogram(const Axes& a, const std::vector<double>& samples, int bins,
                      const std::function<double(double)>& overlay) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : samples) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) {
    lo = -1.0;
    hi = 1.0;
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  bins = std::max(bins, 1);
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
  const double width = (hi - lo) / bins;
  std::size_t n = 0;
  for (double v : samples) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= count.size()) b = count.size() - 1;
    count[b] += 1.0;
    ++n;
  }
  double ymax = 0.0;
  for (auto& c : count) {
    c /= std::max<double>(1.0, static_cast<double>(n)) * width;
    ymax = std::max(ymax, c);
  }
  std::vector<double> ox, oy;
  if (overlay) {
    for (int i = 0; i <= 200; ++i) {
      const double x = lo + (hi - lo) * i / 200.0;
      ox.push_back(x);
      oy.push_back(overlay(x));
      ymax = std::max(ymax, oy.back());
    }
  }
  const Frame f{lo, hi, 0.0, ymax > 0.0 ? ymax * 1.05 : 1.0, false};
  std::ostringstream os;
  header(os, a.title);
  for (std::size_t b = 0; b < count.size(); ++b) {
    const double x = f.px(lo + width * static_cast<double>(b));
    const double w = f.px(lo + width * static_cast<double>(b + 1)) - x;
    const double y = f.py(count[b]);
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w) << "\" height=\""
       << fmt(f.py(0.0) - y) << "\" fill=\"#1f77b4\" fill-opacity=\"0.5\" stroke=\"#1f77b4\"/>\n";
  }
  axes(os, f, a);
  legend_entry(os, 0, "empirical", "#1f77b4", false);
  if (overlay) {
    os << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ox.size(); ++i) os << fmt(f.px(ox[i])) << "," << fmt(f.py(oy[i])) << " ";
    os << "\"/>\n";
    legend_entry(os, 1, "limit density", "#d62728", false);
  }
  os << "</svg>\n";
  return os.str();
}

std::string table(const std::string& title, const std::vector<std::string>& header_row,
                  const std::vector<std::vector<std::string>>& rows) {
  const double col_w = 120.0, row_h = 22.0;
  const double width = std::max(300.0, 20.0 + col_w * static_cast<double>(header_row.size()));
  const double height = 60.0 + row_h * static_cast<double>(rows.size() + 1);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"22\" font-size=\"15\">" << escape(title) << "</text>\n";
  auto row = [&](const std::vector<std::string>& cells, double y, bool bold) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      os << "<text x=\"" << fmt(10.0 + col_w * static_cast<double>(c)) << "\" y=\"" << fmt(y) << "\""
         << (bold ? " font-weight=\"bold\"" : "") << ">" << escape(cells[c]) << "</text>\n";
    }
  };
  row(header_row, 50.0, true);
  os << "<line x1=\"10\" y1=\"56\" x2=\"" << fmt(width - 10) << "\" y2=\"56\" stroke=\"black\"/>\n";
  for (std::size_t r = 0; r < rows.size(); ++r) row(rows[r], 50.0 + row_h * static_cast<double>(r + 1), false);
  os << "</svg>\n";
  return os.str();
}

}  // namespace regen::svg
