#include "privet/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "privet/error.hpp"

namespace privet {

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0, hi = 1;
  double px0 = 0, px1 = 1;

  bool valid(double v) const { return std::isfinite(v) && (!log || v > 0); }
  double t(double v) const { return log ? std::log10(v) : v; }
  double map(double v) const { return px0 + (t(v) - lo) / (hi - lo) * (px1 - px0); }
};

void fit_axis(Axis& ax, const std::vector<double>& vals,
              const std::optional<std::pair<double, double>>& range) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  if (range) {
    lo = ax.t(range->first);
    hi = ax.t(range->second);
  } else {
    for (double v : vals)
      if (ax.valid(v)) {
        lo = std::min(lo, ax.t(v));
        hi = std::max(hi, ax.t(v));
      }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi <= lo) hi = lo + 1;
  ax.lo = lo;
  ax.hi = hi;
}

std::string heat_color(double t) {
  // white-to-blue ramp through a light yellow
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(255 * (1.0 - 0.85 * t));
  const int g = static_cast<int>(255 * (1.0 - 0.6 * t));
  const int b = static_cast<int>(200 + 55 * t);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series,
                             const std::vector<PlotBand>& bands) {
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  Axis ax{spec.log_x}, ay{spec.log_y};
  ax.px0 = ml;
  ax.px1 = spec.width - mr;
  ay.px0 = spec.height - mb;
  ay.px1 = mt;
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  for (const auto& b : bands) {
    xs.insert(xs.end(), b.x.begin(), b.x.end());
    ys.insert(ys.end(), b.lower.begin(), b.lower.end());
    ys.insert(ys.end(), b.upper.begin(), b.upper.end());
  }
  fit_axis(ax, xs, spec.x_range);
  fit_axis(ay, ys, spec.y_range);

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
     << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" fill=\"white\"/>\n"
     << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(spec.title) << "</text>\n";

  // frame and ticks
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << fixed(ax.px0) << "\" y1=\"" << fixed(ay.px0) << "\" x2=\""
     << fixed(ax.px1) << "\" y2=\"" << fixed(ay.px0) << "\"/>\n";
  os << "<line x1=\"" << fixed(ax.px0) << "\" y1=\"" << fixed(ay.px0) << "\" x2=\""
     << fixed(ax.px0) << "\" y2=\"" << fixed(ay.px1) << "\"/>\n";
  os << "</g>\n<g font-size=\"11\" text-anchor=\"middle\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double tx = ax.lo + (ax.hi - ax.lo) * k / 5.0;
    const double px = ax.px0 + (ax.px1 - ax.px0) * k / 5.0;
    os << "<line x1=\"" << fixed(px) << "\" y1=\"" << fixed(ay.px0) << "\" x2=\"" << fixed(px)
       << "\" y2=\"" << fixed(ay.px0 + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(px) << "\" y=\"" << fixed(ay.px0 + 18) << "\">"
       << (spec.log_x ? "1e" + fixed(tx, 1) : fixed(tx, 3)) << "</text>\n";
    const double ty = ay.lo + (ay.hi - ay.lo) * k / 5.0;
    const double py = ay.px0 + (ay.px1 - ay.px0) * k / 5.0;
    os << "<line x1=\"" << fixed(ax.px0 - 5) << "\" y1=\"" << fixed(py) << "\" x2=\""
       << fixed(ax.px0) << "\" y2=\"" << fixed(py) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(ax.px0 - 8) << "\" y=\"" << fixed(py + 4)
       << "\" text-anchor=\"end\">" << (spec.log_y ? "1e" + fixed(ty, 1) : fixed(ty, 3))
       << "</text>\n";
  }
  os << "<text x=\"" << fixed((ax.px0 + ax.px1) / 2) << "\" y=\"" << spec.height - 12 << "\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fixed((ay.px0 + ay.px1) / 2) << "\" transform=\"rotate(-90 16 "
     << fixed((ay.px0 + ay.px1) / 2) << ")\">" << escape(spec.y_label) << "</text>\n</g>\n";

  for (const auto& b : bands) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < b.x.size(); ++i)
      if (ax.valid(b.x[i]) && ay.valid(b.upper[i]))
        pts << fixed(ax.map(b.x[i])) << ',' << fixed(ay.map(b.upper[i])) << ' ';
    for (std::size_t i = b.x.size(); i-- > 0;)
      if (ax.valid(b.x[i]) && ay.valid(b.lower[i]))
        pts << fixed(ax.map(b.x[i])) << ',' << fixed(ay.map(b.lower[i])) << ' ';
    os << "<polygon fill=\"" << b.color << "\" fill-opacity=\"" << fixed(b.opacity)
       << "\" stroke=\"none\" points=\"" << pts.str() << "\"><title>" << escape(b.label)
       << "</title></polygon>\n";
  }
  for (const auto& s : series) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (ax.valid(s.x[i]) && ay.valid(s.y[i]))
        pts << fixed(ax.map(s.x[i])) << ',' << fixed(ay.map(s.y[i])) << ' ';
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << pts.str()
       << "\"><title>" << escape(s.label) << "</title></polyline>\n";
  }
  // legend
  os << "<g font-size=\"11\">\n";
  double ly = mt + 10;
  for (const auto& s : series) {
    os << "<rect x=\"" << fixed(ax.px1 - 150) << "\" y=\"" << fixed(ly - 8) << "\" width=\"12\" "
       << "height=\"3\" fill=\"" << s.color << "\"/>\n"
       << "<text x=\"" << fixed(ax.px1 - 132) << "\" y=\"" << fixed(ly - 2) << "\">"
       << escape(s.label) << "</text>\n";
    ly += 15;
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<double>& cols, const std::vector<double>& rows,
                       const std::vector<std::optional<double>>& values,
                       const std::string& col_label, const std::string& row_label) {
  const double cell = 48, ml = 80, mt = 40;
  const double w = ml + cell * static_cast<double>(cols.size()) + 20;
  const double h = mt + cell * static_cast<double>(rows.size()) + 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& v : values)
    if (v && std::isfinite(*v)) {
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  if (!(hi > lo)) hi = lo + 1;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(w, 0) << "\" height=\""
     << fixed(h, 0) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << fixed(w / 2, 0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n<g font-size=\"10\" text-anchor=\"middle\">\n";
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::size_t k = r * cols.size() + c;
      const double val = k < values.size() && values[k] ? *values[k] : std::nan("");
      // first row at the bottom
      const double x = ml + cell * static_cast<double>(c);
      const double y = mt + cell * static_cast<double>(rows.size() - 1 - r);
      const bool ok = std::isfinite(val);
      os << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(cell)
         << "\" height=\"" << fixed(cell) << "\" stroke=\"#999\" fill=\""
         << (ok ? heat_color((val - lo) / (hi - lo)) : "#ffffff") << "\"/>\n";
      os << "<text x=\"" << fixed(x + cell / 2) << "\" y=\"" << fixed(y + cell / 2 + 4) << "\">"
         << (ok ? fixed(val, std::abs(val) >= 10 ? 0 : 2) : "nan") << "</text>\n";
    }
  for (std::size_t c = 0; c < cols.size(); ++c)
    os << "<text x=\"" << fixed(ml + cell * (static_cast<double>(c) + 0.5)) << "\" y=\""
       << fixed(mt + cell * static_cast<double>(rows.size()) + 15) << "\">"
       << format_double(cols[c]) << "</text>\n";
  for (std::size_t r = 0; r < rows.size(); ++r)
    os << "<text x=\"" << fixed(ml - 25) << "\" y=\""
       << fixed(mt + cell * (static_cast<double>(rows.size() - 1 - r) + 0.5) + 4) << "\">"
       << format_double(rows[r]) << "</text>\n";
  os << "<text x=\"" << fixed(ml + cell * static_cast<double>(cols.size()) / 2) << "\" y=\""
     << fixed(h - 10) << "\">" << escape(col_label) << "</text>\n"
     << "<text x=\"14\" y=\"" << fixed(mt + cell * static_cast<double>(rows.size()) / 2)
     << "\">" << escape(row_label) << "</text>\n</g>\n</svg>\n";
  write_text_file(path, os.str());
}

}  // namespace privet
