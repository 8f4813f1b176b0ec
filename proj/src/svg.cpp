#include "pqla/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "pqla/stats.hpp"

namespace pqla {

namespace {

constexpr double kWidth = 480, kHeight = 360, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

struct Frame {
  double x0, x1, y0, y1;
  double sx(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double sy(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

std::string escape(const std::string& s) {
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

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

void open(std::ostringstream& out, const std::string& title, const Frame& f, const std::string& xl, const std::string& yl) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
      << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = f.x0 + (f.x1 - f.x0) * k / 4.0, y = f.y0 + (f.y1 - f.y0) * k / 4.0;
    out << "<text x=\"" << f.sx(x) << "\" y=\"" << kHeight - kBottom + 15 << "\" text-anchor=\"middle\">" << num(x)
        << "</text>\n";
    out << "<text x=\"" << kLeft - 5 << "\" y=\"" << f.sy(y) + 4 << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xl)
      << "</text>\n";
  out << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kHeight / 2
      << ")\">" << escape(yl) << "</text>\n";
}

std::vector<double> finite_values(std::span<const double> v) {
  std::vector<double> out;
  for (double x : v) {
    if (std::isfinite(x)) out.push_back(x);
  }
  if (out.size() < 2) throw std::invalid_argument("svg: need at least 2 finite values");
  return out;
}

}  // namespace

std::string svg_histogram(std::span<const double> values, std::size_t bins, const std::string& title) {
  if (bins < 1) throw std::invalid_argument("svg histogram: bins must be >= 1");
  const std::vector<double> v = finite_values(values);
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = std::min(*mn, -3.5), hi = std::max(*mx, 3.5);
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> dens(bins, 0.0);
  for (double x : v) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    dens[b] += 1.0 / (static_cast<double>(v.size()) * width);
  }
  const double top = std::max(*std::max_element(dens.begin(), dens.end()), 0.4) * 1.1;
  const Frame f{lo, hi, 0.0, top};
  std::ostringstream out;
  open(out, title, f, "value", "density");
  for (std::size_t b = 0; b < bins; ++b) {
    const double x = lo + width * static_cast<double>(b);
    out << "<rect x=\"" << f.sx(x) << "\" y=\"" << f.sy(dens[b]) << "\" width=\"" << f.sx(x + width) - f.sx(x)
        << "\" height=\"" << f.sy(0) - f.sy(dens[b]) << "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
  for (int k = 0; k <= 200; ++k) {
    const double x = lo + (hi - lo) * k / 200.0;
    out << f.sx(x) << ',' << f.sy(std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI)) << ' ';
  }
  out << "\"/>\n</svg>\n";
  return out.str();
}

std::string svg_qq_plot(std::span<const double> values, const std::string& title) {
  std::vector<double> v = finite_values(values);
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  std::vector<double> q(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) q[i] = normal_quantile((static_cast<double>(i) + 0.5) / n);
  const double lim = std::max({std::abs(v.front()), std::abs(v.back()), std::abs(q.front()), std::abs(q.back())}) * 1.05;
  const Frame f{-lim, lim, -lim, lim};
  std::ostringstream out;
  open(out, title, f, "N(0,1) quantile", "sample quantile");
  out << "<line x1=\"" << f.sx(-lim) << "\" y1=\"" << f.sy(-lim) << "\" x2=\"" << f.sx(lim) << "\" y2=\"" << f.sy(lim)
      << "\" stroke=\"#d62728\"/>\n";
  for (std::size_t i = 0; i < v.size(); ++i) {
    out << "<circle cx=\"" << f.sx(q[i]) << "\" cy=\"" << f.sy(v[i]) << "\" r=\"1.8\" fill=\"#3182bd\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_loglog(std::span<const double> x, std::span<const double> y, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  if (x.size() != y.size()) throw std::invalid_argument("svg log-log: x and y differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log10(x[i]));
      ly.push_back(std::log10(y[i]));
    }
  }
  if (lx.empty()) throw std::invalid_argument("svg log-log: no positive points");
  const auto [xa, xb] = std::minmax_element(lx.begin(), lx.end());
  const auto [ya, yb] = std::minmax_element(ly.begin(), ly.end());
  const Frame f{*xa - 0.1, *xb + 0.1, *ya - 0.2, *yb + 0.2};
  std::ostringstream out;
  open(out, title, f, "log10 " + x_label, "log10 " + y_label);
  out << "<polyline fill=\"none\" stroke=\"#3182bd\" points=\"";
  for (std::size_t i = 0; i < lx.size(); ++i) out << f.sx(lx[i]) << ',' << f.sy(ly[i]) << ' ';
  out << "\"/>\n";
  for (std::size_t i = 0; i < lx.size(); ++i) {
    out << "<circle cx=\"" << f.sx(lx[i]) << "\" cy=\"" << f.sy(ly[i]) << "\" r=\"3\" fill=\"#3182bd\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace pqla
