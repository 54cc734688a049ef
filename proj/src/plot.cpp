#include "ncdoa/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "ncdoa/format.hpp"

namespace ncdoa {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 20.0;
constexpr double kBottom = 50.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b"};

struct Axes {
  double x0, x1, y0, y1;

  double px(double x) const {
    return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

std::string num(double v) {
  // Pixel coordinates; two decimals are plenty.
  return format_double(std::round(v * 100.0) / 100.0);
}

void open_svg(std::ostream& out) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void frame(std::ostream& out, const Axes& ax, const std::string& xlabel,
           const std::string& ylabel, const std::vector<double>& xticks,
           const std::vector<std::pair<double, std::string>>& yticks) {
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
      << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xticks) {
    out << "<line x1=\"" << num(ax.px(t)) << "\" y1=\"" << kHeight - kBottom
        << "\" x2=\"" << num(ax.px(t)) << "\" y2=\"" << kHeight - kBottom + 5
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(ax.px(t)) << "\" y=\"" << kHeight - kBottom + 18
        << "\" text-anchor=\"middle\">" << format_double(t) << "</text>\n";
  }
  for (const auto& [v, label] : yticks) {
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(ax.py(v)) << "\" x2=\""
        << kLeft << "\" y2=\"" << num(ax.py(v)) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(ax.py(v) + 4)
        << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">" << xlabel << "</text>\n"
      << "<text transform=\"translate(16," << (kTop + kHeight - kBottom) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
}

void polyline(std::ostream& out, const Axes& ax, const std::vector<double>& xs,
              const std::vector<double>& ys, const char* color) {
  out << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(ys[i])) continue;
    out << num(ax.px(xs[i])) << "," << num(ax.py(ys[i])) << " ";
  }
  out << "\"/>\n";
}

void legend(std::ostream& out, std::size_t slot, const std::string& label,
            const char* color) {
  const double x = kWidth - kRight + 15;
  const double y = kTop + 15 + 20 * static_cast<double>(slot);
  out << "<line x1=\"" << x << "\" y1=\"" << y - 4 << "\" x2=\"" << x + 25
      << "\" y2=\"" << y - 4 << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << x + 32 << "\" y=\"" << y << "\">" << label << "</text>\n";
}

}  // namespace

void write_rmse_svg(std::ostream& out, const RmseReport& report) {
  std::vector<Method> methods;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& c : report.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
      methods.push_back(c.method);
    }
    xmin = std::min(xmin, c.snr_db);
    xmax = std::max(xmax, c.snr_db);
    if (c.rmse > 0.0 && std::isfinite(c.rmse)) {
      ymin = std::min(ymin, std::log10(c.rmse));
      ymax = std::max(ymax, std::log10(c.rmse));
    }
  }
  if (!std::isfinite(ymin)) ymin = ymax = 0.0;
  if (xmax <= xmin) xmax = xmin + 1.0;
  Axes ax{xmin, xmax, std::floor(ymin), std::max(std::ceil(ymax), std::floor(ymin) + 1.0)};

  open_svg(out);
  std::vector<double> xticks;
  for (const auto& c : report.cells) {
    if (c.method == methods.front()) xticks.push_back(c.snr_db);
  }
  std::vector<std::pair<double, std::string>> yticks;
  for (double e = ax.y0; e <= ax.y1; e += 1.0) {
    yticks.emplace_back(e, format_double(std::pow(10.0, e)));
  }
  frame(out, ax, "SNR [dB]", "RMSE [deg]", xticks, yticks);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<double> xs, ys;
    for (const auto& c : report.cells) {
      if (c.method != methods[m]) continue;
      xs.push_back(c.snr_db);
      ys.push_back(c.rmse > 0.0 ? std::log10(c.rmse) : ax.y0);
    }
    const char* color = kColors[m % std::size(kColors)];
    polyline(out, ax, xs, ys, color);
    legend(out, m, std::string(to_string(methods[m])), color);
  }
  out << "</svg>\n";
}

void write_spectra_svg(std::ostream& out,
                       const std::vector<SpectrumEstimate>& spectra,
                       const std::vector<double>& true_doas) {
  constexpr double kFloorDb = -60.0;
  double xmin = -90.0, xmax = 90.0;
  if (!spectra.empty() && !spectra.front().grid_degrees.empty()) {
    xmin = spectra.front().grid_degrees.front();
    xmax = spectra.front().grid_degrees.back();
  }
  Axes ax{xmin, xmax, kFloorDb, 0.0};
  open_svg(out);
  std::vector<double> xticks;
  const double step = (xmax - xmin) > 60.0 ? 30.0 : 10.0;
  for (double t = std::ceil(xmin / step) * step; t <= xmax; t += step) {
    xticks.push_back(t);
  }
  std::vector<std::pair<double, std::string>> yticks;
  for (double v = kFloorDb; v <= 0.0; v += 10.0) {
    yticks.emplace_back(v, format_double(v));
  }
  frame(out, ax, "angle [deg]", "normalised magnitude [dB]", xticks, yticks);
  for (double doa : true_doas) {
    out << "<line x1=\"" << num(ax.px(doa)) << "\" y1=\"" << kTop << "\" x2=\""
        << num(ax.px(doa)) << "\" y2=\"" << kHeight - kBottom
        << "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n";
  }
  for (std::size_t m = 0; m < spectra.size(); ++m) {
    const auto& s = spectra[m];
    const double peak = s.magnitudes.empty()
                            ? 0.0
                            : *std::max_element(s.magnitudes.begin(), s.magnitudes.end());
    std::vector<double> ys;
    for (double v : s.magnitudes) {
      ys.push_back(peak > 0.0 && v > 0.0
                       ? std::max(kFloorDb, 20.0 * std::log10(v / peak))
                       : kFloorDb);
    }
    const char* color = kColors[m % std::size(kColors)];
    polyline(out, ax, s.grid_degrees, ys, color);
    legend(out, m, std::string(to_string(s.method)), color);
  }
  out << "</svg>\n";
}

}  // namespace ncdoa
