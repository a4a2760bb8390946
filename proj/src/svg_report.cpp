#include "nlmemboot/svg_report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "nlmemboot/io.hpp"

namespace nlmemboot {

namespace {

const char* kPalette[] = {"#1b6ca8", "#d1495b", "#3f8f4a",
                          "#8f5fb8", "#d88a2a", "#4f4f4f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string coverage_svg(const CoverageReport& report, double alpha) {
  const double width = 900.0, height = 520.0;
  const double left = 70.0, right = 40.0, top = 50.0, bottom = 80.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double y_min = 0.0, y_max = 1.05;

  std::vector<std::string> methods;
  for (const auto& r : report.coverage)
    if (r.alpha == alpha &&
        std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  const auto& params = report.parameter_names;

  auto x_pos = [&](int param_idx, int method_idx) {
    const double slot = plot_w / static_cast<double>(params.size());
    const double center = left + slot * (param_idx + 0.5);
    const double jitter =
        (method_idx - (static_cast<int>(methods.size()) - 1) / 2.0) *
        std::min(10.0, slot / (2.0 * std::max<std::size_t>(methods.size(), 1)));
    return center + jitter;
  };
  auto y_pos = [&](double v) {
    return top + plot_h * (1.0 - (v - y_min) / (y_max - y_min));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << report.scenario_name
      << ": coverage of " << format_g6((1.0 - alpha) * 100.0)
      << "% CI</text>\n";

  // Axes.
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
      << left + plot_w << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  for (double tick = 0.0; tick <= 1.0001; tick += 0.25) {
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y_pos(tick) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << num(tick) << "</text>\n";
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << y_pos(tick) << "\" x2=\""
        << left << "\" y2=\"" << y_pos(tick) << "\" stroke=\"black\"/>\n";
  }

  // Dashed nominal band around 1 - alpha.
  for (const double band : {1.0 - alpha - 0.05, 1.0 - alpha + 0.05}) {
    svg << "<line data-band=\"" << format_g6(band) << "\" x1=\"" << left
        << "\" y1=\"" << y_pos(band) << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << y_pos(band)
        << "\" stroke=\"#555\" stroke-dasharray=\"6,4\"/>\n";
  }

  // Parameter labels.
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double slot = plot_w / static_cast<double>(params.size());
    svg << "<text x=\"" << left + slot * (p + 0.5) << "\" y=\""
        << top + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\" transform=\"rotate(0)\">"
        << params[p] << "</text>\n";
  }

  // One series per method.
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const char* color = kPalette[m % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<g data-method=\"" << methods[m] << "\" fill=\"" << color
        << "\" stroke=\"" << color << "\">\n";
    for (const auto& row : report.coverage) {
      if (row.alpha != alpha || row.method != methods[m]) continue;
      const auto it = std::find(params.begin(), params.end(), row.parameter);
      if (it == params.end() || !std::isfinite(row.coverage)) continue;
      const int p = static_cast<int>(it - params.begin());
      const double x = x_pos(p, static_cast<int>(m));
      const double y = y_pos(row.coverage);
      const double y_lo = y_pos(std::max(y_min, row.coverage - row.mc_se));
      const double y_hi = y_pos(std::min(y_max, row.coverage + row.mc_se));
      svg << "  <line x1=\"" << x << "\" y1=\"" << y_lo << "\" x2=\"" << x
          << "\" y2=\"" << y_hi << "\"/>\n";
      svg << "  <circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3.2\"/>\n";
    }
    svg << "</g>\n";
    // Legend entry.
    const double lx = left + 14 + 130.0 * static_cast<double>(m);
    svg << "<circle cx=\"" << lx << "\" cy=\"" << height - 30 << "\" r=\"4\" fill=\""
        << color << "\"/>\n";
    svg << "<text x=\"" << lx + 8 << "\" y=\"" << height - 26
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << methods[m]
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace nlmemboot
