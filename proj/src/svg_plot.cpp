#include "lautum/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lautum/errors.hpp"
#include "lautum/metrics.hpp"

namespace lautum {

namespace {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// "mode, lambda" per the summary's config echo; the file stem otherwise.
std::string series_label(const std::string& csv_path) {
  namespace fs = std::filesystem;
  fs::path summary(csv_path);
  summary.replace_extension(".summary");
  std::ifstream is(summary);
  if (is) {
    std::string line, mode, lambda;
    while (std::getline(is, line)) {
      if (line.rfind("mode = ", 0) == 0) mode = line.substr(7);
      if (line.rfind("lambda = ", 0) == 0) lambda = line.substr(9);
    }
    if (!mode.empty()) {
      if (mode == "lautum" && !lambda.empty()) {
        return mode + ", lambda=" + fmt(std::stod(lambda));
      }
      return mode;
    }
  }
  return fs::path(csv_path).stem().string();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void render_plot(const std::vector<std::string>& csv_paths,
                 const std::string& out_path) {
  if (csv_paths.empty()) throw ConfigError("plot needs at least one CSV");

  std::vector<Series> series;
  for (const std::string& path : csv_paths) {
    Series s;
    s.label = series_label(path);
    for (const MetricsRecord& r : read_metrics_csv(path)) {
      if (r.stage != "post") continue;
      s.x.push_back(static_cast<double>(r.epoch));
      s.y.push_back(r.target_test_acc);
    }
    if (s.x.empty()) {
      throw DataError(path + ": no post-transfer data to plot");
    }
    series.push_back(std::move(s));
  }

  double xmin = series[0].x.front(), xmax = xmin;
  double ymin = series[0].y.front(), ymax = ymin;
  for (const Series& s : series) {
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  // pad the accuracy axis a little and clamp to [0,1]
  const double ypad = std::max(0.02, 0.08 * (ymax - ymin));
  ymin = std::max(0.0, ymin - ypad);
  ymax = std::min(1.0, ymax + ypad);
  if (ymax == ymin) ymax = ymin + 0.01;

  const double width = 720, height = 480;
  const double ml = 70, mr = 200, mt = 30, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\""
      << ml + pw << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  // x ticks on integer epochs, at most 12
  const int xspan = static_cast<int>(std::lround(xmax - xmin));
  const int xstep = std::max(1, (xspan + 11) / 12);
  for (int e = static_cast<int>(std::lround(xmin));
       e <= static_cast<int>(std::lround(xmax)); e += xstep) {
    const double px = sx(e);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << mt + ph << "\" x2=\""
        << fmt(px) << "\" y2=\"" << mt + ph + 5
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(px) << "\" y=\"" << mt + ph + 20
        << "\" font-family=\"sans-serif\" font-size=\"12\" "
           "text-anchor=\"middle\">" << e << "</text>\n";
  }
  // y ticks: 6 evenly spaced
  for (int i = 0; i <= 5; ++i) {
    const double v = ymin + (ymax - ymin) * i / 5.0;
    const double py = sy(v);
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << fmt(py) << "\" x2=\"" << ml
        << "\" y2=\"" << fmt(py) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << ml - 9 << "\" y=\"" << fmt(py + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\" "
           "text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }

  // axis labels
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" font-family=\"sans-serif\" font-size=\"13\" "
         "text-anchor=\"middle\">post-transfer epoch</text>\n";
  svg << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" font-family=\"sans-serif\" font-size=\"13\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 18 " << mt + ph / 2
      << ")\">target test accuracy</text>\n";

  // series
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(*kPalette))];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i > 0) svg << " ";
      svg << fmt(sx(s.x[i])) << "," << fmt(sy(s.y[i]));
    }
    svg << "\"/>\n";
    // legend entry
    const double ly = mt + 14 + 20 * static_cast<double>(si);
    svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << fmt(ly - 4)
        << "\" x2=\"" << ml + pw + 34 << "\" y2=\"" << fmt(ly - 4)
        << "\" stroke=\"" << color << "\" stroke-width=\"1.8\"/>\n";
    svg << "<text x=\"" << ml + pw + 40 << "\" y=\"" << fmt(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw IoError("cannot open " + out_path + " for writing");
  os << svg.str();
  if (!os) throw IoError("plot write failed: " + out_path);
}

}  // namespace lautum
