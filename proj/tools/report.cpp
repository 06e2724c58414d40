#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "cli.hpp"
#include "dbvae/error.hpp"
#include "dbvae/trainer/matrix.hpp"

namespace dbvae::cli {
namespace fs = std::filesystem;

namespace {

constexpr double kSlot = 140.0;  // horizontal space per config
constexpr double kPlotHeight = 260.0;
constexpr double kLeft = 60.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kColors[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1"};

struct Series {
  std::string label;
  std::vector<double> values;
};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Gaussian kernel density with Silverman's bandwidth; a floor keeps
// single-value series visible as a thin lens.
std::vector<std::pair<double, double>> density(const std::vector<double>& v, double span) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean) / n;
  const double h = std::max(1.06 * std::sqrt(var) * std::pow(n, -0.2), 0.02 * span);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  constexpr int kPoints = 48;
  for (int k = 0; k <= kPoints; ++k) {
    const double y = *lo - 2 * h + (*hi - *lo + 4 * h) * k / kPoints;
    double d = 0.0;
    for (double x : v) d += std::exp(-0.5 * (y - x) * (y - x) / (h * h));
    out.emplace_back(y, d / (n * h * std::sqrt(2 * std::numbers::pi)));
  }
  return out;
}

std::string violin_svg(const std::string& title, const std::vector<Series>& series, double y_min, double y_max) {
  const double width = kLeft + kSlot * static_cast<double>(series.size()) + 20;
  const double height = kTop + kPlotHeight + kBottom;
  const auto y_px = [&](double y) {
    const double t = (std::clamp(y, y_min, y_max) - y_min) / (y_max - y_min);
    return kTop + kPlotHeight * (1.0 - t);
  };
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{:.1f}\" y=\"20\" font-size=\"14\">{}</text>\n",
      width, height, kLeft, esc(title));
  for (int t = 0; t <= 4; ++t) {
    const double y = y_min + (y_max - y_min) * t / 4;
    svg += fmt::format(
        "<line x1=\"{:.1f}\" x2=\"{:.1f}\" y1=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n",
        kLeft, width - 20, y_px(y), y_px(y), kLeft - 6, y_px(y) + 4, y);
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const double cx = kLeft + kSlot * (static_cast<double>(s) + 0.5);
    const char* color = kColors[s % std::size(kColors)];
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", cx,
                       kTop + kPlotHeight + 20, esc(ser.label));
    if (ser.values.empty()) continue;
    const auto dens = density(ser.values, y_max - y_min);
    double peak = 0.0;
    for (const auto& [y, d] : dens) peak = std::max(peak, d);
    std::string right, left;
    for (const auto& [y, d] : dens) {
      const double half = 0.4 * kSlot * d / peak;
      right += fmt::format("{:.2f},{:.2f} ", cx + half, y_px(y));
      left = fmt::format("{:.2f},{:.2f} ", cx - half, y_px(y)) + left;
    }
    svg += fmt::format("<polygon points=\"{}{}\" fill=\"{}\" fill-opacity=\"0.35\" stroke=\"{}\"/>\n", right, left,
                       color, color);
    double mean = 0.0;
    for (double v : ser.values) {
      mean += v / static_cast<double>(ser.values.size());
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"><title>{:.17g}</title></circle>\n",
                         cx, y_px(v), color, v);
    }
    svg += fmt::format(
        "<line x1=\"{:.1f}\" x2=\"{:.1f}\" y1=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\" stroke-width=\"2\">"
        "<title>mean {:.17g}</title></line>\n",
        cx - 0.15 * kSlot, cx + 0.15 * kSlot, y_px(mean), y_px(mean), mean);
  }
  return svg + "</svg>\n";
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

std::string file_stem(const std::string& metric) {
  std::string s = metric;
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

// Everything but the estimators is a score in [0, 1].
bool unit_bounded(const std::string& metric) {
  return !metric.starts_with("consistency.") && !metric.starts_with("restrictiveness.");
}

}  // namespace

std::vector<fs::path> write_report(const fs::path& in_dir, const fs::path& out_dir) {
  const auto cells = trainer::collect_cells(in_dir);
  if (cells.empty()) throw Error(ErrorKind::kInvalidArgument, "report: no result cells in " + in_dir.string());
  fs::create_directories(out_dir);
  std::vector<fs::path> written = {out_dir / trainer::kAggregateFile, out_dir / trainer::kMeansFile};
  trainer::write_aggregate_csv(cells, written[0]);
  trainer::write_means_csv(cells, written[1]);

  std::vector<std::string> configs;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;  // metric -> config -> values
  std::vector<std::string> metrics;
  for (const auto& cell : cells) {
    if (std::find(configs.begin(), configs.end(), cell.config) == configs.end()) configs.push_back(cell.config);
    if (!cell.succeeded()) continue;
    for (const auto& [name, v] : metrics::flatten(cell.report)) {
      if (!values.count(name)) metrics.push_back(name);
      values[name][cell.config].push_back(v);
    }
  }
  if (metrics.empty()) throw Error(ErrorKind::kDegenerate, "report: every cell failed");

  for (const auto& metric : metrics) {
    std::vector<Series> series;
    double hi = unit_bounded(metric) ? 1.0 : 0.0;
    for (const auto& c : configs) {
      series.push_back({c, values[metric][c]});
      for (double v : series.back().values) hi = std::max(hi, v);
    }
    const fs::path path = out_dir / ("violin_" + file_stem(metric) + ".svg");
    write_text(violin_svg(metric, series, 0.0, hi * (unit_bounded(metric) ? 1.0 : 1.05)), path);
    written.push_back(path);
  }

  // One series per (factor, config) so shifted-test accuracy reads side by side.
  std::vector<Series> downstream;
  for (const auto& metric : metrics) {
    if (!metric.starts_with("downstream_accuracy.")) continue;
    const std::string factor = metric.substr(std::string("downstream_accuracy.").size());
    for (const auto& c : configs) downstream.push_back({factor + " / " + c, values[metric][c]});
  }
  const fs::path path = out_dir / "downstream_accuracy.svg";
  write_text(violin_svg("downstream accuracy on the shifted test split", downstream, 0.0, 1.0), path);
  written.push_back(path);
  return written;
}

}  // namespace dbvae::cli
