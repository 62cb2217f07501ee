// Static SVG charts for analysis outputs: a scatter of a projection CSV,
// entropy against layer, and output-length bars.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "longsteer/binary_io.hpp"
#include "longsteer/error.hpp"

namespace longsteer::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kW = 640, kH = 480, kPad = 56;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Frame {
  double x0, x1, y0, y1;
  double sx(double x) const { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); }
  double sy(double y) const { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); }
};

Frame frame(double x0, double x1, double y0, double y1) {
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const double mx = 0.05 * (x1 - x0), my = 0.05 * (y1 - y0);
  return {x0 - mx, x1 + mx, y0 - my, y1 + my};
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

void open_svg(std::ostringstream& s, const std::string& title, const Frame& f,
              const std::string& xlabel, const std::string& ylabel) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n"
    << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad
    << "\" height=\"" << kH - 2 * kPad << "\" fill=\"none\" stroke=\"#444\"/>\n";
  s.precision(4);
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<text x=\"" << f.sx(xv) << "\" y=\"" << kH - kPad + 16
      << "\" text-anchor=\"middle\">" << xv << "</text>\n";
    s << "<text x=\"" << kPad - 6 << "\" y=\"" << f.sy(yv) + 4 << "\" text-anchor=\"end\">" << yv
      << "</text>\n";
  }
  s << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
    << escape(xlabel) << "</text>\n"
    << "<text x=\"14\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << kH / 2 << ")\">" << escape(ylabel) << "</text>\n";
}

void legend(std::ostringstream& s, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kPad + 14 + 16 * static_cast<double>(i);
    s << "<rect x=\"" << kW - kPad - 110 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[i % 6] << "\"/>\n<text x=\"" << kW - kPad - 95 << "\" y=\"" << y << "\">"
      << escape(names[i]) << "</text>\n";
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string scatter(const std::string& csv, const std::string& title) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  struct P { double x, y; std::string group; };
  std::vector<P> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 3) throw Error(Errc::kParseError, "projection row: " + line);
    pts.push_back({std::stod(f[0]), std::stod(f[1]), f[2]});
  }
  if (pts.empty()) throw Error(Errc::kEmptyInput, "projection has no points");
  double x0 = pts[0].x, x1 = x0, y0 = pts[0].y, y1 = y0;
  std::vector<std::string> groups;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x); x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y); y1 = std::max(y1, p.y);
    if (std::find(groups.begin(), groups.end(), p.group) == groups.end()) groups.push_back(p.group);
  }
  const auto f = frame(x0, x1, y0, y1);
  std::ostringstream s;
  open_svg(s, title, f, "component 1", "component 2");
  for (const auto& p : pts) {
    const auto g = std::find(groups.begin(), groups.end(), p.group) - groups.begin();
    s << "<circle cx=\"" << f.sx(p.x) << "\" cy=\"" << f.sy(p.y) << "\" r=\"3\" fill=\""
      << kPalette[g % 6] << "\" fill-opacity=\"0.7\"/>\n";
  }
  legend(s, groups);
  s << "</svg>\n";
  return s.str();
}

std::string entropy_lines(const nlohmann::json& reports, const std::string& title) {
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : reports) {
    series[r.at("group").get<std::string>()].emplace_back(r.at("layer").get<double>(),
                                                          r.at("entropy").get<double>());
  }
  if (series.empty()) throw Error(Errc::kEmptyInput, "entropy report is empty");
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (auto& [g, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (auto [x, y] : pts) {
      x0 = std::min(x0, x); x1 = std::max(x1, x);
      y0 = std::min(y0, y); y1 = std::max(y1, y);
    }
  }
  const auto f = frame(x0, x1, y0, y1);
  std::ostringstream s;
  open_svg(s, title, f, "layer", "matrix entropy (nats)");
  std::vector<std::string> names;
  for (const auto& [g, pts] : series) {
    const auto color = kPalette[names.size() % 6];
    s << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
    for (auto [x, y] : pts) s << f.sx(x) << ',' << f.sy(y) << ' ';
    s << "\"/>\n";
    names.push_back(g);
  }
  legend(s, names);
  s << "</svg>\n";
  return s.str();
}

std::string length_bars(const nlohmann::json& stats, const std::string& title) {
  if (stats.empty()) throw Error(Errc::kEmptyInput, "length report is empty");
  double top = 0.0;
  for (const auto& g : stats) top = std::max(top, g.at("mean").get<double>());
  const auto f = frame(0.0, static_cast<double>(stats.size()), 0.0, top);
  std::ostringstream s;
  open_svg(s, title, f, "method", "mean output tokens");
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double mean = stats[i].at("mean").get<double>();
    const double left = f.sx(static_cast<double>(i) + 0.2), right = f.sx(static_cast<double>(i) + 0.8);
    s << "<rect x=\"" << left << "\" y=\"" << f.sy(mean) << "\" width=\"" << right - left
      << "\" height=\"" << f.sy(0.0) - f.sy(mean) << "\" fill=\"" << kPalette[i % 6] << "\"/>\n"
      << "<text x=\"" << (left + right) / 2 << "\" y=\"" << f.sy(mean) - 4
      << "\" text-anchor=\"middle\">" << escape(stats[i].at("group").get<std::string>()) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

void cmd_plot(const fs::path& input, const fs::path& output, const std::string& title) {
  require_file(input, "plot input");
  if (output.empty()) throw Error(Errc::kConfigError, "no output path for plot");
  const auto text = bin::read_file(input);
  std::string svg;
  if (input.extension() == ".csv") {
    svg = scatter(text, title.empty() ? "2D projection" : title);
  } else {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array() || j.empty() || !j[0].is_object()) {
      throw Error(Errc::kParseError, input.string() + " is not an entropy or length report");
    }
    if (j[0].contains("entropy")) {
      svg = entropy_lines(j, title.empty() ? "Entropy by layer" : title);
    } else if (j[0].contains("mean")) {
      svg = length_bars(j, title.empty() ? "Output length" : title);
    } else {
      throw Error(Errc::kParseError, input.string() + " is not an entropy or length report");
    }
  }
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  bin::write_file(output, svg);
}

}  // namespace longsteer::cli
