#include "wrcp/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "wrcp/error.hpp"

namespace wrcp {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;
constexpr int kTicks = 5;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    case '\'': out += "&apos;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string coord(double v) { return fmt::format("{:.2f}", v); }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo <= 0.0) {
      double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }
};

} // namespace

std::string format_float(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  return fmt::format("{:.9g}", v);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) {
    throw DomainError("CsvTable: empty header");
  }
}

CsvTable& CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw DomainError("CsvTable: row has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) {
        out += ',';
      }
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) {
    line(r);
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text_file(path, str()); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << text;
  out.flush();
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec) {
  if (series.empty()) {
    throw DomainError("render_svg: no series");
  }
  Range xr;
  Range yr;
  for (const auto& s : series) {
    if (s.x.empty()) {
      throw DomainError("render_svg: series '" + s.label + "' is empty");
    }
    if (s.x.size() != s.y.size()) {
      throw DomainError("render_svg: series '" + s.label + "' has mismatched x and y lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.include(s.x[i]);
      yr.include(s.y[i]);
    }
  }
  xr.finish();
  yr.finish();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
                     kWidth, kHeight, kWidth, kHeight);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", kWidth, kHeight);
  out += fmt::format("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
                     coord(kLeft + pw / 2), escape_xml(spec.title));

  // axes
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000000\"/>\n", coord(kLeft),
                     coord(kTop + ph), coord(kLeft + pw));
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000000\"/>\n", coord(kLeft),
                     coord(kTop), coord(kTop + ph));
  for (int t = 0; t <= kTicks; ++t) {
    double fx = xr.lo + (xr.hi - xr.lo) * t / kTicks;
    double fy = yr.lo + (yr.hi - yr.lo) * t / kTicks;
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000000\"/>\n", coord(px(fx)),
                       coord(kTop + ph), coord(kTop + ph + 5));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" "
                       "text-anchor=\"middle\">{:.3g}</text>\n",
                       coord(px(fx)), coord(kTop + ph + 18), fx);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000000\"/>\n", coord(kLeft - 5),
                       coord(py(fy)), coord(kLeft));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" "
                       "text-anchor=\"end\">{:.3g}</text>\n",
                       coord(kLeft - 8), coord(py(fy) + 4), fy);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     coord(kLeft + pw / 2), coord(kHeight - 12), escape_xml(spec.x_label));
  out += fmt::format("<text x=\"16\" y=\"{0}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                     coord(kTop + ph / 2), escape_xml(spec.y_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        continue;
      }
      if (!points.empty()) {
        points += ' ';
      }
      points += coord(px(s.x[i])) + "," + coord(py(s.y[i]));
    }
    if (spec.lines && !points.empty()) {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, points);
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        continue;
      }
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"{}\"/>\n", coord(px(s.x[i])),
                         coord(py(s.y[i])), color);
    }
    double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    double lx = kLeft + pw + 15;
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", coord(lx),
                       coord(ly - 10), color);
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                       coord(lx + 18), coord(ly), escape_xml(s.label));
  }
  out += "</svg>\n";
  return out;
}

void render_svg(const std::vector<Series>& series, const PlotSpec& spec, const std::filesystem::path& path) {
  write_text_file(path, render_svg(series, spec));
}

} // namespace wrcp
