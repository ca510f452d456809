#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wrcp {

/// 9 significant digits (printf "%.9g"); infinities
/// print as "inf" / "-inf" and NaN as "nan".
std::string format_float(double v);

/// Header plus rows of pre-rendered cells, comma-separated, '\n' line ends.
class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& add_row(std::vector<std::string> cells);

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// Connect points with lines; otherwise scatter only.
  bool lines = true;
};

/// Standalone SVG with axes, ticks, one colored polyline/markers per series
/// and a legend. Byte-identical for identical input.
std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec);
void render_svg(const std::vector<Series>& series, const PlotSpec& spec, const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories; throws
/// std::runtime_error naming the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace wrcp
