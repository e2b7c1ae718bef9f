#include "ipu/csv.hpp"

#include <charconv>
#include <fstream>

#include "ipu/common.hpp"

namespace ipu {

std::string num_cell(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "num_cell: formatting failed");
  return std::string(buf, ptr);
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << header << '\n';
  for (const std::string& line : lines) out << line << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

void write_indexed_csv(const std::string& path, const std::vector<double>& values) {
  std::vector<std::string> lines;
  lines.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    lines.push_back(std::to_string(i) + "," + num_cell(values[i]));
  write_csv(path, "index,value", lines);
}

void write_histogram_csv(const std::string& path, const std::vector<std::uint64_t>& counts) {
  std::vector<std::string> lines;
  lines.reserve(counts.size());
  double width = 1.0 / static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    lines.push_back(num_cell(static_cast<double>(i) * width) + "," +
                    num_cell(static_cast<double>(i + 1) * width) + "," + std::to_string(counts[i]));
  write_csv(path, "bin_lo,bin_hi,count", lines);
}

void write_node_prob_csv(const std::string& path, const std::vector<double>& probs) {
  std::vector<std::string> lines;
  lines.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    lines.push_back(std::to_string(i) + "," + num_cell(probs[i]));
  write_csv(path, "node,prob", lines);
}

void write_grid_csv(const std::string& path, const LabelGrid& grid) {
  std::vector<std::string> lines;
  std::size_t cells = static_cast<std::size_t>(grid.resolution) * grid.resolution;
  lines.reserve(cells * static_cast<std::size_t>(grid.dims));
  for (int d = 0; d < grid.dims; ++d)
    for (int row = 0; row < grid.resolution; ++row)
      for (int col = 0; col < grid.resolution; ++col) {
        double denom = grid.resolution - 1;
        std::size_t idx = static_cast<std::size_t>(d) * cells +
                          static_cast<std::size_t>(row) * grid.resolution + col;
        lines.push_back(num_cell(col / denom) + "," + num_cell(row / denom) + "," +
                        std::to_string(d) + "," + std::to_string(grid.labels[idx]));
      }
  write_csv(path, "x,y,dim,label", lines);
}

void write_probe_csv(const std::string& path, const ProbeResponse& response) {
  std::vector<std::string> lines;
  for (std::size_t n = 0; n < response.nodes.size(); ++n)
    for (const ProbeSegment& seg : response.nodes[n].segments)
      lines.push_back(std::to_string(n) + "," + std::to_string(seg.start_col) + "," +
                      std::to_string(seg.end_col));
  write_csv(path, "node,start_col,end_col", lines);
}

void write_occupancy_csv(const std::string& path, const std::vector<OccupancyCurve>& curves) {
  std::vector<std::string> lines;
  for (const OccupancyCurve& c : curves)
    for (std::size_t d = 0; d < c.cumulative.size(); ++d)
      lines.push_back(std::to_string(c.anchor_index) + "," + std::to_string(d) + "," +
                      std::to_string(c.cumulative[d]) + "," + num_cell(c.rate[d]));
  write_csv(path, "anchor,d,count,rate", lines);
}

void write_curve_csv(const std::string& path, const std::string& header,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "write_curve_csv: column length mismatch");
  std::vector<std::string> lines;
  lines.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    lines.push_back(num_cell(xs[i]) + "," + num_cell(ys[i]));
  write_csv(path, header, lines);
}

}  // namespace ipu
