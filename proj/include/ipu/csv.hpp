#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipu/analysis.hpp"
#include "ipu/codes.hpp"

namespace ipu {

// Shortest decimal form that round-trips the value.
std::string num_cell(double v);

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& lines);

// index,value
void write_indexed_csv(const std::string& path, const std::vector<double>& values);

// bin_lo,bin_hi,count over [0, 1) split into counts.size() even bins.
void write_histogram_csv(const std::string& path, const std::vector<std::uint64_t>& counts);

// node,prob
void write_node_prob_csv(const std::string& path, const std::vector<double>& probs);

// x,y,dim,label
void write_grid_csv(const std::string& path, const LabelGrid& grid);

// node,start_col,end_col; one line per segment, nodes without segments omitted.
void write_probe_csv(const std::string& path, const ProbeResponse& response);

// anchor,d,count,rate with cumulative counts.
void write_occupancy_csv(const std::string& path, const std::vector<OccupancyCurve>& curves);

// Two-column curve with caller-supplied header.
void write_curve_csv(const std::string& path, const std::string& header,
                     const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace ipu
