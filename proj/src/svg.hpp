#pragma once

#include <string>
#include <vector>

namespace minhet::svg {

struct Series {
  std::string label;
  std::vector<double> y;
};

/// Static line plot of one or more series over a shared abscissa.
std::string line_plot(const std::vector<double>& x, const std::vector<Series>& series,
                      const std::string& title, const std::string& xlabel, const std::string& ylabel);

}  // namespace minhet::svg
