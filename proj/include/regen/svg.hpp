#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace regen::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

/// Horizontal band drawn behind the series, e.g. an estimate +- 3 se.
struct Band {
  double lo;
  double hi;
  std::string label;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
};

std::string line_plot(const Axes& axes, const std::vector<Series>& series,
                      const std::optional<Band>& band = std::nullopt);

/// Density-normalized histogram with an optional overlay density.
std::string histogram(const Axes& axes, const std::vector<double>& samples, int bins,
                      const std::function<double(double)>& overlay = {});

std::string table(const std::string& title, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows);

}  // namespace regen::svg
