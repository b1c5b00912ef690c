#pragma once

#include <string>
#include <vector>

namespace loren {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Optional per-point interval whiskers; empty or same length as y.
  std::vector<double> y_lo;
  std::vector<double> y_hi;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

// Self-contained SVG text; deterministic for identical input.
std::string render_line_chart(const ChartSpec& spec);

struct CrPlot {
  int cr_milli = 0;
  std::string svg;
};

// One log-y BLER chart per code rate found in the CSV (schema
// receiver,cr,ebno_db,blocks,errors,bler,ci_lo,ci_hi,seed).
std::vector<CrPlot> bler_plots_from_csv(const std::string& csv_text);

// Loss-vs-iteration chart from a training log CSV (iteration,cr,ebno_db,loss):
// raw per-iteration loss plus a running mean.
std::string loss_plot_from_csv(const std::string& csv_text);

}  // namespace loren
