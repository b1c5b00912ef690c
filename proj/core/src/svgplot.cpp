#include "loren/svgplot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "loren/coderate.hpp"
#include "loren/errors.hpp"
#include "loren/evaluation.hpp"
#include "loren/util.hpp"

namespace loren {

namespace {

constexpr double kW = 760, kH = 480;
constexpr double kLeft = 64, kRight = 170, kTop = 36, kBottom = 52;
constexpr double kX0 = kLeft, kX1 = kW - kRight;
constexpr double kY0 = kTop, kY1 = kH - kBottom;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string px(double v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string tick_label(double v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 5);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

struct Axis {
  double lo = 0, hi = 1;  // data space; exponents when logarithmic
  bool log = false;

  double to_px_x(double v) const {
    return kX0 + (v - lo) / (hi - lo) * (kX1 - kX0);
  }
  double to_px_y(double v) const {
    double t = log ? std::log10(std::max(v, std::pow(10.0, lo))) : v;
    t = std::clamp(t, lo, hi);
    return kY1 - (t - lo) / (hi - lo) * (kY1 - kY0);
  }
};

void text_at(std::string* out, double x, double y, const std::string& s,
             const std::string& anchor, int size, const char* extra = "") {
  *out += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-size=\"" +
          std::to_string(size) + "\" text-anchor=\"" + anchor + "\"" + extra + ">" +
          escape(s) + "</text>\n";
}

void line(std::string* out, double x1, double y1, double x2, double y2,
          const std::string& stroke, const std::string& width) {
  *out += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) +
          "\" y2=\"" + px(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + width +
          "\"/>\n";
}

}  // namespace

std::string render_line_chart(const ChartSpec& spec) {
  if (spec.series.empty()) throw ConfigError("render_line_chart: no series");

  // x range over every point.
  double xmin = 0, xmax = 0;
  bool have_x = false;
  for (const auto& s : spec.series)
    for (double v : s.x) {
      xmin = have_x ? std::min(xmin, v) : v;
      xmax = have_x ? std::max(xmax, v) : v;
      have_x = true;
    }
  if (!have_x) throw ConfigError("render_line_chart: series have no points");
  if (xmin == xmax) { xmin -= 1; xmax += 1; }

  Axis xa{xmin, xmax, false};
  Axis ya;
  if (spec.log_y) {
    double ymax = 0, ymin_pos = 0;
    bool have_pos = false;
    for (const auto& s : spec.series) {
      for (size_t i = 0; i < s.y.size(); ++i) {
        const double hi = s.y_hi.size() == s.y.size() ? std::max(s.y[i], s.y_hi[i]) : s.y[i];
        ymax = std::max(ymax, hi);
        for (double v : {s.y[i], s.y_lo.size() == s.y.size() ? s.y_lo[i] : s.y[i]})
          if (v > 0) {
            ymin_pos = have_pos ? std::min(ymin_pos, v) : v;
            have_pos = true;
          }
      }
    }
    // All-zero data still renders, on a token decade.
    double top_exp = have_pos ? std::ceil(std::log10(ymax)) : 0;
    double bot_exp = have_pos ? std::floor(std::log10(ymin_pos)) : -1;
    if (bot_exp >= top_exp) bot_exp = top_exp - 1;
    ya = Axis{bot_exp, top_exp, true};
  } else {
    double ymin = 0, ymax = 0;
    bool have = false;
    for (const auto& s : spec.series)
      for (double v : s.y) {
        ymin = have ? std::min(ymin, v) : v;
        ymax = have ? std::max(ymax, v) : v;
        have = true;
      }
    if (!have) throw ConfigError("render_line_chart: series have no points");
    if (ymin == ymax) { ymin -= 0.5; ymax += 0.5; }
    const double pad = 0.05 * (ymax - ymin);
    ya = Axis{ymin - pad, ymax + pad, false};
  }

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kW) + "\" height=\"" +
         px(kH) + "\" viewBox=\"0 0 " + px(kW) + " " + px(kH) +
         "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"" + px(kW) + "\" height=\"" + px(kH) + "\" fill=\"#ffffff\"/>\n";

  // y gridlines and labels.
  if (ya.log) {
    for (int e = static_cast<int>(ya.lo); e <= static_cast<int>(ya.hi); ++e) {
      const double y = ya.to_px_y(std::pow(10.0, e));
      line(&out, kX0, y, kX1, y, "#dddddd", "1");
      text_at(&out, kX0 - 8, y + 4, "1e" + std::to_string(e), "end", 11);
      if (e < static_cast<int>(ya.hi))
        for (int m = 2; m <= 9; ++m) {
          const double ym = ya.to_px_y(m * std::pow(10.0, e));
          line(&out, kX0, ym, kX1, ym, "#f2f2f2", "1");
        }
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double v = ya.lo + (ya.hi - ya.lo) * i / 5.0;
      const double y = ya.to_px_y(v);
      line(&out, kX0, y, kX1, y, "#dddddd", "1");
      text_at(&out, kX0 - 8, y + 4, tick_label(v), "end", 11);
    }
  }

  // x ticks: the distinct data positions when few, an even split otherwise.
  std::vector<double> xs;
  for (const auto& s : spec.series) xs.insert(xs.end(), s.x.begin(), s.x.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  if (xs.size() > 10) {
    xs.clear();
    for (int i = 0; i <= 5; ++i) xs.push_back(xmin + (xmax - xmin) * i / 5.0);
  }
  for (double v : xs) {
    const double x = xa.to_px_x(v);
    line(&out, x, kY0, x, kY1, "#eeeeee", "1");
    line(&out, x, kY1, x, kY1 + 4, "#333333", "1");
    text_at(&out, x, kY1 + 18, tick_label(v), "middle", 11);
  }

  out += "<rect x=\"" + px(kX0) + "\" y=\"" + px(kY0) + "\" width=\"" + px(kX1 - kX0) +
         "\" height=\"" + px(kY1 - kY0) + "\" fill=\"none\" stroke=\"#333333\"/>\n";

  text_at(&out, (kX0 + kX1) / 2, 22, spec.title, "middle", 14);
  text_at(&out, (kX0 + kX1) / 2, kH - 14, spec.x_label, "middle", 12);
  text_at(&out, 0, 0, spec.y_label, "middle", 12,
          (" transform=\"translate(16," + px((kY0 + kY1) / 2) + ") rotate(-90)\"").c_str());

  for (size_t si = 0; si < spec.series.size(); ++si) {
    const PlotSeries& s = spec.series[si];
    if (s.y.size() != s.x.size())
      throw ConfigError("render_line_chart: series " + s.label + " has mismatched x/y");
    const std::string color = kPalette[si % kPaletteSize];

    if (s.y_lo.size() == s.y.size() && s.y_hi.size() == s.y.size()) {
      for (size_t i = 0; i < s.y.size(); ++i) {
        const double x = xa.to_px_x(s.x[i]);
        const double ylo = ya.to_px_y(s.y_lo[i]);
        const double yhi = ya.to_px_y(s.y_hi[i]);
        line(&out, x, ylo, x, yhi, color, "1");
        line(&out, x - 3, ylo, x + 3, ylo, color, "1");
        line(&out, x - 3, yhi, x + 3, yhi, color, "1");
      }
    }

    out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.8\" points=\"";
    for (size_t i = 0; i < s.y.size(); ++i) {
      if (i) out += ' ';
      out += px(xa.to_px_x(s.x[i])) + "," + px(ya.to_px_y(s.y[i]));
    }
    out += "\"/>\n";
    for (size_t i = 0; i < s.y.size(); ++i)
      out += "<circle cx=\"" + px(xa.to_px_x(s.x[i])) + "\" cy=\"" +
             px(ya.to_px_y(s.y[i])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";

    const double ly = kY0 + 14 + 18.0 * si;
    line(&out, kX1 + 12, ly - 4, kX1 + 34, ly - 4, color, "2");
    text_at(&out, kX1 + 40, ly, s.label, "start", 11);
  }

  out += "</svg>\n";
  return out;
}

std::vector<CrPlot> bler_plots_from_csv(const std::string& csv_text) {
  const auto points = parse_bler_csv(csv_text);

  std::map<int, std::vector<const BlerPoint*>> by_cr;
  for (const auto& p : points) by_cr[p.cr.milli].push_back(&p);

  std::vector<CrPlot> plots;
  for (const auto& [milli, group] : by_cr) {
    ChartSpec spec;
    spec.title = "BLER vs Eb/N0, code rate " + format_double(milli / 1000.0);
    spec.x_label = "Eb/N0 (dB)";
    spec.y_label = "BLER";
    spec.log_y = true;

    std::vector<std::string> order;  // first-appearance receiver order
    for (const auto* p : group)
      if (std::find(order.begin(), order.end(), p->receiver) == order.end())
        order.push_back(p->receiver);
    for (const auto& label : order) {
      PlotSeries s;
      s.label = label;
      std::vector<const BlerPoint*> rows;
      for (const auto* p : group)
        if (p->receiver == label) rows.push_back(p);
      std::sort(rows.begin(), rows.end(),
                [](const BlerPoint* a, const BlerPoint* b) { return a->ebno_db < b->ebno_db; });
      for (const auto* p : rows) {
        s.x.push_back(p->ebno_db);
        s.y.push_back(p->bler);
        s.y_lo.push_back(p->ci_lo);
        s.y_hi.push_back(p->ci_hi);
      }
      spec.series.push_back(std::move(s));
    }
    plots.push_back({milli, render_line_chart(spec)});
  }
  return plots;
}

std::string loss_plot_from_csv(const std::string& csv_text) {
  std::vector<double> iters, losses;
  size_t pos = 0;
  bool first = true;
  while (pos < csv_text.size()) {
    size_t end = csv_text.find('\n', pos);
    if (end == std::string::npos) end = csv_text.size();
    const std::string row = csv_text.substr(pos, end - pos);
    pos = end + 1;
    if (row.empty()) continue;
    if (first) {
      if (row != "iteration,cr,ebno_db,loss")
        throw IoError("unexpected training log header: " + row);
      first = false;
      continue;
    }
    const auto fields = split_csv_line(row);
    if (fields.size() != 4) throw IoError("bad training log row: " + row);
    iters.push_back(static_cast<double>(parse_int64(fields[0])));
    losses.push_back(parse_double(fields[3]));
  }
  if (first || iters.empty()) throw IoError("empty training log");

  ChartSpec spec;
  spec.title = "Training loss";
  spec.x_label = "iteration";
  spec.y_label = "BCE loss";

  PlotSeries raw;
  raw.label = "loss";
  raw.x = iters;
  raw.y = losses;
  spec.series.push_back(std::move(raw));

  const size_t n = losses.size();
  const size_t window = std::max<size_t>(1, std::min<size_t>(101, n / 10));
  if (window > 1) {
    PlotSeries mean;
    mean.label = "mean(" + std::to_string(window) + ")";
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      acc += losses[i];
      if (i >= window) acc -= losses[i - window];
      const size_t count = std::min(i + 1, window);
      mean.x.push_back(iters[i]);
      mean.y.push_back(acc / static_cast<double>(count));
    }
    spec.series.push_back(std::move(mean));
  }
  return render_line_chart(spec);
}

}  // namespace loren
