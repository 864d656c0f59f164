// Copyright 2026 The critproc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "critproc/error.hpp"
#include "critproc/hcluster.hpp"
#include "critproc/matrix.hpp"
#include "critproc/metrics.hpp"
#include "critproc/shapley.hpp"

namespace critproc {

namespace svg_detail {

// Fixed two-decimal coordinates keep the bytes stable across platforms.
inline std::string num(double v) {
  if (!std::isfinite(v)) v = 0.0;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

inline std::string label_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  std::string s = buf;
  if (s == "-0") s = "0";
  return s;
}

inline std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Colour-blind friendly qualitative palette.
inline const char* palette(std::size_t i) {
  static const char* kColors[] = {"#0072b2", "#e69f00", "#009e73", "#cc79a7",
                                  "#56b4e9", "#d55e00", "#f0e442", "#000000"};
  return kColors[i % 8];
}

class Doc {
 public:
  Doc(double width, double height, std::string_view title) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width)
         << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height)
         << "\" font-family=\"Helvetica, Arial, sans-serif\">\n"
         << "<title>" << escape(title) << "</title>\n"
         << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
         << "\" fill=\"#ffffff\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#000000",
            double width = 1.0, std::string_view extra = {}) {
    out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
         << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width)
         << '"';
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << "/>\n";
  }

  void rect(double x, double y, double w, double h, std::string_view fill,
            std::string_view extra = {}) {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
         << "\" height=\"" << num(h) << "\" fill=\"" << fill << '"';
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << "/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill, std::string_view extra = {}) {
    out_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
         << "\" fill=\"" << fill << '"';
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << "/>\n";
  }

  void path(std::string_view d, std::string_view stroke, std::string_view extra = {}) {
    out_ << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << stroke << '"';
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << "/>\n";
  }

  void text(double x, double y, std::string_view s, std::string_view anchor = "start",
            double size = 12.0, std::string_view extra = {}) {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
         << "\" text-anchor=\"" << anchor << '"';
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << '>' << escape(s) << "</text>\n";
  }

  void raw(std::string_view s) { out_ << s; }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

// Maps [lo, hi] onto a pixel interval; degenerate ranges are widened.
struct Scale {
  double lo, hi, p0, p1;

  static Scale fit(double lo, double hi, double p0, double p1) {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
    return {lo, hi, p0, p1};
  }

  double operator()(double v) const { return p0 + (v - lo) / (hi - lo) * (p1 - p0); }
};

inline void axes(Doc& doc, const Scale& sx, const Scale& sy, std::string_view xlabel,
                 std::string_view ylabel) {
  const double left = sx.p0, right = sx.p1, bottom = sy.p0, top = sy.p1;
  doc.line(left, bottom, right, bottom);
  doc.line(left, bottom, left, top);
  for (int i = 0; i <= 4; ++i) {
    const double fx = sx.lo + (sx.hi - sx.lo) * i / 4.0;
    const double fy = sy.lo + (sy.hi - sy.lo) * i / 4.0;
    doc.line(sx(fx), bottom, sx(fx), bottom + 4);
    doc.text(sx(fx), bottom + 16, label_number(fx), "middle", 10);
    doc.line(left - 4, sy(fy), left, sy(fy));
    doc.text(left - 6, sy(fy) + 3, label_number(fy), "end", 10);
  }
  doc.text(0.5 * (left + right), bottom + 32, xlabel, "middle", 12);
  const double cy = 0.5 * (top + bottom);
  doc.text(left - 44, cy, ylabel, "middle", 12,
           "transform=\"rotate(-90 " + num(left - 44) + ' ' + num(cy) + ")\"");
}

}  // namespace svg_detail

// Dendrogram with leaves in recursive left-right order and one junction
// (class "junction") per merge. With labels, leaf ticks are coloured by
// cluster; with cut_k > 1, the cut level is drawn as a dashed line.
inline std::string render_dendrogram(const Dendrogram& d, std::span<const int> labels = {},
                                     std::size_t cut_k = 0) {
  using namespace svg_detail;
  const double width = 1000, height = 520, left = 70, right = 980, top = 50, bottom = 450;
  Doc doc(width, height, "Ward dendrogram");
  doc.text(width / 2, 28, "Ward dendrogram (" + std::to_string(d.n_leaves) + " runs)", "middle", 16);
  const std::size_t n = d.n_leaves;
  if (n == 0) return doc.finish();

  const auto order = leaf_order(d);
  std::vector<double> x(n + d.merges.size(), 0.0), h(n + d.merges.size(), 0.0);
  const double step = (right - left) / static_cast<double>(n);
  for (std::size_t i = 0; i < order.size(); ++i) x[order[i]] = left + step * (static_cast<double>(i) + 0.5);
  double hmax = 0.0;
  for (const auto& m : d.merges) hmax = std::max(hmax, m.height);
  if (hmax <= 0.0) hmax = 1.0;
  auto y = [&](double v) { return bottom - v / hmax * (bottom - top); };

  doc.line(left - 10, bottom, left - 10, top);
  for (int i = 0; i <= 4; ++i) {
    const double v = hmax * i / 4.0;
    doc.line(left - 14, y(v), left - 10, y(v));
    doc.text(left - 16, y(v) + 3, label_number(v), "end", 10);
  }
  doc.text(18, (top + bottom) / 2, "height", "middle", 12,
           "transform=\"rotate(-90 18 " + num((top + bottom) / 2) + ")\"");

  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const auto& m = d.merges[k];
    const std::size_t id = n + k;
    x[id] = 0.5 * (x[m.left] + x[m.right]);
    h[id] = m.height;
    std::string p = "M" + num(x[m.left]) + ' ' + num(y(h[m.left])) + " V" + num(y(m.height)) + " H" +
                    num(x[m.right]) + " V" + num(y(h[m.right]));
    doc.path(p, "#333333", "stroke-width=\"1\" class=\"junction\" data-node=\"" + std::to_string(id) + '"');
  }

  if (labels.size() == n) {
    for (std::size_t i = 0; i < n; ++i)
      doc.rect(x[i] - step / 2, bottom + 4, step, 10,
               palette(static_cast<std::size_t>(std::max(labels[i], 0))));
  }
  if (n <= 40)
    for (std::size_t i = 0; i < n; ++i) doc.text(x[i], bottom + 28, std::to_string(i), "middle", 9);
  if (cut_k > 1 && cut_k <= n) {
    const std::size_t below = n - cut_k;  // merges applied at this cut
    const double lo = below == 0 ? 0.0 : d.merges[below - 1].height;
    const double hi = d.merges[below].height;
    const double level = 0.5 * (lo + hi);
    doc.line(left, y(level), right, y(level), "#d55e00", 1.0, "stroke-dasharray=\"6 4\"");
    doc.text(right, y(level) - 4, "k = " + std::to_string(cut_k), "end", 11);
  }
  doc.text(width / 2, height - 20, "runs (leaf order)", "middle", 12);
  return doc.finish();
}

// Heatmap with the count printed in each cell (class "cell").
inline std::string render_confusion(const ConfusionMatrix& cm, std::span<const std::string> class_names,
                                    std::string_view title) {
  using namespace svg_detail;
  const std::size_t k = cm.classes();
  const double cell = 80, left = 110, top = 70;
  const double width = left + cell * static_cast<double>(k) + 40;
  const double height = top + cell * static_cast<double>(k) + 70;
  Doc doc(width, height, title);
  doc.text(width / 2, 28, title, "middle", 16);
  std::size_t peak = 0;
  for (const auto& row : cm.counts)
    for (auto c : row) peak = std::max(peak, c);
  auto name = [&](std::size_t i) {
    return i < class_names.size() ? class_names[i] : std::to_string(i);
  };
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double t = peak == 0 ? 0.0 : static_cast<double>(cm.counts[i][j]) / static_cast<double>(peak);
      // white -> dark blue
      const int r = static_cast<int>(std::lround(255 - t * (255 - 8)));
      const int g = static_cast<int>(std::lround(255 - t * (255 - 48)));
      const int b = static_cast<int>(std::lround(255 - t * (255 - 107)));
      char fill[8];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", r, g, b);
      const double cx = left + cell * static_cast<double>(j), cy = top + cell * static_cast<double>(i);
      doc.rect(cx, cy, cell, cell, fill, "stroke=\"#ffffff\" class=\"cell\"");
      doc.text(cx + cell / 2, cy + cell / 2 + 6, std::to_string(cm.counts[i][j]), "middle", 18,
               t > 0.5 ? "fill=\"#ffffff\"" : "fill=\"#000000\"");
    }
    doc.text(left - 8, top + cell * (static_cast<double>(i) + 0.5) + 4, name(i), "end", 12);
    doc.text(left + cell * (static_cast<double>(i) + 0.5), top - 8, name(i), "middle", 12);
  }
  doc.text(left + cell * static_cast<double>(k) / 2, top + cell * static_cast<double>(k) + 30,
           "predicted", "middle", 12);
  doc.text(24, top + cell * static_cast<double>(k) / 2, "true", "middle", 12,
           "transform=\"rotate(-90 24 " + num(top + cell * static_cast<double>(k) / 2) + ")\"");
  return doc.finish();
}

// Horizontal mean-|SHAP| bars (class "bar") in the given order.
inline std::string render_shap_bar(std::span<const RankedFeature> ranking, std::string_view title) {
  using namespace svg_detail;
  const double bar = 24, left = 200, top = 60, plot_w = 520;
  const double width = left + plot_w + 90;
  const double height = top + bar * static_cast<double>(ranking.size()) + 60;
  Doc doc(width, height, title);
  doc.text(width / 2, 28, title, "middle", 16);
  double peak = 0.0;
  for (const auto& f : ranking) peak = std::max(peak, f.mean_abs_shap);
  if (peak <= 0.0) peak = 1.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const double y = top + bar * static_cast<double>(i);
    const double w = ranking[i].mean_abs_shap / peak * plot_w;
    doc.rect(left, y + 3, w, bar - 6, "#0072b2", "class=\"bar\"");
    doc.text(left - 8, y + bar / 2 + 4, ranking[i].name, "end", 12);
    doc.text(left + w + 6, y + bar / 2 + 4, label_number(ranking[i].mean_abs_shap), "start", 11);
  }
  const double axis_y = top + bar * static_cast<double>(ranking.size()) + 4;
  doc.line(left, top, left, axis_y);
  doc.line(left, axis_y, left + plot_w, axis_y);
  doc.text(left + plot_w / 2, axis_y + 30, "mean |SHAP value|", "middle", 12);
  return doc.finish();
}

// Pairwise scatter panels of the first three principal component scores,
// coloured by cluster.
inline std::string render_pca_panels(const Matrix& scores, std::span<const int> labels,
                                     std::span<const double> explained_variance) {
  using namespace svg_detail;
  if (scores.cols() < 2) throw Error(Errc::kDimensionMismatch, "need at least two components");
  if (labels.size() != scores.rows()) throw Error(Errc::kDimensionMismatch, "labels != score rows");
  const std::size_t q = std::min<std::size_t>(scores.cols(), 3);
  std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}};
  if (q == 3) {
    pairs.push_back({0, 2});
    pairs.push_back({1, 2});
  }
  double total_var = 0.0;
  for (double v : explained_variance) total_var += v;
  const double panel = 300, gap = 90, top = 60, left0 = 80;
  const double width = left0 + (panel + gap) * static_cast<double>(pairs.size());
  const double height = top + panel + 80;
  Doc doc(width, height, "PCA of thickness outputs");
  doc.text(width / 2, 28, "PCA of thickness outputs", "middle", 16);
  auto axis_name = [&](std::size_t c) {
    std::string s = "PC" + std::to_string(c + 1);
    if (total_var > 0.0 && c < explained_variance.size()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " (%.1f%%)", 100.0 * explained_variance[c] / total_var);
      s += buf;
    }
    return s;
  };
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    const auto ca = scores.column(a), cb = scores.column(b);
    const auto [amin, amax] = std::minmax_element(ca.begin(), ca.end());
    const auto [bmin, bmax] = std::minmax_element(cb.begin(), cb.end());
    const double x0 = left0 + (panel + gap) * static_cast<double>(p);
    const auto sx = Scale::fit(*amin, *amax, x0, x0 + panel);
    const auto sy = Scale::fit(*bmin, *bmax, top + panel, top);
    axes(doc, sx, sy, axis_name(a), axis_name(b));
    doc.raw("<g class=\"panel\" fill-opacity=\"0.75\">\n");
    for (std::size_t r = 0; r < scores.rows(); ++r)
      doc.circle(sx(ca[r]), sy(cb[r]), 2.5, palette(static_cast<std::size_t>(std::max(labels[r], 0))));
    doc.raw("</g>\n");
  }
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  for (int c = 0; c < k; ++c) {
    const double lx = width - 90, ly = top + 16.0 * c;
    doc.circle(lx, ly - 4, 4, palette(static_cast<std::size_t>(c)));
    doc.text(lx + 8, ly, "cluster " + std::to_string(c), "start", 11);
  }
  return doc.finish();
}

// Predicted vs actual target for train (grey) and test (blue) rows, with
// the identity line.
inline std::string render_pred_vs_actual(std::span<const double> y_train, std::span<const double> p_train,
                                         std::span<const double> y_test, std::span<const double> p_test,
                                         std::string_view title) {
  using namespace svg_detail;
  if (y_train.size() != p_train.size() || y_test.size() != p_test.size())
    throw Error(Errc::kDimensionMismatch, "prediction and target lengths differ");
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (auto s : {y_train, p_train, y_test, p_test})
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (lo > hi) lo = hi = 0.0;
  const double left = 80, top = 60, size = 400;
  Doc doc(left + size + 140, top + size + 80, title);
  doc.text((left + size + 140) / 2, 28, title, "middle", 16);
  const auto sx = Scale::fit(lo, hi, left, left + size);
  const auto sy = Scale::fit(lo, hi, top + size, top);
  axes(doc, sx, sy, "actual", "predicted");
  doc.line(sx(sx.lo), sy(sy.lo), sx(sx.hi), sy(sy.hi), "#999999", 1.0, "stroke-dasharray=\"4 4\"");
  doc.raw("<g class=\"train\" fill-opacity=\"0.5\">\n");
  for (std::size_t i = 0; i < y_train.size(); ++i) doc.circle(sx(y_train[i]), sy(p_train[i]), 2.5, "#999999");
  doc.raw("</g>\n<g class=\"test\" fill-opacity=\"0.85\">\n");
  for (std::size_t i = 0; i < y_test.size(); ++i) doc.circle(sx(y_test[i]), sy(p_test[i]), 3, "#0072b2");
  doc.raw("</g>\n");
  doc.circle(left + size + 30, top + 10, 4, "#999999");
  doc.text(left + size + 40, top + 14, "train", "start", 11);
  doc.circle(left + size + 30, top + 28, 4, "#0072b2");
  doc.text(left + size + 40, top + 32, "test", "start", 11);
  return doc.finish();
}

}  // namespace critproc
