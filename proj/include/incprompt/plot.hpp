/**
 * Copyright 2026 The incprompt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Minimal SVG charts for sweep curves and selection histograms.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace incprompt::plot {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline void text(std::ostringstream& o, double x, double y, const std::string& s, const char* anchor = "middle",
                 int size = 11) {
  o << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size << "\" text-anchor=\"" << anchor
    << "\" font-family=\"sans-serif\">" << escape(s) << "</text>\n";
}

}  // namespace detail

struct Series {
  std::string label;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

/// Line chart over categorical x positions; y range is [0, 1].
inline std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<std::string>& xs,
                              const std::vector<Series>& series) {
  const double w = 480, h = 320, left = 55, right = 20, top = 35, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  auto px = [&](std::size_t i) { return left + (xs.size() > 1 ? pw * static_cast<double>(i) / (xs.size() - 1) : pw / 2); };
  auto py = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::text(o, w / 2, 20, title, "middle", 13);
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << detail::num(py(v)) << "\" y2=\""
      << detail::num(py(v)) << "\" stroke=\"#ddd\"/>\n";
    detail::text(o, left - 6, py(v) + 4, detail::num(v), "end", 10);
  }
  for (std::size_t i = 0; i < xs.size(); ++i) detail::text(o, px(i), top + ph + 16, xs[i], "middle", 10);
  detail::text(o, left + pw / 2, h - 10, x_label);
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  double legend_y = top + 12;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.y.size() && i < xs.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      pts += detail::num(px(i)) + "," + detail::num(py(s.y[i])) + " ";
      o << "<circle cx=\"" << detail::num(px(i)) << "\" cy=\"" << detail::num(py(s.y[i])) << "\" r=\"3\" fill=\""
        << s.color << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    o << "<rect x=\"" << left + pw - 110 << "\" y=\"" << legend_y - 8 << "\" width=\"10\" height=\"10\" fill=\""
      << s.color << "\"/>\n";
    detail::text(o, left + pw - 95, legend_y + 1, s.label, "start", 10);
    legend_y += 15;
  }
  o << "</svg>\n";
  return o.str();
}

/// One bar chart per true task showing how often each prompter was selected.
inline std::string selection_bars(const std::string& title, const std::vector<std::vector<long>>& counts) {
  const std::size_t n = counts.size();
  const std::size_t cols = std::min<std::size_t>(std::max<std::size_t>(n, 1), 5);
  const std::size_t rows = (std::max<std::size_t>(n, 1) + cols - 1) / cols;
  const double pw = 160, ph = 120, gap = 30, top = 40;
  const double w = cols * (pw + gap) + gap, h = top + rows * (ph + 2 * gap);
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::text(o, w / 2, 20, title, "middle", 13);
  for (std::size_t r = 0; r < n; ++r) {
    const double x0 = gap + (r % cols) * (pw + gap);
    const double y0 = top + (r / cols) * (ph + 2 * gap) + 15;
    long total = 0;
    for (long c : counts[r]) total += c;
    detail::text(o, x0 + pw / 2, y0 - 4, "true task " + std::to_string(r), "middle", 11);
    o << "<line x1=\"" << x0 << "\" y1=\"" << y0 + ph << "\" x2=\"" << x0 + pw << "\" y2=\"" << y0 + ph
      << "\" stroke=\"black\"/>\n";
    const double bw = pw / static_cast<double>(std::max<std::size_t>(counts[r].size(), 1));
    for (std::size_t c = 0; c < counts[r].size(); ++c) {
      const double frac = total > 0 ? static_cast<double>(counts[r][c]) / static_cast<double>(total) : 0.0;
      const double bh = (ph - 12) * frac;
      o << "<rect x=\"" << detail::num(x0 + bw * c + 2) << "\" y=\"" << detail::num(y0 + ph - bh) << "\" width=\""
        << detail::num(bw - 4) << "\" height=\"" << detail::num(bh) << "\" fill=\""
        << (c == r ? "#2ca02c" : "#7f7f7f") << "\"/>\n";
      detail::text(o, x0 + bw * (c + 0.5), y0 + ph + 14, std::to_string(c), "middle", 10);
      if (counts[r][c] > 0) detail::text(o, x0 + bw * (c + 0.5), y0 + ph - bh - 3, std::to_string(counts[r][c]), "middle", 9);
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace incprompt::plot
