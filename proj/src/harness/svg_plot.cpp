// Copyright 2026 the nnsp authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "harness/svg_plot.hpp"

#include <cmath>
#include <fstream>

#include "core/types.hpp"

namespace nnsp {

namespace {
const char* kColors[] = {"#1f6fb4", "#d9542a", "#3a8f3a", "#8550a0", "#8c6d31"};
}

void write_loglog_svg(const std::string& path, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<PlotSeries>& series,
                      const std::vector<std::pair<double, double>>& fit_lines) {
  const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double lx_min = 1e300, lx_max = -1e300, ly_min = 1e300, ly_max = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      lx_min = std::min(lx_min, std::log10(s.x[i]));
      lx_max = std::max(lx_max, std::log10(s.x[i]));
      ly_min = std::min(ly_min, std::log10(s.y[i]));
      ly_max = std::max(ly_max, std::log10(s.y[i]));
    }
  if (lx_min > lx_max) {
    lx_min = 0;
    lx_max = 1;
    ly_min = 0;
    ly_max = 1;
  }
  if (lx_max - lx_min < 1e-9) lx_max = lx_min + 1;
  if (ly_max - ly_min < 1e-9) ly_max = ly_min + 1;
  double pad = 0.05 * (ly_max - ly_min);
  ly_min -= pad;
  ly_max += pad;
  auto px = [&](double lx) { return ml + (lx - lx_min) / (lx_max - lx_min) * (W - ml - mr); };
  auto py = [&](double ly) { return H - mb - (ly - ly_min) / (ly_max - ly_min) * (H - mt - mb); };

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  // axes
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
     << H - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">log10 " << xlabel << "</text>\n";
  os << "<text x=\"18\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
     << H / 2 << ")\">log10 " << ylabel << "</text>\n";
  // decade ticks
  for (int e = (int)std::ceil(lx_min); e <= (int)std::floor(lx_max); ++e) {
    os << "<line x1=\"" << px(e) << "\" y1=\"" << H - mb << "\" x2=\"" << px(e) << "\" y2=\""
       << H - mb + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(e) << "\" y=\"" << H - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << e << "</text>\n";
  }
  for (int e = (int)std::ceil(ly_min); e <= (int)std::floor(ly_max); ++e) {
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(e) << "\" x2=\"" << ml << "\" y2=\""
       << py(e) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << py(e) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << e << "</text>\n";
  }
  // fitted lines across the x range
  for (std::size_t f = 0; f < fit_lines.size(); ++f) {
    double y1 = fit_lines[f].first * lx_min + fit_lines[f].second;
    double y2 = fit_lines[f].first * lx_max + fit_lines[f].second;
    os << "<line x1=\"" << px(lx_min) << "\" y1=\"" << py(y1) << "\" x2=\"" << px(lx_max)
       << "\" y2=\"" << py(y2) << "\" stroke=\"#777\" stroke-dasharray=\"6 4\"/>\n";
  }
  // series
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % 5];
    std::string poly;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      double cx = px(std::log10(s.x[i])), cy = py(std::log10(s.y[i]));
      os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"3.5\" fill=\"" << color
         << "\"/>\n";
      poly += std::to_string(cx) + "," + std::to_string(cy) + " ";
    }
    os << "<polyline points=\"" << poly << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1\" opacity=\"0.6\"/>\n";
    os << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 16 * (double)si
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << s.name
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace nnsp
