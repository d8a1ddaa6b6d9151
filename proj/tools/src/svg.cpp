// Copyright 2026 The hmix Authors
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

#include "hmix_cli/svg.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix::cli {
namespace {

std::string num(double v) {
  if (std::abs(v) < 5e-4) v = 0.0;
  return fmt::format("{:.3f}", v);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

}  // namespace

Svg::Svg(double width, double height) : width_(width), height_(height) {}

void Svg::open_group(const std::string& cls, double dx, double dy) {
  body_ += fmt::format("<g class=\"{}\" transform=\"translate({},{})\">\n", escape(cls), num(dx), num(dy));
}

void Svg::close_group() { body_ += "</g>\n"; }

void Svg::rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
  body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"{}\"/>\n", num(x),
                       num(y), num(w), num(h), fill, stroke);
}

void Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width, bool dashed) {
  body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                       num(x1), num(y1), num(x2), num(y2), stroke, num(width),
                       dashed ? " stroke-dasharray=\"4 3\"" : "");
}

void Svg::polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width,
                   bool dashed) {
  std::string p;
  for (const auto& [x, y] : pts) p += fmt::format("{}{},{}", p.empty() ? "" : " ", num(x), num(y));
  body_ += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n", p, stroke,
                       num(width), dashed ? " stroke-dasharray=\"4 3\"" : "");
}

void Svg::circle(double cx, double cy, double r, const std::string& fill, double opacity, const std::string& stroke) {
  body_ += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"{}\"/>\n",
                       num(cx), num(cy), num(r), fill, num(opacity), stroke);
}

void Svg::text(double x, double y, const std::string& s, double size, const std::string& anchor) {
  body_ += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"sans-serif\" text-anchor=\"{}\">{}</text>\n",
                       num(x), num(y), num(size), anchor, escape(s));
}

std::string Svg::str() const {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
      num(width_), num(height_), num(width_), num(height_), body_);
}

void Svg::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << str();
}

std::string palette(std::size_t i) {
  static constexpr std::array<const char*, 10> colours = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colours[i % colours.size()];
}

double Axis::operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(1.0, std::abs(lo) * 0.1);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace hmix::cli
