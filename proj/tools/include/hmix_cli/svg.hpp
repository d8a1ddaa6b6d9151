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

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace hmix::cli {

/// Minimal SVG builder with fixed number formatting, so equal input gives equal bytes.
class Svg {
 public:
  Svg(double width, double height);

  void open_group(const std::string& cls, double dx = 0.0, double dy = 0.0);
  void close_group();
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            bool dashed = false);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5,
                bool dashed = false);
  void circle(double cx, double cy, double r, const std::string& fill, double opacity = 1.0,
              const std::string& stroke = "none");
  void text(double x, double y, const std::string& s, double size = 12.0, const std::string& anchor = "start");

  std::string str() const;
  void save(const std::string& path) const;

 private:
  double width_;
  double height_;
  std::string body_;
};

/// Colour for series or group `i`.
std::string palette(std::size_t i);

/// Maps a data interval onto a pixel interval.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double px_lo = 0.0;
  double px_hi = 1.0;

  double operator()(double v) const;
};

/// Pads a degenerate or tight range so every point sits inside the plot.
std::pair<double, double> padded_range(double lo, double hi);

}  // namespace hmix::cli
