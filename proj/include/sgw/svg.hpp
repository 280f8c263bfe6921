#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>

#include "sgw/csv.hpp"
#include "sgw/diagnostics.hpp"

namespace sgw {

namespace detail {

// Shade per bin, light to dark.
inline const char* kShadeFill[4] = {"#f0f0f0", "#bdbdbd", "#737373", "#252525"};

inline void append(std::string& out, const char* fmt_, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt_);
  std::vsnprintf(buf, sizeof buf, fmt_, args);
  va_end(args);
  out += buf;
}

} // namespace detail

/// Deterministic Connect-S SVG: one row per subgroup cell with its label on
/// the left, one shaded dot per covariate, and N / VI annotations at the
/// row end. Identical grids render to byte-identical files.
inline std::string render_svg_string(const ConnectSGrid& grid) {
  const int cell_w = 26;
  const int cell_h = 26;
  const int radius = 8;
  const int label_w = 170;
  const int annot_w = 150;
  const int header_h = 110;
  const int legend_h = 56;
  const int n_rows = static_cast<int>(grid.n_rows());
  const int n_cols = static_cast<int>(grid.n_cols());
  const int width = label_w + n_cols * cell_w + annot_w;
  const int height = header_h + n_rows * cell_h + legend_h;

  std::string s;
  detail::append(s,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                 "viewBox=\"0 0 %d %d\">\n",
                 width, height, width, height);
  detail::append(s, "<!-- sgw connect-s thresholds=%s,%s,%s %s -->\n",
                 csv::fmt(grid.thresholds[0]).c_str(), csv::fmt(grid.thresholds[1]).c_str(),
                 csv::fmt(grid.thresholds[2]).c_str(),
                 grid.meta.empty() ? "meta=none" : grid.meta.c_str());
  s += "<style>text{font-family:Helvetica,Arial,sans-serif;font-size:11px;fill:#222;}"
       ".hdr{font-size:10px;}.annot{font-size:10px;}</style>\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Column headers, rotated.
  for (int p = 0; p < n_cols; ++p) {
    int cx = label_w + p * cell_w + cell_w / 2;
    detail::append(s,
                   "<text class=\"hdr\" x=\"%d\" y=\"%d\" text-anchor=\"start\" "
                   "transform=\"rotate(-60 %d %d)\">%s</text>\n",
                   cx, header_h - 8, cx, header_h - 8, grid.covariate_names[p].c_str());
  }

  for (int r = 0; r < n_rows; ++r) {
    int cy = header_h + r * cell_h + cell_h / 2;
    detail::append(s, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%s</text>\n", label_w - 8,
                   cy + 4, grid.cells[r].label().c_str());
    for (int p = 0; p < n_cols; ++p) {
      int cx = label_w + p * cell_w + cell_w / 2;
      const BalanceCell& bc = grid.rows[r][p];
      if (bc.degenerate) {
        // Degenerate pair: hollow marker with a cross.
        detail::append(s,
                       "<circle cx=\"%d\" cy=\"%d\" r=\"%d\" fill=\"none\" stroke=\"#999\" "
                       "stroke-dasharray=\"2,2\"/>\n",
                       cx, cy, radius);
        detail::append(s,
                       "<path d=\"M%d %d L%d %d M%d %d L%d %d\" stroke=\"#999\"/>\n",
                       cx - 4, cy - 4, cx + 4, cy + 4, cx - 4, cy + 4, cx + 4, cy - 4);
      } else {
        detail::append(s, "<circle cx=\"%d\" cy=\"%d\" r=\"%d\" fill=\"%s\"/>\n", cx, cy, radius,
                       detail::kShadeFill[bc.shade_bin - 1]);
      }
    }
    int tx = label_w + n_cols * cell_w + 10;
    std::string vi = std::isnan(grid.row_vi[r]) ? "NA" : csv::fmt_fixed(grid.row_vi[r], 2);
    detail::append(s, "<text class=\"annot\" x=\"%d\" y=\"%d\">N=%d VI=%s</text>\n", tx, cy + 4,
                   grid.row_n[r], vi.c_str());
  }

  // Legend.
  int ly = header_h + n_rows * cell_h + 24;
  std::string texts[4] = {"<" + csv::fmt(grid.thresholds[0]),
                          csv::fmt(grid.thresholds[0]) + "-" + csv::fmt(grid.thresholds[1]),
                          csv::fmt(grid.thresholds[1]) + "-" + csv::fmt(grid.thresholds[2]),
                          ">=" + csv::fmt(grid.thresholds[2])};
  detail::append(s, "<text x=\"%d\" y=\"%d\">ASMD</text>\n", 10, ly + 4);
  for (int b = 0; b < 4; ++b) {
    int lx = 60 + b * 110;
    detail::append(s, "<circle cx=\"%d\" cy=\"%d\" r=\"%d\" fill=\"%s\"/>\n", lx, ly, radius,
                   detail::kShadeFill[b]);
    detail::append(s, "<text class=\"annot\" x=\"%d\" y=\"%d\">%s</text>\n", lx + 12, ly + 4,
                   texts[b].c_str());
  }

  s += "</svg>\n";
  return s;
}

/// Render `grid` to `path`.
inline void render_svg(const ConnectSGrid& grid, const std::string& path) {
  csv::write_file(path, render_svg_string(grid));
}

} // namespace sgw
