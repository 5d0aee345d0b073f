#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "towerlab/eval/image.hpp"
#include "towerlab/eval/protocol.hpp"

namespace towerlab::eval {

struct CurvePoint {
  int update = 0;
  Theme theme = Theme::ancient;
  double mean_floor = 0;
  double floor_dev_up = 0;
  double floor_dev_down = 0;
  double mean_length = 0;
  double length_std = 0;
};

// One point per (eval interval, theme), ordered by update then theme.
inline std::vector<CurvePoint> curve_points(std::vector<EvalReport> reports) {
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.update < b.update; });
  std::vector<CurvePoint> out;
  for (const auto& rep : reports)
    for (const auto& a : rep.aggregates())
      out.push_back({rep.update, a.theme, a.mean_floor, a.floor_dev_up, a.floor_dev_down, a.mean_length, a.length_std});
  return out;
}

inline void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& pts) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "update,theme,mean_floor,floor_dev_up,floor_dev_down,mean_length,length_std\n";
  for (const auto& p : pts)
    os << p.update << ',' << env::theme_name(p.theme) << ',' << fmt_num(p.mean_floor) << ',' << fmt_num(p.floor_dev_up)
       << ',' << fmt_num(p.floor_dev_down) << ',' << fmt_num(p.mean_length) << ',' << fmt_num(p.length_std) << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

namespace detail {

struct Panel {
  int x0, y0, w, h;
  double xmin, xmax, ymin, ymax;
  int px(double x) const {
    return x0 + (xmax > xmin ? static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (w - 1))) : w / 2);
  }
  int py(double y) const {
    return y0 + h - 1 - (ymax > ymin ? static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (h - 1))) : h / 2);
  }
};

// Mean line per theme with a shaded band between mean - down and mean + up.
template <class Mean, class Up, class Down>
void draw_panel(Image& img, const Panel& p, const std::vector<CurvePoint>& pts, Mean mean, Up up, Down down) {
  img.outline_rect(p.x0 - 1, p.y0 - 1, p.w + 2, p.h + 2, {0, 0, 0});
  for (auto theme : env::kAllThemes) {
    std::vector<const CurvePoint*> s;
    for (const auto& q : pts)
      if (q.theme == theme) s.push_back(&q);
    if (s.empty()) continue;
    const auto color = series_color(static_cast<std::size_t>(theme));
    // A single interval still gets drawn, as a one-column segment.
    const std::size_t segments = std::max<std::size_t>(1, s.size() - 1);
    for (std::size_t i = 0; i < segments; ++i) {
      const auto* a = s[i];
      const auto* b = s[std::min(i + 1, s.size() - 1)];
      const int xa = p.px(a->update), xb = p.px(b->update);
      for (int x = xa; x <= xb; ++x) {
        const double f = xb > xa ? static_cast<double>(x - xa) / (xb - xa) : 0.0;
        const double lo = (mean(*a) - down(*a)) * (1 - f) + (mean(*b) - down(*b)) * f;
        const double hi = (mean(*a) + up(*a)) * (1 - f) + (mean(*b) + up(*b)) * f;
        for (int y = p.py(hi); y <= p.py(lo); ++y) img.blend(x, y, color, 0.18);
      }
      img.line(xa, p.py(mean(*a)), xb, p.py(mean(*b)), color);
    }
  }
}

}  // namespace detail

// Two stacked panels: mean floor with its asymmetric band, mean episode
// length with a standard deviation band.
inline Image curves_image(const std::vector<CurvePoint>& pts) {
  const int w = 480, h = 200, m = 16;
  Image img(w + 2 * m, 2 * h + 3 * m, {255, 255, 255});
  if (pts.empty()) return img;
  double xmin = pts.front().update, xmax = xmin, fmax = 0, lmax = 0;
  for (const auto& p : pts) {
    xmin = std::min<double>(xmin, p.update);
    xmax = std::max<double>(xmax, p.update);
    fmax = std::max(fmax, p.mean_floor + p.floor_dev_up);
    lmax = std::max(lmax, p.mean_length + p.length_std);
  }
  const detail::Panel floor_panel{m, m, w, h, xmin, xmax, 0, std::max(1.0, fmax)};
  const detail::Panel length_panel{m, 2 * m + h, w, h, xmin, xmax, 0, std::max(1.0, lmax)};
  detail::draw_panel(
      img, floor_panel, pts, [](const CurvePoint& p) { return p.mean_floor; },
      [](const CurvePoint& p) { return p.floor_dev_up; }, [](const CurvePoint& p) { return p.floor_dev_down; });
  detail::draw_panel(
      img, length_panel, pts, [](const CurvePoint& p) { return p.mean_length; },
      [](const CurvePoint& p) { return p.length_std; }, [](const CurvePoint& p) { return p.length_std; });
  return img;
}

}  // namespace towerlab::eval
