#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "towerlab/eval/image.hpp"
#include "towerlab/eval/protocol.hpp"

namespace towerlab::eval {

// Terminal-floor counts over floors 0..floor_cap, split into the training
// theme set and everything else.
struct TerminationHistogram {
  int floor_cap = 0;
  std::vector<int> training;
  std::vector<int> evaluation;

  int total_training() const { return sum(training); }
  int total_evaluation() const { return sum(evaluation); }

 private:
  static int sum(const std::vector<int>& v) {
    int s = 0;
    for (int x : v) s += x;
    return s;
  }
};

inline TerminationHistogram termination_histogram(const std::vector<EvalReport>& reports,
                                                  const std::vector<Theme>& training_themes, int floor_cap) {
  bool any = false;
  for (const auto& r : reports) any = any || !r.rows.empty();
  if (!any) throw UsageError("termination_histogram needs at least one episode");
  TerminationHistogram h;
  h.floor_cap = floor_cap;
  h.training.assign(static_cast<std::size_t>(floor_cap + 1), 0);
  h.evaluation.assign(static_cast<std::size_t>(floor_cap + 1), 0);
  for (const auto& rep : reports)
    for (const auto& row : rep.rows) {
      const auto f = static_cast<std::size_t>(std::clamp(row.floor, 0, floor_cap));
      const bool train = std::find(training_themes.begin(), training_themes.end(), row.theme) != training_themes.end();
      ++(train ? h.training : h.evaluation)[f];
    }
  return h;
}

inline void write_histogram_csv(const std::string& path, const TerminationHistogram& h) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "floor,training_themes,evaluation_themes\n";
  for (int f = 0; f <= h.floor_cap; ++f)
    os << f << ',' << h.training[static_cast<std::size_t>(f)] << ',' << h.evaluation[static_cast<std::size_t>(f)] << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

// Grouped bar chart: per floor, a training bar (left) and an evaluation bar
// (right), heights relative to the largest count.
inline Image histogram_image(const TerminationHistogram& h) {
  const int bar = 10, group = 2 * bar + 8, margin = 12, plot_h = 160;
  const int bins = h.floor_cap + 1;
  Image img(2 * margin + bins * group, plot_h + 2 * margin, {255, 255, 255});
  int peak = 1;
  for (int f = 0; f < bins; ++f)
    peak = std::max({peak, h.training[static_cast<std::size_t>(f)], h.evaluation[static_cast<std::size_t>(f)]});
  const int base = margin + plot_h;
  img.line(margin - 2, base, img.width - margin, base, {0, 0, 0});
  for (int f = 0; f < bins; ++f) {
    const int x = margin + f * group + 4;
    const int ht = h.training[static_cast<std::size_t>(f)] * plot_h / peak;
    const int he = h.evaluation[static_cast<std::size_t>(f)] * plot_h / peak;
    img.fill_rect(x, base - ht, bar, ht, series_color(1));
    img.fill_rect(x + bar, base - he, bar, he, series_color(0));
    img.line(x + bar, base + 2, x + bar, base + 4, {0, 0, 0});  // tick per floor
  }
  return img;
}

}  // namespace towerlab::eval
