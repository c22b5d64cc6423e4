#include "pns/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace pns {

namespace {

constexpr double kSize = 640.0;
constexpr double kMargin = 32.0;

struct Frame {
  double min_x, min_y, scale;
  double x(double v) const { return kMargin + (v - min_x) * scale; }
  double y(double v) const { return kSize - kMargin - (v - min_y) * scale; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string polyline(const std::vector<Point>& pts, const Frame& f, const std::string& style) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" " << style << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    os << (i ? " " : "") << fmt(f.x(pts[i].x)) << "," << fmt(f.y(pts[i].y));
  }
  os << "\"/>\n";
  return os.str();
}

// Most recent present observed position; callers check observed_count first.
Point last_seen(const Scene& scene, int agent) {
  for (int t = scene.t_h - 1; t >= 0; --t) {
    if (scene.present(agent, t)) return scene.at(agent, t);
  }
  return {};
}

}  // namespace

std::string plot_scene(const Scene& scene, const Prediction* prediction,
                       const PredecessorLabels& labels) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto extend = [&](Point p) {
    lo_x = std::min(lo_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_x = std::max(hi_x, p.x);
    hi_y = std::max(hi_y, p.y);
  };
  for (int a = 0; a < scene.num_agents(); ++a) {
    for (int t = 0; t < scene.num_steps(); ++t) {
      if (scene.present(a, t)) extend(scene.at(a, t));
    }
  }
  if (prediction) {
    for (const auto& mode : prediction->modes) {
      for (const auto& p : mode) extend(p);
    }
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1.0});
  const Frame f{lo_x, lo_y, (kSize - 2 * kMargin) / span};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << " " << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Observed tracks, split where an agent is absent.
  for (int a = 0; a < scene.num_agents(); ++a) {
    const bool succ = a == scene.target_index;
    const std::string style = succ ? "stroke=\"#222222\" stroke-width=\"2.5\""
                                   : "stroke=\"#9a9a9a\" stroke-width=\"1.5\"";
    std::vector<Point> run;
    for (int t = 0; t < scene.t_h; ++t) {
      if (scene.present(a, t)) {
        run.push_back(scene.at(a, t));
      } else if (!run.empty()) {
        os << polyline(run, f, style);
        run.clear();
      }
    }
    if (!run.empty()) {
      os << polyline(run, f, style);
      const Point last = run.back();
      os << "<circle cx=\"" << fmt(f.x(last.x)) << "\" cy=\"" << fmt(f.y(last.y))
         << "\" r=\"3\" fill=\"" << (succ ? "#222222" : "#9a9a9a") << "\"/>\n";
    }
  }

  if (prediction) {
    const double top = prediction->mode_probs.size() ? prediction->mode_probs.maxCoeff() : 1.0;
    for (std::size_t m = 0; m < prediction->modes.size(); ++m) {
      std::vector<Point> pts{scene.at(scene.target_index, scene.t_h - 1)};
      pts.insert(pts.end(), prediction->modes[m].begin(), prediction->modes[m].end());
      const double w = top > 0 ? prediction->mode_probs(static_cast<Eigen::Index>(m)) / top : 1.0;
      os << polyline(pts, f,
                     "stroke=\"#d62728\" stroke-width=\"1.2\" stroke-opacity=\"" +
                         fmt(0.25 + 0.75 * w) + "\"");
    }
  }

  std::vector<Point> gt{scene.at(scene.target_index, scene.t_h - 1)};
  for (int k = 0; k < scene.t_f; ++k) gt.push_back(scene.at(scene.target_index, scene.t_h + k));
  os << polyline(gt, f, "stroke=\"#2ca02c\" stroke-width=\"2.5\"");

  std::set<int> marked(labels.agent.begin(), labels.agent.end());
  for (int a : marked) {
    if (a < 0 || a >= scene.num_agents() || scene.observed_count(a) == 0) continue;
    const Point p = last_seen(scene, a);
    os << "<circle cx=\"" << fmt(f.x(p.x)) << "\" cy=\"" << fmt(f.y(p.y))
       << "\" r=\"8\" fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pns
