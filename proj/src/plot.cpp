#include "aerialnav/plot.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>

#include "aerialnav/errors.hpp"

namespace aerialnav {

namespace {

constexpr double kCanvas = 800.0;
constexpr double kMargin = 20.0;

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, r.ptr);
}

struct Frame2D {
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi = -lo;
  double scale = 1.0;

  void include(const Vec2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void finish() {
    if (!std::isfinite(lo.x())) lo = hi = Vec2::Zero();
    const Vec2 pad = Vec2::Constant(0.5);
    lo -= pad;
    hi += pad;
    scale = (kCanvas - 2.0 * kMargin) / std::max((hi - lo).maxCoeff(), 1e-9);
  }
  double x(double wx) const { return kMargin + (wx - lo.x()) * scale; }
  double y(double wy) const { return kMargin + (hi.y() - wy) * scale; }
  double height() const { return 2.0 * kMargin + (hi.y() - lo.y()) * scale; }
  double width() const { return 2.0 * kMargin + (hi.x() - lo.x()) * scale; }
};

std::vector<Vec2> sample_spline(const BSpline& spline) {
  std::vector<Vec2> out;
  const int n = static_cast<int>(std::max<Eigen::Index>(spline.size() * 8, 16));
  for (int i = 0; i <= n; ++i)
    out.push_back(evaluate(spline, spline.duration() * i / n).position.head<2>());
  return out;
}

std::string polyline(const Frame2D& f, const std::vector<Vec2>& pts, const std::string& cls, const std::string& style) {
  std::string s = "<polyline class=\"" + cls + "\" fill=\"none\" " + style + " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + fmt(f.x(pts[i].x())) + "," + fmt(f.y(pts[i].y()));
  return s + "\"/>\n";
}

std::string escape(const std::string& text) {
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

}  // namespace

std::string render_plot_svg(const EpisodeLog& log) {
  Frame2D f;
  std::vector<Vec2> flown;
  for (const auto& fr : log.frames) flown.push_back(fr.pose.position.head<2>());
  std::vector<std::vector<Vec2>> splines;
  for (const auto& t : log.trajectories)
    if (t.generation > 0) splines.push_back(sample_spline(t.spline));
  for (const auto& p : flown) f.include(p);
  for (const auto& s : splines)
    for (const auto& p : s) f.include(p);
  f.include(log.scenario.start.position.head<2>());
  for (const auto& g : log.scenario.goals) f.include(g.position.head<2>());
  for (const auto& prim : log.scenario.world) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            f.include(o.center.template head<2>() - Vec2::Constant(o.radius));
            f.include(o.center.template head<2>() + Vec2::Constant(o.radius));
          } else if constexpr (std::is_same_v<T, AxisAlignedBox>) {
            f.include(o.min.template head<2>());
            f.include(o.max.template head<2>());
          } else {
            f.include(o.center_xy - Vec2::Constant(o.radius));
            f.include(o.center_xy + Vec2::Constant(o.radius));
          }
        },
        prim);
  }
  f.finish();

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(f.width()) + "\" height=\"" + fmt(f.height()) +
         "\" viewBox=\"0 0 " + fmt(f.width()) + " " + fmt(f.height()) + "\">\n";
  svg += "<title>" + escape(log.scenario.name) + " (" + to_string(log.outcome) + ")</title>\n";
  svg += "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + fmt(f.width()) + "\" height=\"" + fmt(f.height()) +
         "\" fill=\"white\"/>\n";
  for (const auto& prim : log.scenario.world) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, AxisAlignedBox>) {
            svg += "<rect class=\"obstacle\" x=\"" + fmt(f.x(o.min.x())) + "\" y=\"" + fmt(f.y(o.max.y())) +
                   "\" width=\"" + fmt((o.max.x() - o.min.x()) * f.scale) + "\" height=\"" +
                   fmt((o.max.y() - o.min.y()) * f.scale) + "\" fill=\"#999\"/>\n";
          } else {
            Vec2 c;
            if constexpr (std::is_same_v<T, Sphere>) {
              c = o.center.template head<2>();
            } else {
              c = o.center_xy;
            }
            svg += "<circle class=\"obstacle\" cx=\"" + fmt(f.x(c.x())) + "\" cy=\"" + fmt(f.y(c.y())) + "\" r=\"" +
                   fmt(o.radius * f.scale) + "\" fill=\"#999\"/>\n";
          }
        },
        prim);
  }
  for (const auto& s : splines) svg += polyline(f, s, "spline", "stroke=\"#3a7bd5\" stroke-width=\"1\" stroke-opacity=\"0.6\"");
  if (!flown.empty()) svg += polyline(f, flown, "flown", "stroke=\"#d1495b\" stroke-width=\"2\"");
  const Vec2 start = log.scenario.start.position.head<2>();
  svg += "<circle class=\"start\" cx=\"" + fmt(f.x(start.x())) + "\" cy=\"" + fmt(f.y(start.y())) +
         "\" r=\"5\" fill=\"#2a9d8f\"/>\n";
  for (const auto& g : log.scenario.goals) {
    svg += "<circle class=\"goal\" cx=\"" + fmt(f.x(g.position.x())) + "\" cy=\"" + fmt(f.y(g.position.y())) +
           "\" r=\"" + fmt(std::max(g.success_radius * f.scale, 3.0)) + "\" fill=\"none\" stroke=\"#e9c46a\" stroke-width=\"2\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_plot_svg(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WriteError(path);
  out << render_plot_svg(log);
  if (!out.flush()) throw WriteError(path);
}

}  // namespace aerialnav
