#pragma once

// Minimal static SVG emission: forest plot, effect-vs-quality scatter,
// method comparison and bias/coverage heatgrids.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metasurf/response_surface.hpp"
#include "metasurf/simulation.hpp"

namespace metasurf::io {

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#000", double width = 1,
            bool dashed = false) {
    body_ << "<line x1=\"" << f(x1) << "\" y1=\"" << f(y1) << "\" x2=\"" << f(x2) << "\" y2=\"" << f(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << f(width) << '"'
          << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none") {
    body_ << "<rect x=\"" << f(x) << "\" y=\"" << f(y) << "\" width=\"" << f(w) << "\" height=\"" << f(h)
          << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << f(cx) << "\" cy=\"" << f(cy) << "\" r=\"" << f(r) << "\" fill=\"" << fill << "\"/>\n";
  }
  void diamond(double cx, double cy, double half_w, double half_h, const std::string& fill) {
    body_ << "<polygon points=\"" << f(cx - half_w) << ',' << f(cy) << ' ' << f(cx) << ',' << f(cy - half_h) << ' '
          << f(cx + half_w) << ',' << f(cy) << ' ' << f(cx) << ',' << f(cy + half_h) << "\" fill=\"" << fill
          << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, double size = 11, const char* anchor = "start") {
    body_ << "<text x=\"" << f(x) << "\" y=\"" << f(y) << "\" font-family=\"sans-serif\" font-size=\"" << f(size)
          << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(w_) << "\" height=\"" << f(h_)
       << "\" viewBox=\"0 0 " << f(w_) << ' ' << f(h_) << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
       << body_.str() << "</svg>\n";
    return os.str();
  }

  static std::string f(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
  }
  static std::string num(double x, int prec = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, x);
    return buf;
  }

 private:
  static std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '&': o += "&amp;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
      }
    }
    return o;
  }

  double w_, h_;
  std::ostringstream body_;
};

struct Axis {
  double lo, hi, px_lo, px_hi;

  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }

  static Axis padded(double lo, double hi, double px_lo, double px_hi) {
    if (hi <= lo) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, px_lo, px_hi};
  }
};

inline void draw_x_axis(Svg& svg, const Axis& ax, double y, int ticks = 5) {
  svg.line(ax.px_lo, y, ax.px_hi, y);
  for (int i = 0; i <= ticks; ++i) {
    const double v = ax.lo + (ax.hi - ax.lo) * i / ticks;
    svg.line(ax(v), y, ax(v), y + 4);
    svg.text(ax(v), y + 16, Svg::num(v), 10, "middle");
  }
}

inline const char* method_color(Method m) {
  switch (m) {
    case Method::FE:
    case Method::FEt: return "#c0392b";
    case Method::RE:
    case Method::REt: return "#8e44ad";
    case Method::RSF:
    case Method::RSR: return "#27ae60";
  }
  return "#000";
}

/// Per-study effect +- 1.96 se, then one diamond per successful method.
inline std::string forest_plot(const StudyTable& t, const MethodComparison& cmp) {
  std::vector<const MethodOutcome*> ok;
  for (const auto& o : cmp.outcomes)
    if (o.ok()) ok.push_back(&o);
  const double row_h = 18, top = 30, left = 140, right = 40, width = 640;
  const double height = top + row_h * static_cast<double>(t.size() + ok.size() + 1) + 40;
  double lo = 0, hi = 0;
  for (const auto& s : t) {
    lo = std::min(lo, s.effect - kZ95 * s.se);
    hi = std::max(hi, s.effect + kZ95 * s.se);
  }
  for (auto* o : ok) {
    lo = std::min(lo, o->ci->lower);
    hi = std::max(hi, o->ci->upper);
  }
  const auto ax = Axis::padded(lo, hi, left, width - right);
  Svg svg(width, height);
  svg.text(width / 2, 18, "Study effects with 95% CIs", 13, "middle");
  double y = top;
  for (const auto& s : t) {
    y += row_h;
    std::string label = s.id;
    if (s.quality.kind() == QualityKind::Ordinal) label += " (" + s.quality.level().name() + ")";
    svg.text(8, y + 4, label, 10);
    svg.line(ax(s.effect - kZ95 * s.se), y, ax(s.effect + kZ95 * s.se), y, "#333");
    const double box = std::clamp(3.0 / s.se * 0.05, 2.0, 6.0);
    svg.rect(ax(s.effect) - box, y - box, 2 * box, 2 * box, "#333");
  }
  y += row_h / 2;
  for (auto* o : ok) {
    y += row_h;
    svg.text(8, y + 4, o->label, 10);
    const double mid = ax(*o->estimate);
    const double half = std::max(2.0, (ax(o->ci->upper) - ax(o->ci->lower)) / 2);
    svg.diamond(mid, y, half, 6, method_color(o->method));
  }
  svg.line(ax(0), top, ax(0), y + row_h / 2, "#999", 1, true);
  draw_x_axis(svg, ax, y + row_h);
  return svg.str();
}

/// Study effects against design quality, numeric axis or one column per
/// ordinal level (worst on the left).
inline std::string quality_scatter(const StudyTable& t) {
  const double width = 560, height = 380, left = 60, right = 20, top = 30, bottom = 50;
  double ylo = 0, yhi = 0;
  for (const auto& s : t) {
    ylo = std::min(ylo, s.effect - kZ95 * s.se);
    yhi = std::max(yhi, s.effect + kZ95 * s.se);
  }
  const auto ay = Axis::padded(ylo, yhi, height - bottom, top);
  Svg svg(width, height);
  svg.text(width / 2, 18, "Study effect sizes by design quality", 13, "middle");
  svg.line(left, top, left, height - bottom);
  for (int i = 0; i <= 5; ++i) {
    const double v = ay.lo + (ay.hi - ay.lo) * i / 5;
    svg.line(left - 4, ay(v), left, ay(v));
    svg.text(left - 6, ay(v) + 3, Svg::num(v), 10, "end");
  }
  svg.line(left, ay(0), width - right, ay(0), "#999", 1, true);

  auto point = [&](double x, const Study& s) {
    svg.line(x, ay(s.effect - kZ95 * s.se), x, ay(s.effect + kZ95 * s.se), "#555");
    svg.circle(x, ay(s.effect), 3, "#2c3e50");
  };

  if (t.kind() == QualityKind::Numeric) {
    double lo = t.empty() ? 0 : t[0].quality.score(), hi = lo;
    for (const auto& s : t) {
      lo = std::min(lo, s.quality.score());
      hi = std::max(hi, s.quality.score());
    }
    const auto ax = Axis::padded(lo, hi, left, width - right);
    for (const auto& s : t) point(ax(s.quality.score()), s);
    draw_x_axis(svg, ax, height - bottom);
    svg.text(width / 2, height - 12, "design quality", 11, "middle");
  } else {
    const auto& scale = *t.scale();
    const double band = (width - right - left) / static_cast<double>(scale.size());
    std::vector<std::size_t> seen(scale.size(), 0), count(scale.size(), 0);
    for (const auto& s : t) ++count[s.quality.level().index];
    for (const auto& s : t) {
      const auto li = s.quality.level().index;
      const double frac = (static_cast<double>(seen[li]++) + 0.5) / static_cast<double>(count[li]);
      point(left + band * (static_cast<double>(li) + 0.2 + 0.6 * frac), s);
    }
    svg.line(left, height - bottom, width - right, height - bottom);
    for (std::size_t i = 0; i < scale.size(); ++i)
      svg.text(left + band * (static_cast<double>(i) + 0.5), height - bottom + 16, scale.level(i), 11, "middle");
    svg.text(width / 2, height - 12, "risk of bias", 11, "middle");
  }
  return svg.str();
}

/// Point estimate and 95% interval per method; dashed reference at `truth`.
inline std::string comparison_plot(const MethodComparison& cmp, std::optional<double> truth) {
  const double width = 520, height = 340, left = 60, right = 20, top = 30, bottom = 50;
  double lo = truth.value_or(0), hi = truth.value_or(0);
  bool any = false;
  for (const auto& o : cmp.outcomes)
    if (o.ok()) {
      lo = any ? std::min(lo, o.ci->lower) : std::min(o.ci->lower, truth.value_or(o.ci->lower));
      hi = any ? std::max(hi, o.ci->upper) : std::max(o.ci->upper, truth.value_or(o.ci->upper));
      any = true;
    }
  const auto ay = Axis::padded(lo, hi, height - bottom, top);
  Svg svg(width, height);
  svg.text(width / 2, 18, "Estimates and 95% confidence intervals", 13, "middle");
  svg.line(left, top, left, height - bottom);
  for (int i = 0; i <= 5; ++i) {
    const double v = ay.lo + (ay.hi - ay.lo) * i / 5;
    svg.line(left - 4, ay(v), left, ay(v));
    svg.text(left - 6, ay(v) + 3, Svg::num(v), 10, "end");
  }
  if (truth) svg.line(left, ay(*truth), width - right, ay(*truth), "#555", 1, true);
  const double band = (width - right - left) / std::max<double>(1.0, static_cast<double>(cmp.outcomes.size()));
  for (std::size_t i = 0; i < cmp.outcomes.size(); ++i) {
    const auto& o = cmp.outcomes[i];
    const double x = left + band * (static_cast<double>(i) + 0.5);
    svg.text(x, height - bottom + 16, o.label, 11, "middle");
    if (!o.ok()) {
      svg.text(x, (top + height - bottom) / 2, "failed", 10, "middle");
      continue;
    }
    svg.line(x, ay(o.ci->lower), x, ay(o.ci->upper), method_color(o.method), 2);
    svg.circle(x, ay(*o.estimate), 4, method_color(o.method));
  }
  return svg.str();
}

enum class GridMetric { MedianBias, Coverage };

/// One panel per delta; rows are alpha, columns gamma, at sample size n.
inline std::string heatgrid(const SweepGrid& g, Method m, GridMetric metric, int n) {
  std::vector<double> alphas, gammas, deltas;
  auto add = [](std::vector<double>& v, double x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  double max_abs = 0;
  for (const auto& c : g.cells) {
    if (c.params.n != n) continue;
    add(alphas, c.params.alpha);
    add(gammas, c.params.gamma);
    add(deltas, c.params.delta);
    if (auto* r = c.find(m); r && r->agg.median_bias) max_abs = std::max(max_abs, std::abs(*r->agg.median_bias));
  }
  const double cell = 44, gap = 30, left = 50, top = 50;
  const double panel_w = cell * static_cast<double>(gammas.size());
  const double width = left + (panel_w + gap) * static_cast<double>(deltas.size()) + 10;
  const double height = top + cell * static_cast<double>(alphas.size()) + 40;
  Svg svg(width, height);
  std::string title = std::string(metric == GridMetric::Coverage ? "Coverage" : "Median bias") + ", " +
                      method_label(m, g.threshold) + ", N=" + std::to_string(n) + " (rows: alpha, columns: gamma)";
  svg.text(8, 18, title, 13);

  auto color = [&](double v) {
    int r, gr, b;
    if (metric == GridMetric::Coverage) {
      const double t = std::clamp(v, 0.0, 1.0);
      r = static_cast<int>(255 * (1 - t) + 39 * t);
      gr = static_cast<int>(255 * (1 - t) + 174 * t);
      b = static_cast<int>(255 * (1 - t) + 96 * t);
    } else {
      const double t = max_abs > 0 ? std::clamp(v / max_abs, -1.0, 1.0) : 0.0;
      if (t < 0) {
        r = static_cast<int>(255 * (1 + t));
        gr = static_cast<int>(255 * (1 + t) + 100 * -t);
        b = 255;
      } else {
        r = 255;
        gr = static_cast<int>(255 * (1 - t) + 80 * t);
        b = static_cast<int>(255 * (1 - t) + 80 * t);
      }
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, gr, b);
    return std::string(buf);
  };

  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double x0 = left + static_cast<double>(di) * (panel_w + gap);
    svg.text(x0 + panel_w / 2, top - 22, "delta=" + Svg::num(deltas[di], 1), 11, "middle");
    for (std::size_t gi = 0; gi < gammas.size(); ++gi)
      svg.text(x0 + cell * (static_cast<double>(gi) + 0.5), top - 6, Svg::num(gammas[gi], 0), 10, "middle");
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      if (di == 0) svg.text(left - 6, top + cell * (static_cast<double>(ai) + 0.6), Svg::num(alphas[ai], 0), 10, "end");
      for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
        const auto* c = g.find(alphas[ai], gammas[gi], deltas[di], n);
        const auto* r = c ? c->find(m) : nullptr;
        const double x = x0 + cell * static_cast<double>(gi);
        const double y = top + cell * static_cast<double>(ai);
        std::optional<double> v;
        if (r) v = metric == GridMetric::Coverage ? r->agg.coverage : r->agg.median_bias;
        svg.rect(x, y, cell, cell, v ? color(*v) : "#ddd", "#fff");
        svg.text(x + cell / 2, y + cell / 2 + 4, v ? Svg::num(*v, metric == GridMetric::Coverage ? 2 : 1) : "NA", 10,
                 "middle");
      }
    }
  }
  return svg.str();
}

}  // namespace metasurf::io
