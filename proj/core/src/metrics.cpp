#include "stcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "stcnn/errors.hpp"

namespace stcnn {

namespace {

void check_same(const Mask& a, const Mask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("mask sizes differ: " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
  }
}

// Fraction of `from` that has a pixel of `to` within Chebyshev radius r.
double matched_fraction(const std::vector<Pixel>& from, const Mask& to_map, int r) {
  if (from.empty()) return 1.0;
  const int h = to_map.height(), w = to_map.width();
  std::size_t hit = 0;
  for (const Pixel& p : from) {
    bool found = false;
    for (int y = std::max(0, p.y - r); y <= std::min(h - 1, p.y + r) && !found; ++y) {
      for (int x = std::max(0, p.x - r); x <= std::min(w - 1, p.x + r); ++x) {
        if (to_map.at(y, x)) {
          found = true;
          break;
        }
      }
    }
    hit += found;
  }
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

Mask boundary_map(const Mask& m, const std::vector<Pixel>& b) {
  std::vector<std::uint8_t> labels(std::size_t(m.height()) * m.width(), 0);
  for (const Pixel& p : b) labels[std::size_t(p.y) * m.width() + p.x] = 1;
  return Mask(m.height(), m.width(), std::move(labels));
}

bool centroid(const Mask& m, double& cy, double& cx) {
  double sy = 0, sx = 0;
  std::size_t n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(y, x)) {
        sy += y;
        sx += x;
        ++n;
      }
    }
  }
  if (n == 0) return false;
  cy = sy / n;
  cx = sx / n;
  return true;
}

double mean_nearest(const std::vector<Pixel>& a, const std::vector<Pixel>& b, double dy,
                    double dx) {
  double total = 0.0;
  for (const Pixel& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Pixel& q : b) {
      const double ey = p.y - (q.y + dy), ex = p.x - (q.x + dx);
      best = std::min(best, ey * ey + ex * ex);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(a.size());
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

double region_similarity(const Mask& s, const Mask& s_star) {
  check_same(s, s_star);
  std::size_t inter = 0, uni = 0;
  const auto& a = s.labels();
  const auto& b = s_star.labels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Pixel> boundary_pixels(const Mask& m) {
  std::vector<Pixel> out;
  const int h = m.height(), w = m.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == h - 1 || x == w - 1 || !m.at(y - 1, x) ||
                        !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1);
      if (edge) out.push_back({y, x});
    }
  }
  return out;
}

int boundary_radius(int height, int width) {
  const double diag = std::sqrt(double(height) * height + double(width) * width);
  return std::max(1, static_cast<int>(std::ceil(0.008 * diag)));
}

ContourScore contour_accuracy(const Mask& s, const Mask& s_star, int radius) {
  check_same(s, s_star);
  const int r = radius < 0 ? boundary_radius(s.height(), s.width()) : radius;
  const auto bs = boundary_pixels(s);
  const auto bg = boundary_pixels(s_star);
  ContourScore out;
  out.precision = matched_fraction(bs, boundary_map(s_star, bg), r);
  out.recall = matched_fraction(bg, boundary_map(s, bs), r);
  const double sum = out.precision + out.recall;
  out.f = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

double temporal_instability(const std::vector<Mask>& masks) {
  if (masks.size() < 2) throw ArgumentError("temporal instability needs >= 2 masks");
  for (const Mask& m : masks) check_same(masks.front(), m);
  const double diag = std::hypot(double(masks[0].height()), double(masks[0].width()));
  double total = 0.0;
  std::vector<Pixel> prev = boundary_pixels(masks[0]);
  for (std::size_t t = 1; t < masks.size(); ++t) {
    std::vector<Pixel> cur = boundary_pixels(masks[t]);
    double ay = 0, ax = 0, by = 0, bx = 0;
    const bool ha = centroid(masks[t - 1], ay, ax);
    const bool hb = centroid(masks[t], by, bx);
    if (ha != hb) {
      total += 1.0;
    } else if (ha) {
      // Shift the second contour so both centroids coincide.
      const double dy = ay - by, dx = ax - bx;
      const double d = 0.5 * (mean_nearest(prev, cur, dy, dx) + mean_nearest(cur, prev, -dy, -dx));
      total += d / diag;
    }
    prev = std::move(cur);
  }
  return total / static_cast<double>(masks.size() - 1);
}

Aggregate aggregate(const std::vector<double>& v, double threshold) {
  if (v.empty()) throw ArgumentError("aggregate of an empty list");
  Aggregate a;
  const double n = static_cast<double>(v.size());
  a.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  a.recall = static_cast<double>(std::count_if(v.begin(), v.end(),
                                                [&](double x) { return x > threshold; })) /
             n;
  if (v.size() >= 4) {
    std::size_t ids[5];
    for (int i = 0; i < 5; ++i) {
      ids[i] = static_cast<std::size_t>(std::nearbyint(n * i / 4.0));
    }
    auto bin_mean = [&](int b) {
      return std::accumulate(v.begin() + ids[b], v.begin() + ids[b + 1], 0.0) /
             static_cast<double>(ids[b + 1] - ids[b]);
    };
    a.decay = bin_mean(0) - bin_mean(3);
  }
  return a;
}

MetricsReport evaluate(const std::vector<Mask>& predictions, const std::vector<Mask>& gt,
                       const EvalProtocol& protocol, const std::string& sequence) {
  if (predictions.size() != gt.size()) {
    throw ArgumentError("evaluate: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(gt.size()) + " references");
  }
  MetricsReport r;
  r.sequence = sequence;
  const int n = static_cast<int>(gt.size());
  const int first = protocol.exclude_first ? 1 : 0;
  const int last = protocol.exclude_last ? n - 2 : n - 1;
  std::vector<Mask> evaluated;
  for (int t = first; t <= last; ++t) {
    r.frames.push_back(t);
    r.per_frame_j.push_back(region_similarity(predictions[t], gt[t]));
    r.per_frame_f.push_back(contour_accuracy(predictions[t], gt[t]).f);
    evaluated.push_back(predictions[t]);
  }
  if (r.frames.empty()) throw ArgumentError("evaluate: no frames left after exclusions");
  r.j = aggregate(r.per_frame_j);
  r.f = aggregate(r.per_frame_f);
  r.t = evaluated.size() >= 2 ? temporal_instability(evaluated) : 0.0;
  return r;
}

Summary summarize(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ArgumentError("summarize: no reports");
  Summary s;
  s.sequences = static_cast<int>(reports.size());
  for (const auto& r : reports) {
    s.j.mean += r.j.mean;
    s.j.recall += r.j.recall;
    s.j.decay += r.j.decay;
    s.f.mean += r.f.mean;
    s.f.recall += r.f.recall;
    s.f.decay += r.f.decay;
    s.t += r.t;
  }
  const double n = s.sequences;
  for (Aggregate* a : {&s.j, &s.f}) {
    a->mean /= n;
    a->recall /= n;
    a->decay /= n;
  }
  s.t /= n;
  return s;
}

void write_per_frame_csv(const std::filesystem::path& path,
                         const std::vector<MetricsReport>& reports) {
  std::ofstream out(path);
  if (!out) throw NotFound("cannot write " + path.string());
  out << "sequence,frame,J,F\n";
  char buf[128];
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.frames.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", r.frames[i], r.per_frame_j[i],
                    r.per_frame_f[i]);
      out << r.sequence << ',' << buf;
    }
  }
}

std::string format_summary(const Summary& s) {
  std::string out = "measure,mean,recall,decay\n";
  out += "J," + fixed3(s.j.mean) + "," + fixed3(s.j.recall) + "," + fixed3(s.j.decay) + "\n";
  out += "F," + fixed3(s.f.mean) + "," + fixed3(s.f.recall) + "," + fixed3(s.f.decay) + "\n";
  out += "T," + fixed3(s.t) + ",,\n";
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const Summary& summary) {
  std::ofstream out(path);
  if (!out) throw NotFound("cannot write " + path.string());
  out << format_summary(summary);
}

}  // namespace stcnn
