#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stcnn/errors.hpp"
#include "stcnn/metrics.hpp"
#include "support.hpp"

using namespace stcnn;
using namespace testing;
namespace fs = std::filesystem;

namespace {

Mask from_bits(const std::string& bits, int h, int w) {
  std::vector<std::uint8_t> labels;
  for (char c : bits) labels.push_back(c == '1' ? 1 : 0);
  return Mask(h, w, std::move(labels));
}

// Exhaustive references with integer counting.
struct Counts {
  long inter = 0, uni = 0;
  long p_hit = 0, p_total = 0, r_hit = 0, r_total = 0;
};

bool is_boundary(const Mask& m, int y, int x) {
  if (!m.at(y, x)) return false;
  const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const int v = y + dy[k], u = x + dx[k];
    if (v < 0 || u < 0 || v >= m.height() || u >= m.width() || !m.at(v, u)) return true;
  }
  return false;
}

Counts brute_force(const Mask& s, const Mask& g, int radius) {
  Counts c;
  std::vector<Pixel> bs, bg;
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      c.inter += s.at(y, x) && g.at(y, x);
      c.uni += s.at(y, x) || g.at(y, x);
      if (is_boundary(s, y, x)) bs.push_back({y, x});
      if (is_boundary(g, y, x)) bg.push_back({y, x});
    }
  }
  auto hits = [&](const std::vector<Pixel>& src, const std::vector<Pixel>& dst) {
    long n = 0;
    for (const Pixel& p : src) {
      for (const Pixel& q : dst) {
        if (std::max(std::abs(p.y - q.y), std::abs(p.x - q.x)) <= radius) {
          ++n;
          break;
        }
      }
    }
    return n;
  };
  c.p_total = static_cast<long>(bs.size());
  c.r_total = static_cast<long>(bg.size());
  c.p_hit = hits(bs, bg);
  c.r_hit = hits(bg, bs);
  return c;
}

std::vector<Mask> moving_squares(int frames, int n, int side) {
  std::vector<Mask> out;
  for (int t = 0; t < frames; ++t) out.push_back(rect_mask(n, n, 2 + t, 3 + 2 * t, 2 + t + side, 3 + 2 * t + side));
  return out;
}

}  // namespace

TEST_CASE("region similarity examples") {
  const Mask a = rect_mask(8, 8, 1, 1, 6, 6);
  CHECK(region_similarity(a, a) == 1.0);
  CHECK(region_similarity(rect_mask(8, 8, 0, 0, 2, 2), rect_mask(8, 8, 5, 5, 8, 8)) == 0.0);
  CHECK(region_similarity(Mask::zeros(4, 4), Mask::zeros(4, 4)) == 1.0);
  const Mask s = mask_from_rows({"1110", "0000", "0000", "0000"});
  const Mask t = mask_from_rows({"0110", "1100", "0000", "0000"});
  // |∩| = 2 and |∪| = 5 here; a third pixel in t alone gives the 2/6 case.
  const Mask u = mask_from_rows({"0110", "1100", "0001", "0000"});
  CHECK(region_similarity(s, t) == doctest::Approx(2.0 / 5.0));
  CHECK(region_similarity(s, u) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(region_similarity(a, Mask::zeros(8, 7)), ShapeError);
}

TEST_CASE("boundary extraction and radius") {
  const Mask m = rect_mask(5, 5, 1, 1, 4, 4);
  const std::vector<Pixel> b = boundary_pixels(m);
  CHECK(b.size() == 8);
  for (const Pixel& p : b) CHECK_FALSE((p.y == 2 && p.x == 2));
  // Pixels on the image border count as boundary.
  CHECK(boundary_pixels(rect_mask(3, 3, 0, 0, 3, 3)).size() == 8);
  CHECK(boundary_radius(32, 32) == 1);
  CHECK(boundary_radius(480, 854) == 8);
  CHECK(boundary_radius(64, 64) == 1);
  CHECK(boundary_radius(200, 200) == 3);
}

TEST_CASE("contour accuracy examples") {
  const Mask g = rect_mask(8, 8, 1, 1, 7, 7);
  const ContourScore same = contour_accuracy(g, g);
  CHECK(same.f == 1.0);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);

  const ContourScore empty = contour_accuracy(Mask::zeros(8, 8), g);
  CHECK(empty.f == 0.0);
  CHECK(empty.recall == 0.0);

  const ContourScore inset = contour_accuracy(rect_mask(8, 8, 2, 2, 6, 6), g, 1);
  CHECK(inset.precision == 1.0);
  CHECK(inset.recall == 1.0);
  CHECK(inset.f == 1.0);

  const ContourScore far = contour_accuracy(rect_mask(8, 8, 3, 3, 5, 5), g, 1);
  CHECK(far.precision == 0.0);
  CHECK(far.f == 0.0);
  CHECK_THROWS_AS(contour_accuracy(g, Mask::zeros(7, 8)), ShapeError);
}

TEST_CASE("metric values agree with exhaustive counting") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const double density = rng.uniform(0.05, 0.95);
    Mask s = random_mask(32, 32, rng, density);
    Mask g = trial % 3 == 0 ? rect_mask(32, 32, rng.uniform_int(0, 10), rng.uniform_int(0, 10),
                                        rng.uniform_int(12, 32), rng.uniform_int(12, 32))
                            : random_mask(32, 32, rng, rng.uniform(0.05, 0.95));
    const int radius = boundary_radius(32, 32);
    const Counts c = brute_force(s, g, radius);
    CHECK(region_similarity(s, g) == static_cast<double>(c.inter) / c.uni);
    const ContourScore cs = contour_accuracy(s, g);
    const double p = c.p_total ? static_cast<double>(c.p_hit) / c.p_total : 1.0;
    const double r = c.r_total ? static_cast<double>(c.r_hit) / c.r_total : 1.0;
    CHECK(cs.precision == p);
    CHECK(cs.recall == r);
    const double f = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
    CHECK(std::abs(cs.f - f) <= 1e-9);
  }
}

TEST_CASE("symmetry, range and monotonicity") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Mask a = random_mask(12, 9, rng, rng.uniform());
    const Mask b = random_mask(12, 9, rng, rng.uniform());
    const double j = region_similarity(a, b);
    CHECK(j == region_similarity(b, a));
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
    CHECK(region_similarity(a, a) == 1.0);
    const ContourScore ab = contour_accuracy(a, b), ba = contour_accuracy(b, a);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.f == doctest::Approx(ba.f).epsilon(1e-15));
    CHECK(ab.f >= 0.0);
    CHECK(ab.f <= 1.0);
  }
  // Every 3x3 pair: turning a reference-only pixel on in the prediction
  // never lowers J.
  for (int sa = 0; sa < 512; sa += 3) {
    for (int sb = 1; sb < 512; sb += 5) {
      std::vector<std::uint8_t> la(9), lb(9);
      for (int i = 0; i < 9; ++i) {
        la[i] = (sa >> i) & 1;
        lb[i] = (sb >> i) & 1;
      }
      const Mask a(3, 3, la), b(3, 3, lb);
      for (int i = 0; i < 9; ++i) {
        if (!lb[i] || la[i]) continue;
        std::vector<std::uint8_t> grown = la;
        grown[i] = 1;
        CHECK(region_similarity(Mask(3, 3, grown), b) >= region_similarity(a, b));
      }
    }
  }
}

TEST_CASE("temporal instability") {
  const Mask sq = rect_mask(16, 16, 4, 4, 12, 12);
  CHECK(temporal_instability({sq, sq, sq}) == 0.0);
  CHECK(temporal_instability(moving_squares(6, 32, 7)) == doctest::Approx(0.0));
  CHECK(temporal_instability({sq, rect_mask(16, 16, 2, 2, 14, 14)}) ==
        doctest::Approx(0.0910009526853897).epsilon(1e-12));
  CHECK(temporal_instability({sq, Mask::zeros(16, 16)}) == 1.0);
  CHECK(temporal_instability({Mask::zeros(16, 16), Mask::zeros(16, 16)}) == 0.0);
  CHECK_THROWS_AS(temporal_instability({sq}), ArgumentError);
  CHECK_THROWS_AS(temporal_instability({sq, Mask::zeros(16, 15)}), ShapeError);
}

TEST_CASE("aggregate statistics") {
  const Aggregate flat = aggregate(std::vector<double>(8, 0.8));
  CHECK(flat.mean == doctest::Approx(0.8));
  CHECK(flat.recall == 1.0);
  CHECK(flat.decay == doctest::Approx(0.0));
  CHECK(aggregate({0.4, 0.6}).recall == 0.5);
  CHECK(aggregate({0.5, 0.6}).recall == 0.5);
  CHECK(aggregate({0.9, 0.9, 0.8, 0.8, 0.7, 0.7, 0.6, 0.6}).decay == doctest::Approx(0.3));
  CHECK(aggregate({0.7}).decay == 0.0);
  CHECK(aggregate({0.9, 0.1, 0.5}).decay == 0.0);
  // Five values split at 0, 1, 2, 4, 5 (ties round to even).
  CHECK(aggregate({1.0, 0.0, 0.0, 0.0, 0.5}).decay == doctest::Approx(0.5));
  CHECK_THROWS_AS(aggregate({}), ArgumentError);
}

TEST_CASE("evaluation protocol") {
  const std::vector<Mask> gt = moving_squares(6, 32, 8);
  const MetricsReport same = evaluate(gt, gt, {}, "seq");
  CHECK(same.sequence == "seq");
  CHECK(same.frames == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(same.j.mean == 1.0);
  CHECK(same.f.mean == 1.0);
  CHECK(same.t == doctest::Approx(0.0));
  CHECK(same.per_frame_j.size() == 5);

  EvalProtocol all{false, false};
  CHECK(evaluate(gt, gt, all).frames.size() == 6);
  EvalProtocol middle{true, true};
  CHECK(evaluate(gt, gt, middle).frames == std::vector<int>{1, 2, 3, 4});

  const std::vector<Mask> two(gt.begin(), gt.begin() + 2);
  const MetricsReport single = evaluate(two, two);
  CHECK(single.frames.size() == 1);
  CHECK(single.j.decay == 0.0);
  CHECK(single.t == 0.0);

  CHECK_THROWS_AS(evaluate(two, gt), ArgumentError);
}

TEST_CASE("fixture sequence matches the independent script") {
  std::ifstream in(fs::path(STCNN_TEST_DATA) / "eval_case.txt");
  REQUIRE(in);
  int frames = 0, h = 0, w = 0;
  in >> frames >> h >> w;
  std::vector<Mask> preds, gts;
  for (int t = 0; t < frames; ++t) {
    std::string p, g;
    in >> p >> g;
    preds.push_back(from_bits(p, h, w));
    gts.push_back(from_bits(g, h, w));
  }
  std::vector<double> j(frames), f(frames);
  for (int t = 0; t < frames; ++t) in >> j[t] >> f[t];
  double t_value = 0;
  in >> t_value;
  REQUIRE(in);

  for (int t = 0; t < frames; ++t) {
    CHECK(region_similarity(preds[t], gts[t]) == doctest::Approx(j[t]).epsilon(1e-12));
    CHECK(contour_accuracy(preds[t], gts[t]).f == doctest::Approx(f[t]).epsilon(1e-12));
  }
  const MetricsReport r = evaluate(preds, gts);
  double mean_j = 0;
  for (int t = 1; t < frames; ++t) mean_j += j[t] / (frames - 1);
  CHECK(r.j.mean == doctest::Approx(mean_j).epsilon(1e-12));
  CHECK(r.t == doctest::Approx(t_value).epsilon(1e-12));
}

TEST_CASE("summary and report files") {
  const std::vector<Mask> gt = moving_squares(5, 32, 8);
  std::vector<Mask> pred = gt;
  pred[2] = Mask::zeros(32, 32);
  const MetricsReport a = evaluate(gt, gt, {}, "a"), b = evaluate(pred, gt, {}, "b");
  const Summary s = summarize({a, b});
  CHECK(s.sequences == 2);
  CHECK(s.j.mean == doctest::Approx(0.5 * (a.j.mean + b.j.mean)));
  CHECK(s.t == doctest::Approx(0.5 * (a.t + b.t)));

  const std::string text = format_summary(s);
  CHECK(text.rfind("measure,mean,recall,decay\n", 0) == 0);
  CHECK(text.find("\nJ,") != std::string::npos);
  CHECK(text.find("\nF,") != std::string::npos);
  CHECK(text.find("\nT,") != std::string::npos);

  const fs::path dir = fs::temp_directory_path() / "stcnn_test_reports";
  fs::create_directories(dir);
  write_per_frame_csv(dir / "per_frame.csv", {a, b});
  std::ifstream rows(dir / "per_frame.csv");
  std::string header, line;
  std::getline(rows, header);
  CHECK(header == "sequence,frame,J,F");
  int count = 0;
  while (std::getline(rows, line)) ++count;
  CHECK(count == 8);
  write_summary_csv(dir / "summary.csv", s);
  std::stringstream whole;
  whole << std::ifstream(dir / "summary.csv").rdbuf();
  CHECK(whole.str() == text);
  CHECK_THROWS_AS(summarize({}), ArgumentError);
}
