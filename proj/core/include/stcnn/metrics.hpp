#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stcnn/data_model.hpp"

namespace stcnn {

/// Intersection over union of the foreground sets; 1 when both are empty.
double region_similarity(const Mask& s, const Mask& s_star);

/// Foreground pixels with at least one 4-neighbour that is background or
/// outside the image, as (y, x) pairs in raster order.
struct Pixel {
  int y = 0;
  int x = 0;
  bool operator==(const Pixel&) const = default;
};
std::vector<Pixel> boundary_pixels(const Mask& mask);

/// ceil(0.008 * image diagonal).
int boundary_radius(int height, int width);

struct ContourScore {
  double f = 0.0;
  double precision = 0.0;  // matched fraction of the prediction's boundary
  double recall = 0.0;     // matched fraction of the reference boundary
};

/// Boundary F-measure. A boundary pixel is matched when the other boundary
/// has a pixel within Chebyshev distance `radius` (default boundary_radius).
/// An empty boundary is vacuously matched: P = 1 for an empty prediction,
/// R = 1 for an empty reference.
ContourScore contour_accuracy(const Mask& s, const Mask& s_star, int radius = -1);

/// Mean over consecutive pairs of the symmetric mean nearest-boundary
/// distance after centroid alignment, divided by the image diagonal. A pair
/// with exactly one empty mask contributes 1. Needs >= 2 masks.
double temporal_instability(const std::vector<Mask>& masks);

struct Aggregate {
  double mean = 0.0;
  double recall = 0.0;  // fraction of values strictly above the threshold
  double decay = 0.0;   // first-quartile mean minus last-quartile mean
};

/// Quartile bins split at round(linspace(0, N, 5)); decay is 0 for N < 4.
Aggregate aggregate(const std::vector<double>& per_frame, double threshold = 0.5);

struct EvalProtocol {
  bool exclude_first = true;
  bool exclude_last = false;
};

struct MetricsReport {
  std::string sequence;
  std::vector<int> frames;  // evaluated frame indices
  std::vector<double> per_frame_j;
  std::vector<double> per_frame_f;
  double t = 0.0;  // 0 when fewer than two frames are evaluated
  Aggregate j;
  Aggregate f;
};

MetricsReport evaluate(const std::vector<Mask>& predictions, const std::vector<Mask>& gt,
                       const EvalProtocol& protocol = {}, const std::string& sequence = {});

/// Per-measure statistics averaged over sequences.
struct Summary {
  Aggregate j;
  Aggregate f;
  double t = 0.0;
  int sequences = 0;
};
Summary summarize(const std::vector<MetricsReport>& reports);

/// `sequence,frame,J,F` rows.
void write_per_frame_csv(const std::filesystem::path& path,
                         const std::vector<MetricsReport>& reports);
/// `measure,mean,recall,decay` rows for J and F, then T (mean only).
std::string format_summary(const Summary& summary);
void write_summary_csv(const std::filesystem::path& path, const Summary& summary);

}  // namespace stcnn
