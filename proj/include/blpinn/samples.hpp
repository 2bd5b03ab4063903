#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace blpinn {

struct Sample {
  double x, t, s;
};

struct InitialPoint {
  double x, s;
};

struct BoundaryPoint {
  double t;
  int side; // 0 -> x = x_min, 1 -> x = x_max
  double s;
};

struct CollocationPoint {
  double x, t;
};

// Labeled observations plus unlabeled collocation points.
struct SampleSet {
  std::vector<Sample> data;
  std::vector<InitialPoint> initial;
  std::vector<BoundaryPoint> boundary;
  std::vector<CollocationPoint> collocation;

  std::size_t n() const { return data.size(); }
  std::size_t n0() const { return initial.size(); }
  std::size_t nb() const { return boundary.size(); }
  std::size_t nr() const { return collocation.size(); }
};

// CSV with header `x,t,s,kind`; kind in {data, initial, boundary,
// collocation}. Collocation rows carry s=0 (unused).
void save_samples(const SampleSet& set, const std::string& path);
SampleSet load_samples(const std::string& path);

} // namespace blpinn
