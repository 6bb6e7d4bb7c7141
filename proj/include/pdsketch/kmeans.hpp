#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "pdsketch/common.hpp"

namespace pds {

class EmptyInput : public Error {
 public:
  EmptyInput() : Error("k-means: empty input") {}
};

class KTooLarge : public Error {
 public:
  KTooLarge(int k, int distinct)
      : Error("k-means: K=" + std::to_string(k) + " exceeds " + std::to_string(distinct) +
              " distinct points") {}
};

// Centroid table quantizing one predicate's latent value space. Assignment is
// nearest-centroid under Euclidean distance, ties to the lowest index.
struct Codebook {
  std::string predicate;
  int dim = 0;
  std::vector<std::vector<float>> centroids;

  int size() const { return int(centroids.size()); }

  int assign(const std::vector<float>& v) const {
    if (int(v.size()) != dim) throw ShapeMismatch("codebook " + predicate + " dim");
    int best = 0;
    double best_d = 1e300;
    for (size_t k = 0; k < centroids.size(); ++k) {
      double d = 0;
      for (int i = 0; i < dim; ++i) {
        double diff = double(v[size_t(i)]) - double(centroids[k][size_t(i)]);
        d += diff * diff;
      }
      if (d < best_d) {  // strict: ties keep the lowest index
        best_d = d;
        best = int(k);
      }
    }
    return best;
  }
};

namespace detail {

inline double sqdist(const std::vector<float>& a, const std::vector<float>& b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double diff = double(a[i]) - double(b[i]);
    d += diff * diff;
  }
  return d;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ style seeding from a fixed seed. Runs to
// convergence or 100 iterations; empty clusters restart on the farthest point.
inline Codebook fit_codebook(const std::string& predicate,
                             const std::vector<std::vector<float>>& features, int k,
                             uint64_t seed = 0, int max_iters = 100) {
  if (features.empty()) throw EmptyInput();
  std::vector<std::vector<float>> distinct;
  for (const auto& f : features)
    if (std::find(distinct.begin(), distinct.end(), f) == distinct.end())
      distinct.push_back(f);
  if (k > int(distinct.size())) throw KTooLarge(k, int(distinct.size()));
  if (k < 1) throw EmptyInput();

  Codebook cb;
  cb.predicate = predicate;
  cb.dim = int(features[0].size());

  Rng rng(seed);
  // k-means++ seeding over the distinct points
  cb.centroids.push_back(distinct[rng.below(distinct.size())]);
  std::vector<double> d2(distinct.size());
  while (int(cb.centroids.size()) < k) {
    double total = 0;
    for (size_t i = 0; i < distinct.size(); ++i) {
      double best = 1e300;
      for (const auto& c : cb.centroids) best = std::min(best, detail::sqdist(distinct[i], c));
      d2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total;
      double acc = 0;
      for (size_t i = 0; i < distinct.size(); ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
      // skip points that already are centroids (d2 == 0 contributes nothing)
      while (d2[pick] == 0 && pick + 1 < distinct.size()) ++pick;
    }
    cb.centroids.push_back(distinct[pick]);
  }

  std::vector<int> assign(features.size(), -1);
  double prev_obj = 1e300;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double obj = 0;
    for (size_t i = 0; i < features.size(); ++i) {
      int a = cb.assign(features[i]);
      obj += detail::sqdist(features[i], cb.centroids[size_t(a)]);
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    // the Lloyd objective never increases
    if (obj > prev_obj + 1e-9) throw EvalError("k-means objective increased");
    prev_obj = obj;
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sums(size_t(k), std::vector<double>(size_t(cb.dim), 0.0));
    std::vector<int> counts(size_t(k), 0);
    for (size_t i = 0; i < features.size(); ++i) {
      ++counts[size_t(assign[i])];
      for (int d = 0; d < cb.dim; ++d) sums[size_t(assign[i])][size_t(d)] += features[i][size_t(d)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[size_t(c)] == 0) {
        // restart an empty cluster on the farthest point
        size_t far = 0;
        double far_d = -1;
        for (size_t i = 0; i < features.size(); ++i) {
          double d = detail::sqdist(features[i], cb.centroids[size_t(assign[i])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        cb.centroids[size_t(c)] = features[far];
        continue;
      }
      for (int d = 0; d < cb.dim; ++d)
        cb.centroids[size_t(c)][size_t(d)] = float(sums[size_t(c)][size_t(d)] / counts[size_t(c)]);
    }
  }
  return cb;
}

// Optional straight-through finetune pass: one epoch of pulling each assigned
// centroid toward its members. Off by default in the compile pipeline.
inline void finetune_codebook(Codebook& cb, const std::vector<std::vector<float>>& features,
                              double lr = 0.05) {
  for (const auto& f : features) {
    int a = cb.assign(f);
    for (int d = 0; d < cb.dim; ++d) {
      float& c = cb.centroids[size_t(a)][size_t(d)];
      c += float(lr * (double(f[size_t(d)]) - double(c)));
    }
  }
}

}  // namespace pds
