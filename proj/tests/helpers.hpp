#pragma once

#include <memory>

#include "purify/experiments.hpp"

namespace testing_support {

using namespace purify;

inline std::shared_ptr<const Mat> haar(int d, std::uint64_t seed) {
  return std::make_shared<const Mat>(sample_unitary(d, seed));
}

inline std::shared_ptr<const Mat> identity(int d) {
  return std::make_shared<const Mat>(Mat::Identity(d, d));
}

inline SparseModel small_model(int d, int k, double zeta, std::uint64_t seed = 1) {
  return SparseModel::with_defaults(haar(d, seed), k, zeta, NoiseConvention::ScaledByDim);
}

inline Rng rng(std::uint64_t sub) { return make_stream(12345, 0, Stream::Check, sub); }

// Random dense net with an optional explicit matrix head.
inline GatedNetwork random_dense(int d, int H, double gate, Rng& r, bool matrix_head = false) {
  std::normal_distribution<double> n;
  Mat W(d, H);
  for (int j = 0; j < H; ++j)
    for (int i = 0; i < d; ++i) W(i, j) = n(r);
  Vec b = Vec::Constant(H, gate);
  if (matrix_head) {
    Mat A(H, d);
    for (int j = 0; j < d; ++j)
      for (int h = 0; h < H; ++h) A(h, j) = n(r) / std::sqrt(static_cast<double>(H));
    MatrixHead mh;
    mh.A = A;
    return GatedNetwork::dense(W, b, mh);
  }
  Vec a(H);
  for (int h = 0; h < H; ++h) a(h) = n(r);
  return GatedNetwork::dense(W, b, ScalarHead{a});
}

inline Vec randn(int d, Rng& r) {
  std::normal_distribution<double> n;
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = n(r);
  return v;
}

}  // namespace testing_support
