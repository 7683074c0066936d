#pragma once

#include "maskvct/common.hpp"

namespace maskvct::ops {

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise layer normalization. `normalized` and `inv_std` are saved for
/// the backward pass.
struct LayerNormCache {
  Mat normalized;
  Vec inv_std;
};

Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache* cache);

/// Returns dX and accumulates into d_gain / d_bias.
Mat layer_norm_backward(const Mat& d_out, const LayerNormCache& cache, const Mat& gain,
                        Mat& d_gain, Mat& d_bias);

/// Row-wise softmax, numerically stabilized.
Mat softmax_rows(const Mat& x);
Vec log_softmax(const Vec& x);

}  // namespace maskvct::ops
