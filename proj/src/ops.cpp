#include "maskvct/ops.hpp"

#include <cmath>

namespace maskvct::ops {

Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache* cache) {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Mat normalized(n, x.cols());
  Vec inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).sum() / d;
    const auto centered = (x.row(r).array() - mean).matrix();
    const double var = centered.squaredNorm() / d;
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(r) = centered * inv_std(r);
  }
  Mat out = (normalized.array().rowwise() * gain.row(0).array()).matrix();
  out.rowwise() += bias.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Mat layer_norm_backward(const Mat& d_out, const LayerNormCache& cache, const Mat& gain,
                        Mat& d_gain, Mat& d_bias) {
  const double d = static_cast<double>(d_out.cols());
  d_gain.row(0) += (d_out.array() * cache.normalized.array()).colwise().sum().matrix();
  d_bias.row(0) += d_out.colwise().sum();
  const Mat d_norm = (d_out.array().rowwise() * gain.row(0).array()).matrix();
  Mat dx(d_out.rows(), d_out.cols());
  for (Eigen::Index r = 0; r < d_out.rows(); ++r) {
    const double mean_dn = d_norm.row(r).sum() / d;
    const double mean_dn_n = d_norm.row(r).dot(cache.normalized.row(r)) / d;
    dx.row(r) = cache.inv_std(r) *
                (d_norm.row(r).array() - mean_dn - cache.normalized.row(r).array() * mean_dn_n)
                    .matrix();
  }
  return dx;
}

Mat softmax_rows(const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Vec log_softmax(const Vec& x) {
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  return (x.array() - lse).matrix();
}

}  // namespace maskvct::ops
