#include "tsvmorph/tensor_ops.hpp"

#include <algorithm>
#include <limits>

namespace tsvmorph {

namespace {

struct Geometry {
  Index n, c, h, w;
};

template <typename Scalar>
Geometry batched_geometry(const Tensor<Scalar>& x, const char* what) {
  if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2)};
  throw Error(Errc::ShapeMismatch, std::string(what) + " expects [N,C,H,W] or [C,H,W], got " +
                                       to_string(x.shape()));
}

Shape batched_shape(bool batched, Index n, Index c, Index h, Index w) {
  return batched ? Shape{n, c, h, w} : Shape{c, h, w};
}

// Unrolls every receptive field into a column: rows are (c, ki, kj), columns
// are (n, oy, ox).
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& x, const Geometry& g, int k, int stride, int pad,
                         Index oh, Index ow) {
  const Index positions = oh * ow;
  RowMatrix<Scalar> cols(g.c * k * k, g.n * positions);
  const Scalar* src = x.data();
  for (Index c = 0; c < g.c; ++c)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        Scalar* row = cols.row((c * k + ki) * k + kj).data();
        for (Index n = 0; n < g.n; ++n) {
          const Scalar* plane = src + (n * g.c + c) * g.h * g.w;
          Scalar* out = row + n * positions;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * stride - pad + ki;
            Scalar* dst = out + oy * ow;
            if (iy < 0 || iy >= g.h) {
              std::fill(dst, dst + ow, Scalar(0));
              continue;
            }
            const Scalar* line = plane + iy * g.w;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * stride - pad + kj;
              dst[ox] = (ix >= 0 && ix < g.w) ? line[ix] : Scalar(0);
            }
          }
        }
      }
  return cols;
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, Tensor<Scalar>& dx, const Geometry& g, int k, int stride,
            int pad, Index oh, Index ow) {
  const Index positions = oh * ow;
  Scalar* dst = dx.data();
  for (Index c = 0; c < g.c; ++c)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        const Scalar* row = cols.row((c * k + ki) * k + kj).data();
        for (Index n = 0; n < g.n; ++n) {
          Scalar* plane = dst + (n * g.c + c) * g.h * g.w;
          const Scalar* in = row + n * positions;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= g.h) continue;
            Scalar* line = plane + iy * g.w;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * stride - pad + kj;
              if (ix >= 0 && ix < g.w) line[ix] += in[oy * ow + ox];
            }
          }
        }
      }
}

template <typename Scalar>
void check_conv(const Geometry& g, const Tensor<Scalar>& kernels, int stride, int padding) {
  if (kernels.rank() != 4 || kernels.dim(1) != g.c || kernels.dim(2) != kernels.dim(3))
    throw Error(Errc::ShapeMismatch, "kernels " + to_string(kernels.shape()) +
                                         " do not match input channels " + std::to_string(g.c));
  if (stride < 1 || padding < 0) throw Error(Errc::ShapeMismatch, "stride must be >= 1, padding >= 0");
  const Index k = kernels.dim(2);
  if (g.h + 2 * padding < k || g.w + 2 * padding < k)
    throw Error(Errc::KernelLargerThanInput, "kernel " + std::to_string(k) + " exceeds padded input " +
                                                 std::to_string(g.h) + "x" + std::to_string(g.w));
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                      const Tensor<Scalar>& bias, int stride, int padding) {
  const Geometry g = batched_geometry(x, "conv2d");
  check_conv(g, kernels, stride, padding);
  const int k = static_cast<int>(kernels.dim(2));
  const Index f = kernels.dim(0);
  const Index oh = window_output_extent(g.h, k, stride, padding);
  const Index ow = window_output_extent(g.w, k, stride, padding);
  const Index positions = oh * ow;

  const RowMatrix<Scalar> cols = im2col(x, g, k, stride, padding, oh, ow);
  RowMatrix<Scalar> y(f, g.n * positions);
  y.noalias() = kernels.matrix(f, g.c * k * k) * cols;
  y.colwise() += bias.array().matrix();

  Tensor<Scalar> out(batched_shape(x.rank() == 4, g.n, f, oh, ow));
  for (Index n = 0; n < g.n; ++n)
    out.matrix(g.n * f, positions).middleRows(n * f, f) = y.middleCols(n * positions, positions);
  return out;
}

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                                    const Tensor<Scalar>& grad_out, int stride, int padding) {
  const Geometry g = batched_geometry(x, "conv2d");
  check_conv(g, kernels, stride, padding);
  const int k = static_cast<int>(kernels.dim(2));
  const Index f = kernels.dim(0);
  const Index oh = window_output_extent(g.h, k, stride, padding);
  const Index ow = window_output_extent(g.w, k, stride, padding);
  const Index positions = oh * ow;
  if (grad_out.size() != g.n * f * positions)
    throw Error(Errc::ShapeMismatch, "conv2d gradient has shape " + to_string(grad_out.shape()));

  RowMatrix<Scalar> dy(f, g.n * positions);
  for (Index n = 0; n < g.n; ++n)
    dy.middleCols(n * positions, positions) = grad_out.matrix(g.n * f, positions).middleRows(n * f, f);

  const RowMatrix<Scalar> cols = im2col(x, g, k, stride, padding, oh, ow);
  Conv2dGrads<Scalar> grads{Tensor<Scalar>(x.shape()), Tensor<Scalar>(kernels.shape()),
                            Tensor<Scalar>(Shape{f})};
  grads.kernels.matrix(f, g.c * k * k).noalias() = dy * cols.transpose();
  grads.bias.array() = dy.rowwise().sum().array();

  RowMatrix<Scalar> dcols(g.c * k * k, g.n * positions);
  dcols.noalias() = kernels.matrix(f, g.c * k * k).transpose() * dy;
  col2im(dcols, grads.input, g, k, stride, padding, oh, ow);
  return grads;
}

template <typename Scalar>
PoolResult<Scalar> pool2d(const Tensor<Scalar>& x, PoolKind kind, int size, int stride, int padding) {
  const Geometry g = batched_geometry(x, "pool2d");
  if (size < 1 || stride < 1 || padding < 0)
    throw Error(Errc::ShapeMismatch, "pool size and stride must be >= 1");
  if (g.h + 2 * padding < size || g.w + 2 * padding < size)
    throw Error(Errc::WindowLargerThanInput, "window " + std::to_string(size) + " exceeds padded input " +
                                                 std::to_string(g.h) + "x" + std::to_string(g.w));
  const Index oh = window_output_extent(g.h, size, stride, padding);
  const Index ow = window_output_extent(g.w, size, stride, padding);

  PoolResult<Scalar> res{Tensor<Scalar>(batched_shape(x.rank() == 4, g.n, g.c, oh, ow)), {}};
  if (kind == PoolKind::Max) res.argmax.resize(static_cast<std::size_t>(res.output.size()), -1);
  const Scalar* src = x.data();
  Scalar* dst = res.output.data();
  for (Index plane = 0; plane < g.n * g.c; ++plane) {
    const Index base = plane * g.h * g.w;
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox) {
        const Index y0 = std::max<Index>(oy * stride - padding, 0);
        const Index x0 = std::max<Index>(ox * stride - padding, 0);
        const Index y1 = std::min<Index>(oy * stride - padding + size, g.h);
        const Index x1 = std::min<Index>(ox * stride - padding + size, g.w);
        const Index o = (plane * oh + oy) * ow + ox;
        if (kind == PoolKind::Max) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          Index arg = -1;
          for (Index yy = y0; yy < y1; ++yy)
            for (Index xx = x0; xx < x1; ++xx) {
              const Index i = base + yy * g.w + xx;
              if (arg < 0 || src[i] > best) {
                best = src[i];
                arg = i;
              }
            }
          dst[o] = best;
          res.argmax[static_cast<std::size_t>(o)] = arg;
        } else {
          Scalar sum = 0;
          for (Index yy = y0; yy < y1; ++yy)
            for (Index xx = x0; xx < x1; ++xx) sum += src[base + yy * g.w + xx];
          dst[o] = sum / static_cast<Scalar>((y1 - y0) * (x1 - x0));
        }
      }
  }
  return res;
}

template <typename Scalar>
Tensor<Scalar> pool2d_backward(const Shape& input_shape, const PoolResult<Scalar>& forward,
                               const Tensor<Scalar>& grad_out, PoolKind kind, int size, int stride,
                               int padding) {
  Tensor<Scalar> dx(input_shape);
  if (grad_out.size() != forward.output.size())
    throw Error(Errc::ShapeMismatch, "pool gradient has shape " + to_string(grad_out.shape()));
  if (kind == PoolKind::Max) {
    for (Index o = 0; o < grad_out.size(); ++o) dx[forward.argmax[static_cast<std::size_t>(o)]] += grad_out[o];
    return dx;
  }
  const Geometry g = batched_geometry(dx, "pool2d");
  const Index oh = window_output_extent(g.h, size, stride, padding);
  const Index ow = window_output_extent(g.w, size, stride, padding);
  for (Index plane = 0; plane < g.n * g.c; ++plane) {
    const Index base = plane * g.h * g.w;
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox) {
        const Index y0 = std::max<Index>(oy * stride - padding, 0);
        const Index x0 = std::max<Index>(ox * stride - padding, 0);
        const Index y1 = std::min<Index>(oy * stride - padding + size, g.h);
        const Index x1 = std::min<Index>(ox * stride - padding + size, g.w);
        const Scalar share = grad_out[(plane * oh + oy) * ow + ox] / static_cast<Scalar>((y1 - y0) * (x1 - x0));
        for (Index yy = y0; yy < y1; ++yy)
          for (Index xx = x0; xx < x1; ++xx) dx[base + yy * g.w + xx] += share;
      }
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> batch_norm(const Tensor<Scalar>& x, BatchNormState<Scalar>& state, Mode mode,
                          BatchNormCache<Scalar>* cache) {
  if (x.rank() < 2) throw Error(Errc::ShapeMismatch, "batch_norm expects [N, C, ...]");
  const Index n = x.dim(0), c = x.dim(1), spatial = x.size() / (n * c);
  if (state.gamma.size() != c)
    throw Error(Errc::ShapeMismatch, "batch_norm has " + std::to_string(state.gamma.size()) +
                                         " channels, input has " + std::to_string(c));
  if (mode == Mode::Train && n < 2)
    throw Error(Errc::SingletonBatchInTrainMode, "train-mode batch normalization needs N >= 2");

  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Array mean(c), var(c);
  const Index count = n * spatial;
  if (mode == Mode::Train) {
    mean.setZero();
    var.setZero();
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch)
        mean[ch] += Eigen::Map<const Array>(x.data() + (b * c + ch) * spatial, spatial).sum();
    mean /= static_cast<Scalar>(count);
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch)
        var[ch] += (Eigen::Map<const Array>(x.data() + (b * c + ch) * spatial, spatial) - mean[ch]).square().sum();
    var /= static_cast<Scalar>(count);
    const auto m = static_cast<Scalar>(state.momentum);
    const Scalar unbias = count > 1 ? static_cast<Scalar>(count) / static_cast<Scalar>(count - 1) : Scalar(1);
    state.running_mean.array() = m * state.running_mean.array() + (Scalar(1) - m) * mean;
    state.running_var.array() = m * state.running_var.array() + (Scalar(1) - m) * var * unbias;
  } else {
    mean = state.running_mean.array();
    var = state.running_var.array();
  }
  const Array inv_std = (var + static_cast<Scalar>(state.epsilon)).rsqrt();

  Tensor<Scalar> xhat(x.shape()), y(x.shape());
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (b * c + ch) * spatial;
      auto xh = Eigen::Map<Array>(xhat.data() + off, spatial);
      xh = (Eigen::Map<const Array>(x.data() + off, spatial) - mean[ch]) * inv_std[ch];
      Eigen::Map<Array>(y.data() + off, spatial) = xh * state.gamma[ch] + state.beta[ch];
    }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = inv_std;
    cache->mode = mode;
  }
  return y;
}

template <typename Scalar>
BatchNormGrads<Scalar> batch_norm_backward(const BatchNormState<Scalar>& state,
                                           const BatchNormCache<Scalar>& cache,
                                           const Tensor<Scalar>& grad_out) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Tensor<Scalar>& xhat = cache.normalized;
  if (grad_out.shape() != xhat.shape())
    throw Error(Errc::ShapeMismatch, "batch_norm gradient has shape " + to_string(grad_out.shape()));
  const Index n = xhat.dim(0), c = xhat.dim(1), spatial = xhat.size() / (n * c);
  const auto count = static_cast<Scalar>(n * spatial);

  BatchNormGrads<Scalar> g{Tensor<Scalar>(xhat.shape()), Tensor<Scalar>(Shape{c}), Tensor<Scalar>(Shape{c})};
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (b * c + ch) * spatial;
      const auto dy = Eigen::Map<const Array>(grad_out.data() + off, spatial);
      g.beta[ch] += dy.sum();
      g.gamma[ch] += (dy * Eigen::Map<const Array>(xhat.data() + off, spatial)).sum();
    }
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (b * c + ch) * spatial;
      const auto dy = Eigen::Map<const Array>(grad_out.data() + off, spatial);
      auto dx = Eigen::Map<Array>(g.input.data() + off, spatial);
      const Scalar scale = state.gamma[ch] * cache.inv_std[ch];
      if (cache.mode == Mode::Eval) {
        dx = dy * scale;
      } else {
        // dx = gamma*inv_std/M * (M*dy - sum(dy) - x_hat*sum(dy*x_hat))
        const auto xh = Eigen::Map<const Array>(xhat.data() + off, spatial);
        dx = scale / count * (count * dy - g.beta[ch] - xh * g.gamma[ch]);
      }
    }
  return g;
}

template <typename Scalar>
Tensor<Scalar> dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng) {
  Tensor<Scalar> mask(shape);
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < mask.size(); ++i) mask[i] = unit(rng) >= rate ? keep : Scalar(0);
  return mask;
}

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double rate, Mode mode, std::uint64_t seed) {
  if (mode == Mode::Eval || rate == 0.0) return x;
  std::mt19937_64 rng(seed);
  Tensor<Scalar> out = dropout_mask<Scalar>(x.shape(), rate, rng);
  out.array() *= x.array();
  return out;
}

#define TSVMORPH_INSTANTIATE(S)                                                                    \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, int);     \
  template Conv2dGrads<S> conv2d_backward(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,  \
                                          int, int);                                              \
  template PoolResult<S> pool2d(const Tensor<S>&, PoolKind, int, int, int);                      \
  template Tensor<S> pool2d_backward(const Shape&, const PoolResult<S>&, const Tensor<S>&,       \
                                     PoolKind, int, int, int);                                    \
  template Tensor<S> batch_norm(const Tensor<S>&, BatchNormState<S>&, Mode, BatchNormCache<S>*); \
  template BatchNormGrads<S> batch_norm_backward(const BatchNormState<S>&,                       \
                                                 const BatchNormCache<S>&, const Tensor<S>&);     \
  template Tensor<S> dropout_mask(const Shape&, double, std::mt19937_64&);                       \
  template Tensor<S> dropout(const Tensor<S>&, double, Mode, std::uint64_t);

TSVMORPH_INSTANTIATE(float)
TSVMORPH_INSTANTIATE(double)

#undef TSVMORPH_INSTANTIATE

}  // namespace tsvmorph
