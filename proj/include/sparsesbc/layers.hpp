#pragma once

// Minimal dense/convolutional building blocks with hand-written backward
// passes. Feature maps are (channels x height*width) row-major matrices, i.e.
// planar CHW storage.

#include <Eigen/Core>

#include <cmath>

namespace sparsesbc::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using FeatureMap = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Geometry of a strided convolution from (in_h, in_w) to (out_h, out_w). The
// transposed convolution reuses it with the roles of input and output swapped.
struct ConvGeometry {
    int in_channels = 0;
    int out_channels = 0;
    int in_h = 0;
    int in_w = 0;
    int out_h = 0;
    int out_w = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;

    int patch_size() const { return in_channels * kernel * kernel; }
};

// (in_channels*k*k) x (out_h*out_w) patch matrix.
template <typename S>
Matrix<S> im2col(const FeatureMap<S>& input, const ConvGeometry& g)
{
    Matrix<S> cols = Matrix<S>::Zero(g.patch_size(), g.out_h * g.out_w);
    for (int c = 0; c < g.in_channels; ++c) {
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                const int row = (c * g.kernel + ky) * g.kernel + kx;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.padding + ky;
                    if (iy < 0 || iy >= g.in_h) {
                        continue;
                    }
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.padding + kx;
                        if (ix < 0 || ix >= g.in_w) {
                            continue;
                        }
                        cols(row, oy * g.out_w + ox) = input(c, iy * g.in_w + ix);
                    }
                }
            }
        }
    }
    return cols;
}

// Adjoint of im2col: scatters patch columns back onto the input grid.
template <typename S>
FeatureMap<S> col2im(const Matrix<S>& cols, const ConvGeometry& g)
{
    FeatureMap<S> out = FeatureMap<S>::Zero(g.in_channels, g.in_h * g.in_w);
    for (int c = 0; c < g.in_channels; ++c) {
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                const int row = (c * g.kernel + ky) * g.kernel + kx;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.padding + ky;
                    if (iy < 0 || iy >= g.in_h) {
                        continue;
                    }
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.padding + kx;
                        if (ix < 0 || ix >= g.in_w) {
                            continue;
                        }
                        out(c, iy * g.in_w + ix) += cols(row, oy * g.out_w + ox);
                    }
                }
            }
        }
    }
    return out;
}

template <typename S>
S leaky_relu(S x, S slope)
{
    return x > S(0) ? x : slope * x;
}

template <typename S>
S leaky_relu_grad(S pre, S slope)
{
    return pre > S(0) ? S(1) : slope;
}

template <typename S>
S sigmoid(S x)
{
    return S(1) / (S(1) + std::exp(-x));
}

} // namespace sparsesbc::nn
