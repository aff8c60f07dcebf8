#pragma once

#include <cstdint>
#include <vector>

#include "fp/net/tensor.hpp"

namespace fp::net {

// Plain stride-1 convolution kernels shared by every conv layer (3x3 padded
// mid-layers, adaptive unpadded final layers, the 3x3 combine layer). All
// kernels are single-threaded and accumulate in a fixed order; parallelism
// lives above them at the patch/model level.

template <typename T>
void conv2d_forward(const T* in, int n, int ci, int h, int w, const T* weight, const T* bias,
                    int co, int k, int pad, T* out);

template <typename T>
void conv2d_backward(const T* in, int n, int ci, int h, int w, const T* weight, int co, int k,
                     int pad, const T* grad_out, T* grad_in, T* grad_weight, T* grad_bias);

template <typename T>
void relu_forward(const T* in, std::size_t count, T* out);

template <typename T>
void relu_backward(const T* in, const T* grad_out, std::size_t count, T* grad_in);

// 2x2 max pooling, stride 2; argmax offsets (within each channel plane)
// recorded for the backward pass.
template <typename T>
void maxpool2_forward(const T* in, int n, int c, int h, int w, T* out, std::int32_t* argmax);

template <typename T>
void maxpool2_backward_planes(const std::int32_t* argmax, const T* grad_out, int planes,
                              std::size_t out_plane, std::size_t in_plane, T* grad_in);

template <typename T>
void fc_forward(const T* in, int n, int in_features, const T* weight, const T* bias,
                int out_features, T* out);

template <typename T>
void fc_backward(const T* in, int n, int in_features, const T* weight, int out_features,
                 const T* grad_out, T* grad_in, T* grad_weight, T* grad_bias);

// Inverted dropout with a per-call seed so an identical call reproduces the
// identical mask.
template <typename T>
void dropout_forward(const T* in, std::size_t count, double rate, std::uint64_t seed, T* out,
                     std::uint8_t* mask);

template <typename T>
void dropout_backward(const std::uint8_t* mask, const T* grad_out, std::size_t count, double rate,
                      T* grad_in);

// Row-wise softmax with max subtraction.
template <typename T>
void softmax_forward(const T* in, int n, int classes, T* out);

template <typename T>
void softmax_backward(const T* out, const T* grad_out, int n, int classes, T* grad_in);

}  // namespace fp::net
