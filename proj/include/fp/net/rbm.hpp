#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace fp::net {

// Discriminative RBM head over the pooled CNN outputs. Energy
//   E(y, x, h) = -h^T W x - r^T x - s^T h - t^T e_y - h^T U e_y
// with binary hidden units; the class posterior has the closed form
//   p(y|x) ∝ exp(t_y + sum_j softplus(s_j + U_jy + W_j . x)).
// Two classes: index 0 = non-match, 1 = match.
struct RbmParams {
    int hidden = 64;
    int inputs = 24;
    std::vector<double> w;  // hidden x inputs, row-major
    std::vector<double> u;  // hidden x 2
    std::vector<double> r;  // inputs (absent from the posterior; zero gradient)
    std::vector<double> s;  // hidden
    std::vector<double> t;  // 2
};

RbmParams rbm_init(int hidden, int inputs, std::mt19937_64& rng, double scale = 0.05);

// (p_nonmatch, p_match); computed in log space with max subtraction.
std::array<double, 2> rbm_posterior(const RbmParams& p, const double* x);

struct RbmGrads {
    std::vector<double> w, u, r, s, t;
};
RbmGrads rbm_zero_grads(const RbmParams& p);

// Mean negative log posterior over the batch plus analytic gradients for
// {W, U, s, t}; r receives zero gradient. Returns the mean loss.
double rbm_loss_and_grad(const RbmParams& p, const std::vector<std::vector<double>>& xs,
                         const std::vector<int>& labels, RbmGrads& grads);

// Loss and dL/dx for one sample; used by the joint fine-tuning phase to push
// gradients back into the CNNs. grad_x must hold p.inputs entries.
double rbm_input_gradient(const RbmParams& p, const double* x, int label, double* grad_x,
                          RbmGrads* grads);

void rbm_sgd_step(RbmParams& p, const RbmGrads& grads, RbmGrads& velocity, double lr,
                  double momentum);

}  // namespace fp::net
