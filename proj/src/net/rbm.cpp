#include "fp/net/rbm.hpp"

#include <algorithm>
#include <cmath>

namespace fp::net {

namespace {

inline double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Free energies F_y = t_y + sum_j softplus(a_jy), a_jy = s_j + U_jy + W_j.x.
struct Activations {
    std::array<double, 2> free_energy;
    std::vector<double> a;  // hidden x 2
};

Activations activations(const RbmParams& p, const double* x) {
    Activations act;
    act.a.resize(static_cast<std::size_t>(p.hidden) * 2);
    for (int y = 0; y < 2; ++y) act.free_energy[y] = p.t[y];
    for (int j = 0; j < p.hidden; ++j) {
        double wx = 0.0;
        const double* wr = p.w.data() + static_cast<std::size_t>(j) * p.inputs;
        for (int i = 0; i < p.inputs; ++i) wx += wr[i] * x[i];
        for (int y = 0; y < 2; ++y) {
            const double a = p.s[j] + p.u[static_cast<std::size_t>(j) * 2 + y] + wx;
            act.a[static_cast<std::size_t>(j) * 2 + y] = a;
            act.free_energy[y] += softplus(a);
        }
    }
    return act;
}

std::array<double, 2> posterior_from(const Activations& act) {
    const double m = std::max(act.free_energy[0], act.free_energy[1]);
    const double e0 = std::exp(act.free_energy[0] - m);
    const double e1 = std::exp(act.free_energy[1] - m);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

}  // namespace

RbmParams rbm_init(int hidden, int inputs, std::mt19937_64& rng, double scale) {
    RbmParams p;
    p.hidden = hidden;
    p.inputs = inputs;
    std::normal_distribution<double> gauss(0.0, scale);
    p.w.resize(static_cast<std::size_t>(hidden) * inputs);
    p.u.resize(static_cast<std::size_t>(hidden) * 2);
    p.r.assign(inputs, 0.0);
    p.s.assign(hidden, 0.0);
    p.t.assign(2, 0.0);
    for (auto& v : p.w) v = gauss(rng);
    for (auto& v : p.u) v = gauss(rng);
    return p;
}

std::array<double, 2> rbm_posterior(const RbmParams& p, const double* x) {
    return posterior_from(activations(p, x));
}

RbmGrads rbm_zero_grads(const RbmParams& p) {
    RbmGrads g;
    g.w.assign(p.w.size(), 0.0);
    g.u.assign(p.u.size(), 0.0);
    g.r.assign(p.r.size(), 0.0);
    g.s.assign(p.s.size(), 0.0);
    g.t.assign(p.t.size(), 0.0);
    return g;
}

double rbm_input_gradient(const RbmParams& p, const double* x, int label, double* grad_x,
                          RbmGrads* grads) {
    Activations act = activations(p, x);
    const std::array<double, 2> post = posterior_from(act);
    const double loss = -std::log(std::max(post[label], 1e-300));

    // dL/dF_y = p_y - [y == label]
    double dF[2] = {post[0], post[1]};
    dF[label] -= 1.0;

    if (grad_x) std::fill(grad_x, grad_x + p.inputs, 0.0);
    for (int j = 0; j < p.hidden; ++j) {
        const double* wr = p.w.data() + static_cast<std::size_t>(j) * p.inputs;
        double common = 0.0;  // sum_y dF_y * sigma(a_jy), multiplies W_j and x
        for (int y = 0; y < 2; ++y) {
            const double sg = sigmoid(act.a[static_cast<std::size_t>(j) * 2 + y]);
            const double d = dF[y] * sg;
            common += d;
            if (grads) grads->u[static_cast<std::size_t>(j) * 2 + y] += d;
        }
        if (grads) {
            grads->s[j] += common;
            double* gw = grads->w.data() + static_cast<std::size_t>(j) * p.inputs;
            for (int i = 0; i < p.inputs; ++i) gw[i] += common * x[i];
        }
        if (grad_x)
            for (int i = 0; i < p.inputs; ++i) grad_x[i] += common * wr[i];
    }
    if (grads) {
        grads->t[0] += dF[0];
        grads->t[1] += dF[1];
    }
    return loss;
}

double rbm_loss_and_grad(const RbmParams& p, const std::vector<std::vector<double>>& xs,
                         const std::vector<int>& labels, RbmGrads& grads) {
    double loss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        loss += rbm_input_gradient(p, xs[i].data(), labels[i], nullptr, &grads);
    const double inv = xs.empty() ? 1.0 : 1.0 / static_cast<double>(xs.size());
    for (auto& v : grads.w) v *= inv;
    for (auto& v : grads.u) v *= inv;
    for (auto& v : grads.s) v *= inv;
    for (auto& v : grads.t) v *= inv;
    return loss * inv;
}

void rbm_sgd_step(RbmParams& p, const RbmGrads& grads, RbmGrads& velocity, double lr,
                  double momentum) {
    auto step = [&](std::vector<double>& param, const std::vector<double>& g,
                    std::vector<double>& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            v[i] = momentum * v[i] - lr * g[i];
            param[i] += v[i];
        }
    };
    step(p.w, grads.w, velocity.w);
    step(p.u, grads.u, velocity.u);
    step(p.s, grads.s, velocity.s);
    step(p.t, grads.t, velocity.t);
}

}  // namespace fp::net
