#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fp/net/rbm.hpp"
#include "oracles.hpp"

using namespace fp::net;

namespace {

RbmParams random_params(int hidden, int inputs, std::uint64_t seed, double scale = 0.6) {
    std::mt19937_64 rng(seed);
    RbmParams p = rbm_init(hidden, inputs, rng, scale);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : p.r) v = g(rng);
    for (auto& v : p.s) v = g(rng);
    for (auto& v : p.t) v = g(rng);
    return p;
}

std::vector<double> random_x(int inputs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(inputs);
    for (auto& v : x) v = u(rng);
    return x;
}

}  // namespace

TEST_CASE("symmetric parameters give even odds; a t-gap gives the logistic") {
    std::mt19937_64 rng(1);
    RbmParams p = rbm_init(4, 6, rng, 0.0);  // zero W and U
    std::vector<double> x = random_x(6, rng);
    auto post = rbm_posterior(p, x.data());
    CHECK(post[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(post[1] == doctest::Approx(0.5).epsilon(1e-12));

    // boost the match class by 1: p_match = e / (e + 1)
    p.t[1] = 1.0;
    auto boosted = rbm_posterior(p, x.data());
    CHECK(boosted[1] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-12));
    CHECK(boosted[0] == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)).epsilon(1e-12));
}

TEST_CASE("closed-form posterior equals exhaustive Boltzmann marginalization") {
    std::mt19937_64 rng(7);
    for (int hidden = 1; hidden <= 10; ++hidden) {
        for (int draw = 0; draw < 5; ++draw) {
            RbmParams p = random_params(hidden, 5 + draw, 1000 + hidden * 50 + draw);
            std::vector<double> x = random_x(p.inputs, rng);
            auto fast = rbm_posterior(p, x.data());
            auto slow = oracle::rbm_posterior_exhaustive(p, x.data());
            CHECK(std::fabs(fast[0] - slow[0]) <= 1e-10);
            CHECK(std::fabs(fast[1] - slow[1]) <= 1e-10);
            CHECK(fast[0] + fast[1] == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss endpoints: confident prediction and uniform posterior") {
    std::mt19937_64 rng(3);
    RbmParams p = rbm_init(4, 6, rng, 0.0);
    std::vector<double> x = random_x(6, rng);

    p.t[1] = 40.0;  // overwhelming evidence for the match class
    RbmGrads g = rbm_zero_grads(p);
    const double confident = rbm_loss_and_grad(p, {x}, {1}, g);
    CHECK(confident < 1e-12);

    p.t[1] = 0.0;
    RbmGrads g2 = rbm_zero_grads(p);
    const double uniform = rbm_loss_and_grad(p, {x}, {1}, g2);
    CHECK(uniform == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences at H=6") {
    RbmParams p = random_params(6, 8, 42);
    std::mt19937_64 rng(11);
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (int i = 0; i < 5; ++i) {
        xs.push_back(random_x(8, rng));
        ys.push_back(i % 2);
    }

    RbmGrads g = rbm_zero_grads(p);
    rbm_loss_and_grad(p, xs, ys, g);

    std::vector<double*> params;
    std::vector<double> analytic;
    auto collect = [&](std::vector<double>& vec, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < vec.size(); ++i) {
            params.push_back(&vec[i]);
            analytic.push_back(grad[i]);
        }
    };
    collect(p.w, g.w);
    collect(p.u, g.u);
    collect(p.s, g.s);
    collect(p.t, g.t);

    auto loss = [&] {
        RbmGrads scratch = rbm_zero_grads(p);
        return rbm_loss_and_grad(p, xs, ys, scratch);
    };
    CHECK(oracle::fd_max_rel_error(params, analytic, loss) < 1e-6);

    // r never appears in the posterior: zero gradient by construction
    for (double v : g.r) CHECK(v == 0.0);
    double r_saved = p.r[0];
    p.r[0] = r_saved + 10.0;
    RbmGrads g3 = rbm_zero_grads(p);
    const double shifted = rbm_loss_and_grad(p, xs, ys, g3);
    p.r[0] = r_saved;
    RbmGrads g4 = rbm_zero_grads(p);
    CHECK(shifted == doctest::Approx(rbm_loss_and_grad(p, xs, ys, g4)).epsilon(1e-12));
}

TEST_CASE("input gradients match finite differences") {
    RbmParams p = random_params(5, 7, 77);
    std::mt19937_64 rng(13);
    std::vector<double> x = random_x(7, rng);

    std::vector<double> dx(7, 0.0);
    rbm_input_gradient(p, x.data(), 1, dx.data(), nullptr);

    std::vector<double*> params;
    for (auto& v : x) params.push_back(&v);
    auto loss = [&] {
        return rbm_input_gradient(p, x.data(), 1, nullptr, nullptr);
    };
    CHECK(oracle::fd_max_rel_error(params, dx, loss) < 1e-6);
}

TEST_CASE("sgd step moves parameters along the negative gradient") {
    RbmParams p = random_params(4, 5, 9);
    std::mt19937_64 rng(15);
    std::vector<std::vector<double>> xs{random_x(5, rng), random_x(5, rng)};
    std::vector<int> ys{1, 0};
    RbmGrads g = rbm_zero_grads(p);
    const double before = rbm_loss_and_grad(p, xs, ys, g);
    RbmGrads vel = rbm_zero_grads(p);
    for (int i = 0; i < 20; ++i) {
        RbmGrads gi = rbm_zero_grads(p);
        rbm_loss_and_grad(p, xs, ys, gi);
        rbm_sgd_step(p, gi, vel, 0.1, 0.5);
    }
    RbmGrads g2 = rbm_zero_grads(p);
    const double after = rbm_loss_and_grad(p, xs, ys, g2);
    CHECK(after < before);
}
