#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reliatta/optim.hpp"
#include "reliatta/rng.hpp"

using namespace reliatta;

TEST_SUITE_BEGIN("optim");

TEST_CASE("zero gradient and zero decay leave parameters untouched") {
    ParameterBlock p("p", 3, 1);
    p.value = {1.0, -2.0, 0.5};
    AdamW opt({&p});
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    cfg.weight_decay = 0.0;
    CHECK(opt.step(cfg));
    CHECK(p.value == Vec{1.0, -2.0, 0.5});
}

TEST_CASE("first step moves by roughly -lr * sign(g)") {
    ParameterBlock p("p", 1, 1);
    p.grad[0] = 1.0;
    AdamW opt({&p});
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    cfg.weight_decay = 0.0;
    CHECK(opt.step(cfg));
    CHECK(std::abs(p.value[0] + 1e-3) < 1e-9);
    CHECK(p.grad[0] == 0.0);  // gradients reset after application
}

TEST_CASE("a quadratic bowl descends monotonically and tracks the reference") {
    // Loss 0.5 * sum((theta - target)^2); gradient theta - target.
    const Vec target{2.0, -1.0, 0.5, 3.0};
    ParameterBlock p("p", 4, 1);
    AdamW opt({&p});
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;

    std::vector<double> ref_theta(4, 0.0);
    oracles::RefAdamW ref(4);

    auto loss = [&](const Vec& theta) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += 0.5 * (theta[i] - target[i]) * (theta[i] - target[i]);
        return s;
    };

    double previous = loss(p.value);
    for (int step = 0; step < 100; ++step) {
        Vec g(4);
        for (int i = 0; i < 4; ++i) {
            g[i] = p.value[i] - target[i];
            p.grad[i] = g[i];
        }
        CHECK(opt.step(cfg));
        ref.step(ref_theta, g, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(p.value[i] - ref_theta[i]) < 1e-8);
        const double current = loss(p.value);
        CHECK(current <= previous + 1e-12);
        previous = current;
    }
    CHECK(previous < 1.0);
}

TEST_CASE("weight decay is decoupled from the moment update") {
    ParameterBlock p("p", 1, 1);
    p.value[0] = 10.0;
    AdamW opt({&p});
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    CHECK(opt.step(cfg));  // zero gradient: only decay acts
    CHECK(p.value[0] == doctest::Approx(10.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("non-finite gradients abort the step and keep parameters") {
    ParameterBlock p("p", 2, 1);
    p.value = {1.0, 2.0};
    p.grad = {0.5, std::numeric_limits<double>::quiet_NaN()};
    AdamW opt({&p});
    AdamWConfig cfg;
    CHECK(!opt.step(cfg));
    CHECK(p.value == Vec{1.0, 2.0});
    CHECK(opt.steps() == 0);
}

TEST_CASE("frozen blocks are skipped but their gradients are cleared") {
    ParameterBlock p("p", 1, 1);
    p.trainable = false;
    p.value[0] = 4.0;
    p.grad[0] = 100.0;
    AdamW opt({&p});
    AdamWConfig cfg;
    cfg.lr = 1.0;
    CHECK(opt.step(cfg));
    CHECK(p.value[0] == 4.0);
    CHECK(p.grad[0] == 0.0);
}

TEST_SUITE_END();
