#include <catch2/catch_amalgamated.hpp>

#include "flowplan/optim.hpp"

using namespace flowplan;

TEST_CASE("adamw with zero gradient and zero weight decay is the identity") {
    ParamStore store;
    store.create("w", Tensor::scalar(1.0));
    store.mark_grads_ready();
    AdamwConfig cfg;
    cfg.weight_decay = 0.0;
    store.adamw_step(0.1, cfg);
    REQUIRE(store.value("w").item() == 1.0);
}

TEST_CASE("first adamw step on w=0, g=1, lr=0.1 gives w = -0.1") {
    // bias-corrected m_hat = v_hat = 1, so the update is lr * 1/(1 + eps)
    ParamStore store;
    store.create("w", Tensor::scalar(0.0));
    store.accumulate_grad(store.slot("w"), Tensor::scalar(1.0));
    AdamwConfig cfg;
    cfg.weight_decay = 0.0;
    store.adamw_step(0.1, cfg);
    REQUIRE(store.value("w").item() == Catch::Approx(-0.1).epsilon(1e-6));
    REQUIRE(store.step_count() == 1);
    // gradients cleared by the step
    REQUIRE(store.grad("w").item() == 0.0);
    REQUIRE_FALSE(store.grads_ready());
}

TEST_CASE("identical stores and gradients update bitwise identically") {
    auto run = [] {
        ParamStore store;
        store.create("w", Tensor({3}, {0.5, -1.25, 2.0}));
        for (int s = 0; s < 5; ++s) {
            store.accumulate_grad(store.slot("w"), Tensor({3}, {0.1, -0.2, 0.3}));
            store.adamw_step(1e-3);
        }
        return store.value("w").values;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a == b);  // exact bit equality
}

TEST_CASE("adamw step on empty gradients is an error") {
    ParamStore store;
    store.create("w", Tensor::scalar(1.0));
    REQUIRE_THROWS_AS(store.adamw_step(0.1), std::runtime_error);
}

TEST_CASE("lr schedule: linear warmup then step decay") {
    LrSchedule sched;
    sched.base_lr = 1e-4;
    sched.warmup_steps = 1000;
    sched.decay_interval = 5000;
    sched.decay_factor = 0.5;
    REQUIRE(sched.at(500) == Catch::Approx(5e-5));
    REQUIRE(sched.at(1000) == Catch::Approx(1e-4));
    REQUIRE(sched.at(6000) == Catch::Approx(5e-5));
    REQUIRE(sched.at(11000) == Catch::Approx(2.5e-5));
}

TEST_CASE("lr schedule monotonicity: non-decreasing through warmup, non-increasing after") {
    LrSchedule sched;
    sched.base_lr = 3e-4;
    sched.warmup_steps = 100;
    sched.decay_interval = 250;
    sched.decay_factor = 0.7;
    for (std::size_t s = 1; s <= 100; ++s) REQUIRE(sched.at(s) >= sched.at(s - 1));
    for (std::size_t s = 101; s <= 2000; ++s) {
        REQUIRE(sched.at(s) <= sched.at(s - 1));
        REQUIRE(sched.at(s) > 0.0);
    }
}

TEST_CASE("weight decay is decoupled from the gradient") {
    // zero gradient + nonzero decay shrinks the weight by exactly lr*wd*w
    ParamStore store;
    store.create("w", Tensor::scalar(2.0));
    store.mark_grads_ready();
    AdamwConfig cfg;
    cfg.weight_decay = 0.01;
    store.adamw_step(0.1, cfg);
    REQUIRE(store.value("w").item() == Catch::Approx(2.0 - 0.1 * 0.01 * 2.0));
}
