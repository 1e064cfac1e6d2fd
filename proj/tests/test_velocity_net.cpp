#include <catch2/catch_amalgamated.hpp>

#include "flowplan/flow.hpp"
#include "flowplan/velocity_net.hpp"
#include "testutil.hpp"

using namespace flowplan;

namespace {
VelocityNetConfig tiny_config() {
    VelocityNetConfig cfg;
    cfg.state_dim = 4;
    cfg.cond_dim = 3;
    cfg.width = 8;
    cfg.depth = 2;
    cfg.time_dim = 8;
    return cfg;
}
}  // namespace

TEST_CASE("freshly initialized model has zero velocity everywhere") {
    Rng rng(5);
    VelocityModel model(tiny_config(), rng);
    Tensor x = rng.normal_tensor({3, 4});
    Tensor cond = rng.normal_tensor({3, 3});
    Tensor v = model.forward(0.37, x, cond);
    REQUIRE(v.shape == x.shape);
    for (double val : v.values) REQUIRE(val == 0.0);
}

TEST_CASE("forward is deterministic") {
    Rng rng(5);
    VelocityModel model(tiny_config(), rng);
    // make it non-trivial
    for (double& w : model.params().mutable_value("w_out").values) w = 0.01;
    Tensor x = rng.normal_tensor({2, 4});
    Tensor cond = rng.normal_tensor({2, 3});
    Tensor a = model.forward(0.5, x, cond);
    Tensor b = model.forward(0.5, x, cond);
    REQUIRE(a.values == b.values);
}

TEST_CASE("tape forward equals plain forward") {
    Rng rng(9);
    VelocityModel model(tiny_config(), rng);
    for (double& w : model.params().mutable_value("w_out").values) w = 0.05 * rng.normal();
    Tensor x = rng.normal_tensor({3, 4});
    Tensor cond = rng.normal_tensor({3, 3});
    std::vector<double> t{0.1, 0.6, 0.9};

    Tensor plain = model.forward(t, x, cond);
    Tape tape;
    Var v = model.forward_tape(tape, t, x, cond);
    REQUIRE(tape.value(v).values == plain.values);
}

TEST_CASE("velocity net gradients match finite differences") {
    Rng rng(13);
    VelocityModel model(tiny_config(), rng);
    for (double& w : model.params().mutable_value("w_out").values) w = 0.1 * rng.normal();
    Tensor x = rng.normal_tensor({3, 4});
    Tensor cond = rng.normal_tensor({3, 3});
    Tensor x0 = rng.normal_tensor({3, 4});
    Tensor x1 = rng.normal_tensor({3, 4});
    std::vector<double> t{0.2, 0.5, 0.8};

    model.params().zero_grads();
    Tape tape;
    tape.backward(fm_loss_tape(tape, model.forward_tape(tape, t, x, cond), x0, x1));

    auto res = testutil::finite_difference_check(model.params(),
                                                 [&] { return fm_loss(model.forward(t, x, cond), x0, x1); });
    INFO("worst " << res.worst_param);
    REQUIRE(res.max_rel_error <= 1e-4);
}

TEST_CASE("time embedding has unit-magnitude pairs and distinct rows") {
    Tensor e = time_embedding({0.0, 0.25, 1.0}, 8);
    REQUIRE(e.shape == std::vector<std::size_t>{3, 8});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double s = e.at(i, 2 * j), c = e.at(i, 2 * j + 1);
            REQUIRE(s * s + c * c == Catch::Approx(1.0));
        }
    }
    REQUIRE(e.at(0, 0) == 0.0);  // sin(0)
    REQUIRE(e.at(0, 1) == 1.0);  // cos(0)
    REQUIRE(linf_distance(slice_cols(e, 0, 8), time_embedding({0.0, 0.25, 1.0}, 8)) == 0.0);
}

TEST_CASE("wrong state dimension is rejected") {
    Rng rng(5);
    VelocityModel model(tiny_config(), rng);
    REQUIRE_THROWS_AS(model.forward(0.5, Tensor({2, 5}), Tensor({2, 3})), ShapeError);
}
