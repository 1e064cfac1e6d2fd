#include <catch2/catch_amalgamated.hpp>

#include "flowplan/autodiff.hpp"
#include "flowplan/nn.hpp"
#include "flowplan/rng.hpp"
#include "testutil.hpp"

using namespace flowplan;

TEST_CASE("grad of x^2 at x=3 is 6") {
    ParamStore store;
    store.create("x", Tensor::scalar(3.0));
    Tape tape;
    Var x = tape.param(store, "x");
    Var loss = tape.mul(x, x);
    tape.backward(loss);
    REQUIRE(store.grad("x").item() == Catch::Approx(6.0));
}

TEST_CASE("grad of mean(x*x) for x=[1,2] is [1,2]") {
    ParamStore store;
    store.create("x", Tensor({2}, {1.0, 2.0}));
    Tape tape;
    Var x = tape.param(store, "x");
    tape.backward(tape.reduce_mean(tape.mul(x, x)));
    REQUIRE(store.grad("x").values[0] == Catch::Approx(1.0));
    REQUIRE(store.grad("x").values[1] == Catch::Approx(2.0));
}

TEST_CASE("two-layer net gradients match finite differences") {
    Rng rng(7);
    ParamStore store;
    mlp_init(store, {"", {4, 8, 3}}, rng);
    Tensor input = rng.normal_tensor({5, 4});
    Tensor target = rng.normal_tensor({5, 3});

    auto loss_plain = [&]() {
        EvalCtx ctx{store};
        Tensor out = silu(mlp_forward(ctx, {"", {4, 8, 3}}, input));
        return mse(out, target);
    };

    store.zero_grads();
    Tape tape;
    TapeCtx ctx{tape, store};
    Var out = ctx.silu(mlp_forward(ctx, MlpSpec{"", {4, 8, 3}}, ctx.input(input)));
    Var diff = tape.sub(out, tape.constant(target));
    tape.backward(tape.reduce_mean(tape.mul(diff, diff)));

    auto res = testutil::finite_difference_check(store, loss_plain);
    INFO("worst " << res.worst_param);
    REQUIRE(res.max_rel_error <= 1e-4);
}

TEST_CASE("backward linearity: grad(a*f + b*g) == a*grad(f) + b*grad(g)") {
    Rng rng(11);
    Tensor x0 = rng.normal_tensor({3});
    const double alpha = 1.7, beta = -0.6;

    auto grads_of = [&](auto make_loss) {
        ParamStore store;
        store.create("x", x0);
        Tape tape;
        Var x = tape.param(store, "x");
        tape.backward(make_loss(tape, x));
        return store.grad("x").values;
    };

    // f = mean(x*x), g = mean(silu(x))
    auto gf = grads_of([](Tape& t, Var x) { return t.reduce_mean(t.mul(x, x)); });
    auto gg = grads_of([](Tape& t, Var x) { return t.reduce_mean(t.silu(x)); });
    auto gc = grads_of([&](Tape& t, Var x) {
        return t.add(t.scale(t.reduce_mean(t.mul(x, x)), alpha), t.scale(t.reduce_mean(t.silu(x)), beta));
    });
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(std::abs(gc[i] - (alpha * gf[i] + beta * gg[i])) <= 1e-12);
    }
}

TEST_CASE("backward twice without reset is an error") {
    ParamStore store;
    store.create("x", Tensor::scalar(2.0));
    Tape tape;
    Var loss = tape.mul(tape.param(store, "x"), tape.param(store, "x"));
    tape.backward(loss);
    REQUIRE_THROWS_AS(tape.backward(loss), std::runtime_error);
    tape.reset();
    REQUIRE(tape.size() == 0);
}

TEST_CASE("backward rejects non-scalar loss") {
    ParamStore store;
    store.create("x", Tensor({2}, {1.0, 2.0}));
    Tape tape;
    Var x = tape.param(store, "x");
    REQUIRE_THROWS_AS(tape.backward(tape.mul(x, x)), ShapeError);
}

TEST_CASE("parameters not reached by the loss keep zero gradients") {
    ParamStore store;
    store.create("used", Tensor::scalar(2.0));
    store.create("unused", Tensor::scalar(5.0));
    Tape tape;
    Var x = tape.param(store, "used");
    tape.backward(tape.mul(x, x));
    REQUIRE(store.grad("used").item() == Catch::Approx(4.0));
    REQUIRE(store.grad("unused").item() == 0.0);
}

TEST_CASE("matmul, concat, slice and rowwise-bias gradients match finite differences") {
    Rng rng(23);
    ParamStore store;
    store.create("w", rng.normal_tensor({3, 4}));
    store.create("b", rng.normal_tensor({6}));
    store.create("u", rng.normal_tensor({2, 2}));
    Tensor input = rng.normal_tensor({2, 3});

    auto forward = [&](auto& ctx) {
        auto x = ctx.input(input);
        auto h = ctx.matmul(x, ctx.param("w"));                    // [2x4]
        auto cat = ctx.concat_cols({h, ctx.param("u")});           // [2x6]
        auto y = ctx.silu(ctx.add_rowwise(cat, ctx.param("b")));   // [2x6]
        return y;
    };
    auto loss_plain = [&]() {
        EvalCtx ctx{store};
        return reduce_mean(mul(forward(ctx), forward(ctx))).item();
    };

    store.zero_grads();
    Tape tape;
    TapeCtx ctx{tape, store};
    Var y = forward(ctx);
    tape.backward(tape.reduce_mean(tape.mul(y, y)));

    auto res = testutil::finite_difference_check(store, loss_plain);
    INFO("worst " << res.worst_param);
    REQUIRE(res.max_rel_error <= 1e-4);

    // slice gradient: mean of a column slice
    store.zero_grads();
    Tape tape2;
    TapeCtx ctx2{tape2, store};
    Var h = ctx2.matmul(ctx2.input(input), ctx2.param("w"));
    tape2.backward(tape2.reduce_mean(ctx2.tape.slice_cols(h, 1, 2)));
    auto loss_slice = [&]() {
        EvalCtx ec{store};
        return reduce_mean(slice_cols(matmul(input, store.value("w")), 1, 2)).item();
    };
    auto res2 = testutil::finite_difference_check(store, loss_slice);
    REQUIRE(res2.max_rel_error <= 1e-4);
}
