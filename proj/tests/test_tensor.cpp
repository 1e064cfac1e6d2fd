#include <catch2/catch_amalgamated.hpp>

#include "flowplan/tensor.hpp"

using namespace flowplan;

TEST_CASE("matmul identity leaves matrix unchanged") {
    Tensor id({3, 3});
    for (std::size_t i = 0; i < 3; ++i) id.at(i, i) = 1.0;
    Tensor a({3, 3}, {2, -1, 0.5, 3, 7, 1, -4, 0, 9});
    Tensor out = matmul(id, a);
    for (std::size_t i = 0; i < 9; ++i) REQUIRE(out.values[i] == a.values[i]);
}

TEST_CASE("elementwise add") {
    Tensor a({2}, {1, 2});
    Tensor b({2}, {3, 4});
    Tensor c = add(a, b);
    REQUIRE(c.values == std::vector<double>{4, 6});
}

TEST_CASE("reduce_mean") {
    Tensor a({3}, {2, 4, 6});
    REQUIRE(reduce_mean(a).item() == Catch::Approx(4.0));
}

TEST_CASE("shape mismatch names the op and both shapes") {
    Tensor a({2}, {1, 2});
    Tensor b({3}, {1, 2, 3});
    try {
        add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        REQUIRE(e.op() == "add");
        REQUIRE(std::string(e.what()).find("[2]") != std::string::npos);
        REQUIRE(std::string(e.what()).find("[3]") != std::string::npos);
    }
    REQUIRE_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST_CASE("checked construction rejects non-finite values") {
    REQUIRE_THROWS(Tensor::checked({2}, {1.0, std::nan("")}));
    REQUIRE_THROWS(Tensor::checked({1}, {INFINITY}));
    REQUIRE_NOTHROW(Tensor::checked({2}, {0.0, -1.5}));
    REQUIRE_THROWS(Tensor({2}, {1.0, 2.0, 3.0}));
}

TEST_CASE("concat and slice on columns round-trip") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {5, 6});
    Tensor c = concat_cols({a, b});
    REQUIRE(c.shape == std::vector<std::size_t>{2, 3});
    REQUIRE(c.values == std::vector<double>{1, 2, 5, 3, 4, 6});
    Tensor back = slice_cols(c, 0, 2);
    REQUIRE(back.values == a.values);
    REQUIRE(slice_cols(c, 2, 1).values == b.values);
}

TEST_CASE("silu values") {
    Tensor x({3}, {-100.0, 0.0, 100.0});
    Tensor y = silu(x);
    REQUIRE(y.values[0] == Catch::Approx(0.0).margin(1e-30));
    REQUIRE(y.values[1] == 0.0);
    REQUIRE(y.values[2] == Catch::Approx(100.0));
}

TEST_CASE("matmul rectangular") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    REQUIRE(c.shape == std::vector<std::size_t>{2, 2});
    REQUIRE(c.values == std::vector<double>{58, 64, 139, 154});
}
