#include <doctest.h>

#include <limits>
#include <sstream>

#include "gradinv/tensor.hpp"

using namespace gradinv;

TEST_CASE("tensor shape and data invariants") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(Tensor({0, 2}), ShapeError);
}

TEST_CASE("tensor finiteness guard") {
    Tensor t({2}, {1.0, 2.0});
    CHECK_NOTHROW(t.check_finite("test"));
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.check_finite("test"), NumericError);
}

TEST_CASE("elementwise helpers require matching shapes") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(add(a, b), ShapeError);
    Tensor c({2}, {3.0, 4.0});
    CHECK(add(a, c)[1] == 6.0);
    CHECK(sub(c, a)[0] == 2.0);
    CHECK(mul(a, c)[1] == 8.0);
    CHECK(dot(a, c) == 11.0);
    CHECK(l2_norm(Tensor({2}, {3.0, 4.0})) == doctest::Approx(5.0));
}

TEST_CASE("text round trip keeps full precision") {
    Tensor t({2, 2}, {1.0 / 3.0, -2.5e-17, 3.141592653589793, 1e300});
    Tensor back = tensor_from_string(tensor_to_string(t));
    REQUIRE(back.same_shape(t));
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
}

TEST_CASE("text format header") {
    Tensor t({3}, {1.0, 2.0, 3.0});
    std::string s = tensor_to_string(t);
    CHECK(s.rfind("tensor 1 3\n", 0) == 0);
    CHECK_THROWS_AS(tensor_from_string("vector 1 3\n1 2 3"), IoError);
    CHECK_THROWS_AS(tensor_from_string("tensor 1 3\n1 2"), IoError);
}
