#include <gtest/gtest.h>
#include <omp.h>

#include "fadi/error.hpp"
#include "fadi/kernels.hpp"
#include "fadi/matrix.hpp"
#include "test_support.hpp"

using namespace fadi;
using fadi::testing::bitwise_equal;
using fadi::testing::uniform_matrix;

TEST(Matrix, ConstructionChecksSize) {
    EXPECT_THROW(Matrix(2, 3, std::vector<double>(5)), DataError);
    const Matrix m(2, 2, {1, 2, 3, 4});
    EXPECT_EQ(m(1, 0), 3.0);
    EXPECT_EQ(m.col(1), (std::vector<double>{2, 4}));
}

TEST(Matrix, AppendRowAdoptsWidth) {
    Matrix m;
    const std::vector<double> r{1, 2, 3};
    m.append_row(r);
    m.append_row(r);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    const std::vector<double> bad{1, 2};
    EXPECT_THROW(m.append_row(bad), DataError);
}

TEST(Matrix, IdentityAndShapeCheck) {
    const Matrix i = Matrix::identity(3);
    EXPECT_EQ(i(0, 0), 1.0);
    EXPECT_EQ(i(0, 1), 0.0);
    EXPECT_NO_THROW(require_shape(i, 3, 3, "id"));
    EXPECT_THROW(require_shape(i, 3, 2, "id"), DataError);
}

TEST(Matrix, CosineOfZeroVectorIsZero) {
    const std::vector<double> z{0, 0}, a{1, 0};
    EXPECT_EQ(cosine(z, a), 0.0);
    EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
}

TEST(Matrix, ChecksumSeesEveryByte) {
    Matrix a(3, 3, 1.0);
    const auto before = checksum(a);
    a(2, 2) = std::nextafter(1.0, 2.0);
    EXPECT_NE(before, checksum(a));
    EXPECT_NE(checksum(Matrix(1, 4, 0.0)), checksum(Matrix(4, 1, 0.0)));
}

TEST(Matrix, AllFinite) {
    Matrix a(2, 2, 0.0);
    EXPECT_TRUE(a.all_finite());
    a(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(a.all_finite());
}

// Shapes straddle the OpenMP threshold so both the serial and the threaded
// branch are exercised.
class KernelParity : public ::testing::TestWithParam<std::tuple<int, int, int>> {};

TEST_P(KernelParity, ParallelMatchesReferenceBitwise) {
    const auto [out, in, n] = GetParam();
    omp_set_num_threads(4);
    Rng rng = make_rng(static_cast<std::uint64_t>(out * 131 + in * 7 + n), 1);
    const Matrix w = uniform_matrix(out, in, rng);
    const Matrix b = uniform_matrix(out, 1, rng);
    const Matrix x = uniform_matrix(in, n, rng);
    const Matrix dy = uniform_matrix(out, n, rng);

    Matrix y1, y2;
    kernels::affine(w, b, x, y1);
    kernels::reference::affine(w, b, x, y2);
    EXPECT_TRUE(bitwise_equal(y1, y2));

    Matrix dw1, db1, dw2, db2;
    kernels::affine_weight_grad(dy, x, dw1, db1);
    kernels::reference::affine_weight_grad(dy, x, dw2, db2);
    EXPECT_TRUE(bitwise_equal(dw1, dw2));
    EXPECT_TRUE(bitwise_equal(db1, db2));

    Matrix dx1, dx2;
    kernels::affine_input_grad(w, dy, dx1);
    kernels::reference::affine_input_grad(w, dy, dx2);
    EXPECT_TRUE(bitwise_equal(dx1, dx2));

    Matrix p1, p2;
    kernels::cosine_logits(w, 20.0, x, p1);
    kernels::reference::cosine_logits(w, 20.0, x, p2);
    EXPECT_TRUE(bitwise_equal(p1, p2));

    Matrix cw1, cx1, cw2, cx2;
    kernels::cosine_backward(w, 20.0, x, dy, cw1, cx1);
    kernels::reference::cosine_backward(w, 20.0, x, dy, cw2, cx2);
    EXPECT_TRUE(bitwise_equal(cw1, cw2));
    EXPECT_TRUE(bitwise_equal(cx1, cx2));
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelParity,
                         ::testing::Values(std::make_tuple(1, 1, 1), std::make_tuple(4, 3, 5),
                                           std::make_tuple(10, 32, 9), std::make_tuple(32, 32, 512),
                                           std::make_tuple(64, 128, 256), std::make_tuple(7, 300, 1000)));

TEST(Kernels, ThreadCountDoesNotChangeResults) {
    Rng rng = make_rng(99, 2);
    const Matrix w = uniform_matrix(48, 64, rng);
    const Matrix x = uniform_matrix(64, 700, rng);
    Matrix ref;
    omp_set_num_threads(1);
    kernels::cosine_logits(w, 20.0, x, ref);
    for (int t : {2, 3, 8}) {
        omp_set_num_threads(t);
        Matrix p;
        kernels::cosine_logits(w, 20.0, x, p);
        EXPECT_TRUE(bitwise_equal(p, ref)) << t << " threads";
    }
}

TEST(Kernels, ShapeMismatchThrows) {
    Matrix y;
    EXPECT_THROW(kernels::affine(Matrix(2, 3), Matrix(2, 1), Matrix(4, 1), y), DataError);
    EXPECT_THROW(kernels::affine(Matrix(2, 3), Matrix(3, 1), Matrix(3, 1), y), DataError);
    Matrix p;
    EXPECT_THROW(kernels::cosine_logits(Matrix(2, 3), 20.0, Matrix(2, 1), p), DataError);
}
