#include "mf2dfdr/core.hpp"
#include "mf2dfdr/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace mf2dfdr;

namespace {

Dataset small_dataset() {
    Dataset ds;
    ds.x = Matrix::Random(10, 1);
    ds.y = Matrix::Random(10, 5);
    ds.z = Matrix::Random(10, 1);
    ds.z_kind = {ColumnKind::continuous};
    return ds;
}

}  // namespace

TEST(Validate, WellFormedDatasetHasNoViolations) { EXPECT_TRUE(validate(small_dataset()).empty()); }

TEST(Validate, NanNamesItsCell) {
    auto ds = small_dataset();
    ds.y(2, 3) = std::numeric_limits<double>::quiet_NaN();
    const auto v = validate(ds);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].matrix, "y");
    EXPECT_EQ(v[0].row, 2);
    EXPECT_EQ(v[0].col, 3);
}

TEST(Validate, BinaryDomain) {
    auto ds = small_dataset();
    ds.x = Matrix::Zero(10, 1);
    ds.x(4, 0) = 0.5;
    ds.x_kind = ColumnKind::binary;
    EXPECT_EQ(validate(ds).size(), 1u);
}

TEST(Validate, CountDomainAndRowMismatch) {
    auto ds = small_dataset();
    ds.y = Matrix::Ones(10, 2);
    ds.y(0, 1) = -1;
    ds.y_kind = ColumnKind::count;
    EXPECT_EQ(validate(ds).size(), 1u);
    ds.y = Matrix::Ones(9, 2);
    EXPECT_FALSE(validate(ds).empty());
    EXPECT_THROW(require_valid(ds), ValidationError);
}

TEST(Validate, TooFewRows) {
    Dataset ds;
    ds.x = Matrix::Ones(2, 1);
    ds.y = Matrix::Ones(2, 1);
    EXPECT_FALSE(validate(ds).empty());
}

TEST(StatTensor, SliceReturnsObservedFirst) {
    Matrix tm(3, 3), tc(3, 3);
    tm << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    tc = tm * 2;
    const auto t = StatTensor::from_arrays(tm, tc);
    const auto s = tensor_slice_feature(t, 1);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0], (StatPair{2, 4}));
    EXPECT_EQ(s[2], (StatPair{8, 16}));
    EXPECT_THROW(tensor_slice_feature(t, 3), std::out_of_range);
}

TEST(StatTensor, IdenticalRowsGiveEqualPairs) {
    Matrix tm = Matrix::Constant(3, 2, 1.5), tc = Matrix::Constant(3, 2, 0.5);
    const auto t = StatTensor::from_arrays(tm, tc);
    const auto s = tensor_slice_feature(t, 0);
    EXPECT_EQ(s[0], s[1]);
    EXPECT_EQ(s[1], s[2]);
}

TEST(StatTensor, RejectsInvalidPairs) {
    StatTensor t({5, 2, 1, 1, 0});
    EXPECT_THROW(t.set(0, 0, {-1.0, 0.0}), NumericalError);
    EXPECT_THROW(t.set(0, 0, {std::numeric_limits<double>::infinity(), 0.0}), NumericalError);
    EXPECT_THROW(t.set(2, 0, {1.0, 1.0}), std::out_of_range);
    EXPECT_THROW(StatTensor({5, 2, 0, 1, 0}), ValidationError);
}

TEST(StatTensor, RejectedAtSkipsDegenerate) {
    Matrix tm(2, 3), tc(2, 3);
    tm << 3, 3, 0, 1, 1, 1;
    tc = tm;
    auto t = StatTensor::from_arrays(tm, tc);
    EXPECT_EQ(rejected_at(t, 0, 0).size(), 3u);
    t.mark_degenerate(2);
    EXPECT_EQ(rejected_at(t, 0, 0), (std::vector<Index>{0, 1}));
    EXPECT_EQ(rejected_at(t, 2, 2), (std::vector<Index>{0, 1}));
}

TEST(Rng, SubstreamIsPureAndSpreads) {
    EXPECT_EQ(rng::substream(7, 3), rng::substream(7, 3));
    EXPECT_NE(rng::substream(7, 3), rng::substream(7, 4));
    EXPECT_NE(rng::substream(7, 3), rng::substream(8, 3));
    EXPECT_NE(rng::substream(7, "sampler"), rng::substream(7, "data"));
    auto a = rng::make_engine(11), b = rng::make_engine(11);
    EXPECT_EQ(a(), b());
}

TEST(ColumnKind, RoundTrip) {
    for (auto k : {ColumnKind::continuous, ColumnKind::binary, ColumnKind::count})
        EXPECT_EQ(column_kind_from_string(to_string(k)), k);
    EXPECT_THROW(column_kind_from_string("ordinal"), ValidationError);
}
