#include "mf2dfdr/statistics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mf2dfdr;
using namespace mf2dfdr::stats;
using samplers::Strategy;

namespace {

const std::vector<ColumnKind> kNoZ;

struct Data {
    Matrix x, y, z;
};

// n rows, m features of the requested kinds; z has one continuous column
// (or one binary column when binary_z).
Data make_data(std::mt19937_64& rng, Index n, Index m, bool binary_x, ColumnKind y_kind, bool binary_z) {
    std::normal_distribution<double> nd;
    std::bernoulli_distribution coin(0.5);
    Data d;
    d.z.resize(n, 1);
    d.x.resize(n, 1);
    d.y.resize(n, m);
    for (Index i = 0; i < n; ++i) {
        d.z(i, 0) = binary_z ? (coin(rng) ? 1.0 : 0.0) : nd(rng);
        const double lin = 0.5 * d.z(i, 0) + nd(rng);
        d.x(i, 0) = binary_x ? (lin > 0.2 ? 1.0 : 0.0) : lin;
        for (Index j = 0; j < m; ++j) {
            const double eta = 0.3 * d.x(i, 0) * (j % 2) + 0.4 * d.z(i, 0);
            switch (y_kind) {
                case ColumnKind::continuous: d.y(i, j) = eta + nd(rng); break;
                case ColumnKind::binary:
                    d.y(i, j) = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng) ? 1.0 : 0.0;
                    break;
                case ColumnKind::count: d.y(i, j) = std::poisson_distribution<int>(std::exp(0.5 + eta))(rng); break;
            }
        }
    }
    return d;
}

void expect_evaluator_matches_reference(const StatisticSpec& spec, const Data& d) {
    const auto ev = make_evaluator(spec, d.y, d.z);
    std::mt19937_64 rng(99);
    std::vector<Matrix> draws = {d.x};
    for (int k = 0; k < 3; ++k) {
        Matrix shuffled = d.x;
        std::vector<Index> perm(static_cast<std::size_t>(d.x.rows()));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Index i = 0; i < d.x.rows(); ++i) shuffled.row(i) = d.x.row(perm[static_cast<std::size_t>(i)]);
        draws.push_back(shuffled);
    }
    for (const auto& x : draws) {
        const auto draw = ev->prepare_draw(x);
        for (Index j = 0; j < d.y.cols(); ++j) {
            const auto feature = ev->prepare_feature(j);
            depstats::Warnings w1, w2;
            const StatPair fast = ev->evaluate(*draw, *feature, w1);
            const StatPair ref = compute_pair(spec, d.y.col(j), x, d.z, &w2);
            const double scale_m = std::max(1.0, std::abs(ref.t_m)), scale_c = std::max(1.0, std::abs(ref.t_c));
            EXPECT_NEAR(fast.t_m, ref.t_m, 1e-8 * scale_m) << spec.name() << " j=" << j;
            EXPECT_NEAR(fast.t_c, ref.t_c, 1e-8 * scale_c) << spec.name() << " j=" << j;
            EXPECT_EQ(w1.count, w2.count) << spec.name();
        }
    }
}

}  // namespace

TEST(Registry, ParsesEveryForm) {
    EXPECT_EQ(statistic_from_string("glm:gaussian").name(), "glm:gaussian");
    EXPECT_EQ(statistic_from_string("glm").name(), "glm:gaussian");
    EXPECT_EQ(statistic_from_string("glm:binomial").family.kind, glm::FamilyKind::binomial);
    EXPECT_EQ(statistic_from_string("glm:negbinom(3)").name(), "glm:negbinom(3)");
    EXPECT_EQ(statistic_from_string("rv").kind, StatKind::rv);
    EXPECT_EQ(statistic_from_string("hsic").kind, StatKind::hsic);
    EXPECT_EQ(statistic_from_string("categorical").kind, StatKind::categorical);
    const auto bw = statistic_from_string("basis-wald");
    EXPECT_EQ(bw.j1, 2);
    EXPECT_EQ(bw.j2, 3);
    const auto bw2 = statistic_from_string("basis-wald:1,4");
    EXPECT_EQ(bw2.j1, 1);
    EXPECT_EQ(bw2.j2, 4);
    EXPECT_EQ(bw2.name(), "basis-wald:1,4");
}

TEST(Registry, RejectsBadForms) {
    EXPECT_THROW(statistic_from_string("pearson"), ValidationError);
    EXPECT_THROW(statistic_from_string("glm:gamma"), ValidationError);
    EXPECT_THROW(statistic_from_string("basis-wald:2"), ValidationError);
    EXPECT_THROW(statistic_from_string("basis-wald:a,b"), ValidationError);
    EXPECT_THROW(statistic_from_string("basis-wald:0,1"), ValidationError);
    StatisticSpec s;
    s.kernel.epsilon = -1;
    EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Compatibility, SamplerAndCovariateKind) {
    const auto glm = statistic_from_string("glm:gaussian");
    EXPECT_NO_THROW(check_compatibility(glm, Strategy::permute, ColumnKind::continuous, ColumnKind::continuous, kNoZ, 1));
    EXPECT_NO_THROW(check_compatibility(glm, Strategy::parametric, ColumnKind::binary, ColumnKind::continuous, kNoZ, 1));
    EXPECT_THROW(check_compatibility(glm, Strategy::parametric, ColumnKind::continuous, ColumnKind::continuous, kNoZ, 1),
                 ValidationError);
    EXPECT_THROW(check_compatibility(glm, Strategy::parametric, ColumnKind::binary, ColumnKind::continuous, kNoZ, 2),
                 ValidationError);
    EXPECT_THROW(check_compatibility(glm, Strategy::permute, ColumnKind::binary, ColumnKind::continuous, kNoZ, 1),
                 ValidationError);
}

TEST(Compatibility, StatisticRules) {
    const auto hsic = statistic_from_string("hsic");
    EXPECT_THROW(check_compatibility(hsic, Strategy::parametric, ColumnKind::binary, ColumnKind::continuous, kNoZ, 1),
                 ValidationError);
    const auto cat = statistic_from_string("categorical");
    const std::vector<ColumnKind> bin_z = {ColumnKind::binary};
    EXPECT_NO_THROW(check_compatibility(cat, Strategy::parametric, ColumnKind::binary, ColumnKind::binary, bin_z, 1));
    EXPECT_THROW(check_compatibility(cat, Strategy::parametric, ColumnKind::binary, ColumnKind::count, bin_z, 1),
                 ValidationError);
    EXPECT_THROW(check_compatibility(cat, Strategy::parametric, ColumnKind::binary, ColumnKind::binary,
                                     {ColumnKind::continuous}, 1),
                 ValidationError);
    EXPECT_THROW(check_compatibility(statistic_from_string("glm:binomial"), Strategy::permute, ColumnKind::continuous,
                                     ColumnKind::count, kNoZ, 1),
                 ValidationError);
    EXPECT_THROW(check_compatibility(statistic_from_string("glm:poisson"), Strategy::permute, ColumnKind::continuous,
                                     ColumnKind::continuous, kNoZ, 1),
                 ValidationError);
    EXPECT_NO_THROW(check_compatibility(statistic_from_string("glm:poisson"), Strategy::permute, ColumnKind::continuous,
                                        ColumnKind::count, kNoZ, 1));
    EXPECT_THROW(check_compatibility(statistic_from_string("basis-wald:2,1"), Strategy::parametric, ColumnKind::binary,
                                     ColumnKind::continuous, kNoZ, 1),
                 ValidationError);
    EXPECT_NO_THROW(check_compatibility(statistic_from_string("basis-wald:1,2"), Strategy::parametric,
                                        ColumnKind::binary, ColumnKind::continuous, kNoZ, 1));
}

TEST(Evaluator, MatchesReferenceForEveryKind) {
    std::mt19937_64 rng(1);
    const Data cont = make_data(rng, 60, 4, false, ColumnKind::continuous, false);
    expect_evaluator_matches_reference(statistic_from_string("glm:gaussian"), cont);
    expect_evaluator_matches_reference(statistic_from_string("rv"), cont);
    expect_evaluator_matches_reference(statistic_from_string("hsic"), cont);
    expect_evaluator_matches_reference(statistic_from_string("basis-wald:2,3"), cont);
    const Data counts = make_data(rng, 60, 4, false, ColumnKind::count, false);
    expect_evaluator_matches_reference(statistic_from_string("glm:poisson"), counts);
    expect_evaluator_matches_reference(statistic_from_string("glm:negbinom(3)"), counts);
    const Data bin = make_data(rng, 80, 4, true, ColumnKind::binary, true);
    expect_evaluator_matches_reference(statistic_from_string("glm:binomial"), bin);
    expect_evaluator_matches_reference(statistic_from_string("categorical"), bin);
}

TEST(Evaluator, RvWithLinearResidualization) {
    std::mt19937_64 rng(2);
    const Data d = make_data(rng, 50, 3, false, ColumnKind::continuous, false);
    auto spec = statistic_from_string("rv");
    spec.spline_df = 0;
    expect_evaluator_matches_reference(spec, d);
}

TEST(Evaluator, EmptyConfounders) {
    std::mt19937_64 rng(3);
    Data d = make_data(rng, 40, 3, false, ColumnKind::continuous, false);
    d.z = Matrix(40, 0);
    expect_evaluator_matches_reference(statistic_from_string("glm:gaussian"), d);
    expect_evaluator_matches_reference(statistic_from_string("rv"), d);
    expect_evaluator_matches_reference(statistic_from_string("basis-wald:2,2"), d);
}
