// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failing criteria.

#include "mf2dfdr/depstats.hpp"
#include "mf2dfdr/engine.hpp"
#include "mf2dfdr/glm.hpp"
#include "mf2dfdr/sim.hpp"
#include "oracles.hpp"
#include "properties.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace mf2dfdr;

namespace {

// Tolerances and limits.
constexpr double kSeMultiplier = 2.0;
constexpr double kHsicTol = 1e-10;
constexpr double kRvTol = 1e-12;
constexpr double kMhTol = 1e-10;
constexpr double kChiSquareTarget = 6.6667;
constexpr double kChiSquareTol = 1e-3;
constexpr double kScoreTol = 1e-6;
constexpr double kOlsTol = 1e-10;
constexpr double kWaldMeanRelTol = 0.10;
constexpr double kGlobalNullZeroShare = 0.95;
constexpr int kPropertyCases = 100;

struct Verdict {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double limit_seconds, const std::function<Verdict()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    while (v.detail.size() >= 2 && v.detail.compare(v.detail.size() - 2, 2, "; ") == 0) v.detail.resize(v.detail.size() - 2);
    std::ostringstream os;
    os.precision(4);
    os << v.detail << "; " << secs << " s (limit " << limit_seconds << " s)";
    if (secs >= limit_seconds) v.pass = false;
    if (!v.pass) ++failures;
    std::printf("%s [%d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), os.str().c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
}

Vector normal_vector(std::mt19937_64& rng, Index n) { return props::normal_vector(rng, n); }

Verdict cutoff_oracle() {
    std::mt19937_64 rng(2024);
    int mismatches = 0, checks = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::uniform_int_distribution<int> m_dist(1, 30), b_dist(1, 10), g_dist(2, 39);
        const auto t = oracle::random_tensor(rng, m_dist(rng), b_dist(rng));
        const auto g = engine::make_grid(t, {engine::GridKind::quantile, g_dist(rng)});
        if (g.t1_values.size() > 40 || g.t2_values.size() > 40) return {false, "grid larger than 40x40"};
        for (double q : {0.05, 0.1, 0.2, 0.5}) {
            checks += 3;
            if (engine::optimal_cutoff(t, g, q).rejected !=
                oracle::brute_force_scan(t, g.t1_values, g.t2_values, q, false).rejected)
                ++mismatches;
            if (engine::fwer_cutoff(t, g, q).rejected !=
                oracle::brute_force_scan(t, g.t1_values, g.t2_values, q, true).rejected)
                ++mismatches;
            if (engine::one_dim_cutoff(t, g, q).rejected !=
                oracle::brute_force_scan(t, {0.0}, g.t2_values, q, false).rejected)
                ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(checks) + " comparisons"};
}

// Fully null tensors whose rows are i.i.d., walked along a fixed diagonal path.
Verdict exchangeable_control() {
    const Index m = 50, b = 19;
    const int reps = 1000;
    const double q = 0.1;
    engine::MonotonePath path;
    for (int s = 0; s < 60; ++s) path.points.emplace_back(0.2 * s, 0.2 * s);
    std::mt19937_64 rng(7);
    std::chi_squared_distribution<double> chi(1.0);
    std::vector<double> fdp;
    fdp.reserve(reps);
    for (int rep = 0; rep < reps; ++rep) {
        Matrix tm(b + 1, m), tc(b + 1, m);
        for (Index r = 0; r <= b; ++r)
            for (Index j = 0; j < m; ++j) {
                tm(r, j) = chi(rng);
                tc(r, j) = 0.6 * tm(r, j) + chi(rng);
            }
        const auto t = StatTensor::from_arrays(tm, tc);
        fdp.push_back(engine::exchangeable_path(t, path, q).rejected.empty() ? 0.0 : 1.0);
    }
    const auto [mean, se] = sim::detail::mean_se(fdp);
    return {mean <= q + kSeMultiplier * se, "FDR " + fmt(mean) + " (se " + fmt(se) + ", bound " +
                                                fmt(q + kSeMultiplier * se) + ")"};
}

sim::SimConfig dgp1_config(double rho, int reps) {
    sim::SimConfig c;
    c.dgp = 1;
    c.n = 100;
    c.m = 500;
    c.rho = rho;
    c.pi = 0.1;
    c.l = 0.3;
    c.reps = reps;
    c.seed = 11;
    c.procedure.q = 0.05;
    c.sampler.b_count = 100;
    c.sampler.strategy = sim::default_sampler_for(1);
    c.statistic = sim::default_statistic_for(1);
    c.threads = 1;
    return c;
}

Verdict simulation_reproduction() {
    std::ostringstream os;
    bool pass = true;
    double gap[2] = {0, 0};
    int k = 0;
    for (double rho : {0.1, 1.0}) {
        auto c = dgp1_config(rho, 50);
        c.methods = {engine::Method::mf2d_fdr, engine::Method::mf1d};
        const auto res = sim::run_experiment(c);
        const auto& two = res.summaries[0];
        const auto& one = res.summaries[1];
        const bool fdr_ok = two.empirical_fdr <= c.procedure.q + kSeMultiplier * two.fdr_se;
        const bool power_ok = two.empirical_power >= one.empirical_power;
        int per_rep_violations = 0;
        for (std::size_t r = 0; r < two.per_rep.size(); ++r)
            if (two.per_rep[r].rejections < one.per_rep[r].rejections) ++per_rep_violations;
        const bool complete = two.reps_completed == c.reps && one.reps_completed == c.reps;
        pass = pass && fdr_ok && power_ok && per_rep_violations == 0 && complete;
        gap[k++] = two.empirical_power - one.empirical_power;
        os << "rho=" << rho << ": (a) FDR " << fmt(two.empirical_fdr) << " se " << fmt(two.fdr_se) << (fdr_ok ? "" : " [over]")
           << ", (b) power " << fmt(two.empirical_power) << " vs " << fmt(one.empirical_power)
           << ", per-rep violations " << per_rep_violations << (complete ? "" : ", incomplete reps") << "; ";
    }
    const bool gap_ok = gap[1] > gap[0];
    os << "(c) gap " << fmt(gap[0]) << " -> " << fmt(gap[1]) << (gap_ok ? "" : " [not increasing]");
    return {pass && gap_ok, os.str()};
}

Verdict global_null() {
    auto c = dgp1_config(1.0, 200);
    c.pi_alpha = 0.0;
    c.seed = 31;
    c.methods = {engine::Method::mf2d_fdr, engine::Method::mf1d};
    const auto res = sim::run_experiment(c);
    bool pass = true;
    std::ostringstream os;
    for (const auto& s : res.summaries) {
        int zero = 0;
        for (const auto& r : s.per_rep) zero += r.rejections == 0 ? 1 : 0;
        const double share = static_cast<double>(zero) / std::max(1, s.reps_completed);
        pass = pass && share >= kGlobalNullZeroShare && s.reps_completed == c.reps;
        os << engine::to_string(s.method) << " zero-rejection share " << fmt(share) << " (" << zero << "/"
           << s.reps_completed << "); ";
    }
    return {pass, os.str()};
}

Verdict statistic_oracles() {
    std::mt19937_64 rng(5);
    double hsic_err = 0, rv_err = 0, mh_err = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const Vector x = normal_vector(rng, 30);
        const Vector y = x.array().square().matrix() + normal_vector(rng, 30);
        double sx = 0, sy = 0;
        depstats::gaussian_kernel(Matrix(x), depstats::Bandwidth::median(), &sx);
        depstats::gaussian_kernel(Matrix(y), depstats::Bandwidth::median(), &sy);
        hsic_err = std::max(hsic_err, std::abs(depstats::hsic(Matrix(x), Matrix(y)) -
                                               oracle::hsic_double_sum(Matrix(x), Matrix(y), sx, sy)));
        const Vector xc = x.array() - x.mean(), yc = y.array() - y.mean();
        const double r = xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
        rv_err = std::max(rv_err, std::abs(depstats::rv_coefficient(Matrix(x), Matrix(y)) - r * r));
        const Vector xb = props::binary_vector(rng, 50), yb = props::binary_vector(rng, 50);
        mh_err = std::max(mh_err, std::abs(depstats::mantel_haenszel(xb, yb, Matrix(0, 0)) -
                                           49.0 / 50.0 * depstats::pearson_chi_square(xb, yb)));
    }
    // [[10,20],[20,10]] as 60 paired binary observations.
    Vector cx(60), cy(60);
    for (Index i = 0; i < 60; ++i) {
        cx(i) = i < 30 ? 0.0 : 1.0;
        cy(i) = (i < 10 || (i >= 30 && i < 50)) ? 0.0 : 1.0;
    }
    const double chi = depstats::pearson_chi_square(cx, cy);
    const bool pass = hsic_err <= kHsicTol && rv_err <= kRvTol && mh_err <= kMhTol &&
                      std::abs(chi - kChiSquareTarget) <= kChiSquareTol;
    return {pass, "hsic err " + fmt(hsic_err) + ", rv err " + fmt(rv_err) + ", MH err " + fmt(mh_err) +
                      ", chi-square " + fmt(chi)};
}

Verdict glm_checks() {
    std::mt19937_64 rng(8);
    double worst_score = 0, worst_fd = 0, ols_err = 0;
    const glm::Family families[] = {glm::Family::binomial(), glm::Family::poisson(), glm::Family::negbinom(3.0)};
    for (const auto& fam : families) {
        for (int rep = 0; rep < 5; ++rep) {
            const Index n = 80;
            Matrix d(n, 3);
            d.col(0).setOnes();
            d.col(1) = normal_vector(rng, n);
            d.col(2) = normal_vector(rng, n);
            const Vector eta = 0.2 + 0.4 * d.col(1).array() - 0.3 * d.col(2).array();
            Vector y(n);
            for (Index i = 0; i < n; ++i) {
                if (fam.kind == glm::FamilyKind::binomial)
                    y(i) = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta(i))))(rng) ? 1.0 : 0.0;
                else
                    y(i) = std::poisson_distribution<int>(std::exp(eta(i)))(rng);
            }
            const auto fit = glm::irls(d, y, fam);
            if (!fit.converged) return {false, fam.name() + " did not converge"};
            worst_score = std::max(worst_score, glm::score(d, y, fam, fit.coef).norm());
            Vector fd(3);
            for (Index c = 0; c < 3; ++c) {
                const double h = 1e-5;
                Vector up = fit.coef, dn = fit.coef;
                up(c) += h;
                dn(c) -= h;
                fd(c) = (glm::log_likelihood(d, y, fam, up) - glm::log_likelihood(d, y, fam, dn)) / (2 * h);
            }
            worst_fd = std::max(worst_fd, fd.norm() / static_cast<double>(n));
        }
    }
    for (int rep = 0; rep < 5; ++rep) {
        Matrix d(40, 3);
        d.col(0).setOnes();
        d.col(1) = normal_vector(rng, 40);
        d.col(2) = normal_vector(rng, 40);
        const Vector y = d * Vector::LinSpaced(3, -1, 2) + normal_vector(rng, 40);
        const auto g = glm::irls(d, y, glm::Family::gaussian());
        ols_err = std::max(ols_err, (g.coef - glm::ols(d, y).coef).cwiseAbs().maxCoeff());
    }
    // Null basis-wald: y depends on z only, inside the confounder basis.
    const int j1 = 2, j2 = 3, reps = 2000;
    const Index n = 200;
    double sum = 0;
    for (int rep = 0; rep < reps; ++rep) {
        const Vector z = normal_vector(rng, n);
        const Vector x = 0.7 * z + normal_vector(rng, n);
        const Vector y = 0.5 * z + normal_vector(rng, n);
        sum += depstats::basis_wald_pair(y, Matrix(x), Matrix(z), j1, j2).t_c;
    }
    const double mean = sum / reps;
    const bool wald_ok = std::abs(mean - j1) <= kWaldMeanRelTol * j1;
    const bool pass = worst_score <= kScoreTol && worst_fd <= kScoreTol && ols_err <= kOlsTol && wald_ok;
    return {pass, "max score norm " + fmt(worst_score) + ", max finite-difference gradient/n " + fmt(worst_fd) +
                      ", gaussian-vs-OLS " + fmt(ols_err) + ", null T^C mean " + fmt(mean) + " (J1=" +
                      std::to_string(j1) + ")"};
}

Verdict property_suites() {
    const std::pair<const char*, std::function<props::Outcome(int, std::uint64_t)>> suites[] = {
        {"fbar", props::fbar_monotone},
        {"bounded", props::statistics_bounded},
        {"row-permutation", props::row_permutation_symmetry},
        {"sampler-multiset", props::sampler_multisets},
        {"seed-determinism", props::seed_determinism},
        {"tensor-row-permutation", props::tensor_row_permutation},
        {"2d-dominates-1d", props::two_dim_dominates_one_dim},
    };
    bool pass = true;
    std::ostringstream os;
    std::uint64_t seed = 100;
    for (const auto& [name, fn] : suites) {
        const auto o = fn(kPropertyCases, seed++);
        const bool ok = o.cases >= kPropertyCases && o.failures == 0;
        pass = pass && ok;
        os << name << " " << o.cases - o.failures << "/" << o.cases;
        if (!ok) os << " (" << o.first_failure << ")";
        os << "; ";
    }
    return {pass, os.str()};
}

Verdict fwer_variant() {
    auto c = dgp1_config(1.0, 100);
    c.seed = 53;
    c.methods = {engine::Method::mf2d_fwer};
    const auto res = sim::run_experiment(c);
    const auto& s = res.summaries[0];
    const double bound = c.procedure.q + kSeMultiplier * s.fwer_se;
    return {s.empirical_fwer <= bound && s.reps_completed == c.reps,
            "FWER " + fmt(s.empirical_fwer) + " (se " + fmt(s.fwer_se) + ", bound " + fmt(bound) + "), power " +
                fmt(s.empirical_power) + ", reps " + std::to_string(s.reps_completed)};
}

}  // namespace

int main() {
    report(1, "cutoff search matches brute force", 60, cutoff_oracle);
    report(2, "exchangeable path controls FDR under the global null", 120, exchangeable_control);
    report(3, "DGP 1 simulation: FDR, power dominance, gap grows with rho", 600, simulation_reproduction);
    report(4, "global null gives no rejections", 180, global_null);
    report(5, "statistic oracles", 30, statistic_oracles);
    report(6, "GLM numerical checks", 60, glm_checks);
    report(7, "property suites", 120, property_suites);
    report(8, "mf2d-fwer controls FWER", 300, fwer_variant);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures;
}
