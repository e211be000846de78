#include "ftrack/flux.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ftrack;

namespace {

State vec(std::initializer_list<double> xs)
{
    State s(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        s[i++] = x;
    return s;
}

State random_state(const FluxModel& m, std::mt19937_64& rng)
{
    State u(m.dim());
    for (int d = 0; d < m.dim(); ++d) {
        std::uniform_real_distribution<double> dist(m.domain().lo[d], m.domain().hi[d]);
        u[d] = dist(rng);
    }
    return u;
}

} // namespace

TEST(Jacobian, BurgersIsIdentityInU)
{
    BurgersModel m;
    Matrix a = jacobian(m, vec({0.7}));
    ASSERT_EQ(a.rows(), 1);
    EXPECT_DOUBLE_EQ(a(0, 0), 0.7);
}

TEST(Jacobian, RemarkSystemAtOrigin)
{
    Remark2x2Model m;
    Matrix a = jacobian(m, vec({0.0, 0.0}));
    Matrix expected(2, 2);
    expected << 0.0, 0.0, 0.0, 1.0;
    EXPECT_TRUE(a.isApprox(expected, 0.0) || (a - expected).norm() == 0.0);
}

TEST(Jacobian, LinearIsConstant)
{
    auto m = make_model("linear");
    const auto& lin = dynamic_cast<const LinearModel&>(*m);
    EXPECT_EQ((jacobian(*m, vec({1.0, -2.0})) - lin.matrix()).norm(), 0.0);
    EXPECT_EQ((jacobian(*m, vec({-3.0, 4.0})) - lin.matrix()).norm(), 0.0);
}

TEST(Jacobian, RejectsOutOfDomain)
{
    BurgersModel m;
    EXPECT_THROW(jacobian(m, vec({3.5})), DomainError);
}

TEST(Eigen, BurgersScalar)
{
    BurgersModel m;
    EigenSystem e = eig_decompose(m, vec({0.3}));
    EXPECT_DOUBLE_EQ(e.lambda(1), 0.3);
    EXPECT_DOUBLE_EQ(e.r(1)[0], 1.0);
    EXPECT_DOUBLE_EQ(e.l(1)[0], 1.0);
    EXPECT_DOUBLE_EQ(e.gnl_rate(1), 1.0);
}

TEST(Eigen, RemarkSpeedsAndGradient)
{
    Remark2x2Model m;
    const State u = vec({0.1, 0.2});
    EigenSystem e = eig_decompose(m, u);
    EXPECT_DOUBLE_EQ(e.lambda(1), 0.0);
    EXPECT_NEAR(e.lambda(2), 1.5, 1e-15);
    // Finite-difference gradient of lambda_2 against (1, 2).
    const double h = 1e-6;
    double d_u = (eig_decompose(m, u + vec({h, 0})).lambda(2) - eig_decompose(m, u - vec({h, 0})).lambda(2)) / (2 * h);
    double d_v = (eig_decompose(m, u + vec({0, h})).lambda(2) - eig_decompose(m, u - vec({0, h})).lambda(2)) / (2 * h);
    EXPECT_NEAR(d_u, 1.0, 1e-8);
    EXPECT_NEAR(d_v, 2.0, 1e-8);
}

TEST(Eigen, RemarkAtOriginHandSolved)
{
    Remark2x2Model m;
    EigenSystem e = eig_decompose(m, vec({0.0, 0.0}));
    EXPECT_NEAR(e.r(2)[0], 0.0, 1e-15);
    EXPECT_NEAR(e.r(2)[1], 1.0, 1e-15);
    EXPECT_NEAR(e.l(2)[0], 0.0, 1e-15);
    EXPECT_NEAR(e.l(2)[1], 1.0, 1e-15);
    EXPECT_NEAR(e.gnl_rate(2), 2.0, 1e-15);
}

TEST(Eigen, LambdaNormalizationMakesRateOne)
{
    PSystemModel m;
    EigenSystem e = eig_decompose(m, vec({1.2, 0.1})).lambda_normalized();
    EXPECT_EQ(e.normalization, Normalization::lambda);
    for (int k = 1; k <= 2; ++k)
        EXPECT_NEAR(m.grad_lambda(k, vec({1.2, 0.1})).dot(e.r(k)), 1.0, 1e-12);
    EXPECT_TRUE((e.left * e.right - Matrix::Identity(2, 2)).norm() < 1e-12);
}

TEST(Eigen, NumericPathMatchesAnalytic)
{
    Remark2x2Model rm;
    PSystemModel pm;
    std::mt19937_64 rng(7);
    for (const FluxModel* m : {static_cast<const FluxModel*>(&rm), static_cast<const FluxModel*>(&pm)}) {
        for (int t = 0; t < 200; ++t) {
            State u = random_state(*m, rng);
            std::vector<State> grads{m->grad_lambda(1, u), m->grad_lambda(2, u)};
            EigenSystem num = decompose_matrix(m->jacobian_at(u), m->field_kinds(), grads);
            EigenSystem ana = eig_decompose(*m, u);
            for (int k = 1; k <= 2; ++k) {
                EXPECT_NEAR(num.lambda(k), ana.lambda(k), 1e-10);
                EXPECT_LT((num.r(k) - ana.r(k)).norm(), 1e-10);
                EXPECT_LT((num.l(k) - ana.l(k)).norm(), 1e-10);
            }
        }
    }
}

TEST(Eigen, RandomStatesBiorthogonalAndGapped)
{
    std::mt19937_64 rng(11);
    for (const auto& id : catalog_ids()) {
        auto m = make_model(id);
        for (int t = 0; t < 10000; ++t) {
            State u = random_state(*m, rng);
            EigenSystem e = eig_decompose(*m, u);
            for (int k = 1; k < e.dim(); ++k)
                ASSERT_GE(e.lambda(k + 1) - e.lambda(k), m->declared_gap()) << id;
            ASSERT_LE((e.left * e.right - Matrix::Identity(e.dim(), e.dim())).cwiseAbs().maxCoeff(), 1e-10) << id;
            for (int k = 1; k <= e.dim(); ++k) {
                ASSERT_NEAR(e.r(k).norm(), 1.0, 1e-12) << id;
                ASSERT_GT(e.lambda(k), m->fences()[static_cast<std::size_t>(k - 1)]) << id;
                ASSERT_LT(e.lambda(k), m->fences()[static_cast<std::size_t>(k)]) << id;
                if (m->field_kind(k) == FieldKind::genuinely_nonlinear)
                    ASSERT_GT(e.gnl_rate(k), 0.0) << id;
            }
        }
    }
}

TEST(Eigen, DegenerateMatrixRejected)
{
    Matrix a(2, 2);
    a << 1.0, 0.0, 0.0, 1.0;
    EXPECT_THROW(decompose_matrix(a, {FieldKind::linearly_degenerate, FieldKind::linearly_degenerate}, {}), DegeneracyError);
    Matrix rot(2, 2);
    rot << 0.0, -1.0, 1.0, 0.0;
    EXPECT_THROW(decompose_matrix(rot, {FieldKind::linearly_degenerate, FieldKind::linearly_degenerate}, {}), DegeneracyError);
}

TEST(Average, BurgersSecant)
{
    BurgersModel m;
    EXPECT_NEAR(average_eigs(m, vec({0.0}), vec({1.0})).lambda(1), 0.5, 1e-15);
}

TEST(Average, ScalarSecantSlopes)
{
    CubicModel c;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (int t = 0; t < 1000; ++t) {
        const double a = d(rng);
        const double b = d(rng);
        if (a == b)
            continue;
        const double secant = (b * b * b / 3 - a * a * a / 3) / (b - a);
        EXPECT_NEAR(average_eigs(c, vec({a}), vec({b})).lambda(1), secant, 1e-12);
    }
}

TEST(Average, DegenerateSegmentMatchesPointwise)
{
    std::mt19937_64 rng(5);
    for (const auto& id : catalog_ids()) {
        auto m = make_model(id);
        for (int t = 0; t < 100; ++t) {
            State u = random_state(*m, rng);
            EigenSystem a = average_eigs(*m, u, u);
            EigenSystem e = eig_decompose(*m, u);
            for (int k = 1; k <= m->dim(); ++k) {
                EXPECT_NEAR(a.lambda(k), e.lambda(k), 1e-12);
                EXPECT_LT((a.r(k) - e.r(k)).norm(), 1e-12);
            }
        }
    }
}

TEST(Average, LinearModelIsConstant)
{
    auto m = make_model("linear");
    AveragedEigenSystem a = average_eigs(*m, vec({1.0, 2.0}), vec({-4.0, 0.5}));
    EigenSystem e = eig_decompose(*m, vec({0.0, 0.0}));
    EXPECT_NEAR(a.lambda(1), -0.5, 1e-14);
    EXPECT_NEAR(a.lambda(2), 0.5, 1e-14);
    EXPECT_LT((a.right - e.right).norm(), 1e-12);
}

TEST(Average, RemarkMatchesClosedForm)
{
    // A(uL, uR) = [[0, 0], [vbar, 1 + ubar + 2 vbar]] with midpoint averages.
    Remark2x2Model m;
    const State uL = vec({0.1, -0.05});
    const State uR = vec({-0.2, 0.25});
    Matrix expected(2, 2);
    const double ub = 0.5 * (uL[0] + uR[0]);
    const double vb = 0.5 * (uL[1] + uR[1]);
    expected << 0.0, 0.0, vb, 1.0 + ub + 2.0 * vb;
    AveragedEigenSystem a = average_eigs(m, uL, uR);
    EXPECT_LT((a.averaged - expected).norm(), 1e-15);
    EXPECT_NEAR(a.lambda(2), 1.0 + ub + 2.0 * vb, 1e-14);
    EXPECT_NEAR(a.l(2)[0], vb / (1.0 + ub + 2.0 * vb), 1e-12);
    EXPECT_NEAR(a.l(2)[1], 1.0, 1e-12);
}

TEST(Average, LipschitzUnderPerturbation)
{
    PSystemModel m;
    const State uL = vec({1.0, 0.0});
    const State uR = vec({1.3, -0.2});
    AveragedEigenSystem base = average_eigs(m, uL, uR);
    double worst = 0.0;
    for (double d : {1e-3, 1e-4, 1e-5, 1e-6}) {
        AveragedEigenSystem p = average_eigs(m, uL + vec({d, d}), uR);
        double diff = 0.0;
        for (int k = 1; k <= 2; ++k)
            diff = std::max({diff, std::abs(p.lambda(k) - base.lambda(k)), (p.r(k) - base.r(k)).norm()});
        worst = std::max(worst, diff / (d * std::sqrt(2.0)));
    }
    EXPECT_LT(worst, 10.0);
}

TEST(Audit, CatalogModelsPass)
{
    for (const auto& id : catalog_ids()) {
        auto m = make_model(id);
        GnlAuditReport r = gnl_audit(*m, m->dim() == 1 ? 101 : 41);
        EXPECT_TRUE(r.ok()) << id;
    }
}

TEST(Audit, BurgersRateIsOne)
{
    BurgersModel m;
    GnlAuditReport r = gnl_audit(m, 11);
    EXPECT_DOUBLE_EQ(r.families[0].min_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.families[0].max_rate, 1.0);
}

TEST(Audit, RemarkRates)
{
    Remark2x2Model m;
    GnlAuditReport r = gnl_audit(m, 21);
    EXPECT_EQ(r.families[0].min_rate, 0.0);
    EXPECT_EQ(r.families[0].max_rate, 0.0);
    EXPECT_DOUBLE_EQ(r.families[1].min_rate, 2.0);
    EXPECT_DOUBLE_EQ(r.families[1].max_rate, 2.0);
}

TEST(Audit, MisdeclaredFieldKindFails)
{
    Matrix mm(2, 2);
    mm << 0.5, 1.0, 0.0, -0.5;
    LinearModel lying(mm, {FieldKind::genuinely_nonlinear, FieldKind::linearly_degenerate});
    EXPECT_THROW(gnl_audit(lying, 5), ModelAuditError);
}

TEST(Catalog, UnknownIdNamesKey)
{
    try {
        make_model("kdv");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "model.id");
    }
}

TEST(Catalog, LinearFromParams)
{
    auto m = make_model("linear", {{"m11", 2.0}, {"m12", 0.0}, {"m21", 0.0}, {"m22", -1.0}});
    EXPECT_EQ(m->dim(), 2);
    EXPECT_DOUBLE_EQ(m->fences().front(), -2.0);
    EXPECT_DOUBLE_EQ(m->fences()[1], 0.5);
    EXPECT_DOUBLE_EQ(m->fences().back(), 3.0);
    EXPECT_THROW(make_model("linear", {{"m11", 1.0}, {"m12", 0.0}}), ConfigError);
}
