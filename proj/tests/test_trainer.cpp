#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "labrr/trainer.hpp"
#include "oracles.hpp"

namespace labrr {
namespace {

Dataset labelled(const RealMatrix &x, const RealVector &y) {
    Dataset d;
    d.x = x;
    d.y = y;
    return d;
}

TEST(SelectInitialSupport, AllIndicesWhenN0EqualsN) {
    const Dataset d = labelled(RealMatrix{{0.0}, {1.0}, {2.0}}, RealVector{{0.3, -0.1, 0.9}});
    auto idx = select_initial_support(d, 3, SupportSelection::y_uniform, 0);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(idx, (std::vector<Index>{0, 1, 2}));
}

TEST(SelectInitialSupport, RankSpacing) {
    const Dataset d = labelled(RealMatrix{{0.0}, {1.0}, {2.0}}, RealVector{{3.0, 1.0, 2.0}});
    EXPECT_EQ(select_initial_support(d, 2, SupportSelection::y_uniform, 0), (std::vector<Index>{1, 0}));
    EXPECT_EQ(select_initial_support(d, 1, SupportSelection::y_uniform, 0), (std::vector<Index>{1}));
}

TEST(SelectInitialSupport, ExtremeY) {
    const Dataset d = labelled(RealMatrix::Zero(5, 1), RealVector{{0.1, 0.9, 0.5, 0.7, -1.0}});
    auto idx = select_initial_support(d, 2, SupportSelection::extreme_y, 0);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(idx, (std::vector<Index>{1, 3}));
}

TEST(SelectInitialSupport, KMeansGivesDistinctDeterministicIndices) {
    const Dataset d = synth(SynthFunction::f1, 200, 0.0, 5);
    const auto a = select_initial_support(d, 15, SupportSelection::x_kmeans, 3);
    const auto b = select_initial_support(d, 15, SupportSelection::x_kmeans, 3);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 15u);
    EXPECT_EQ(std::set<Index>(a.begin(), a.end()).size(), 15u);
    // duplicates in the data force the rank-spacing top-up
    const Dataset dup = labelled(RealMatrix::Zero(6, 2), RealVector{{1.0, 2.0, 3.0, 4.0, 5.0, 6.0}});
    const auto c = select_initial_support(dup, 4, SupportSelection::x_kmeans, 1);
    EXPECT_EQ(std::set<Index>(c.begin(), c.end()).size(), 4u);
}

TEST(SelectInitialSupport, InsufficientData) {
    const Dataset d = labelled(RealMatrix::Zero(3, 1), RealVector::Zero(3));
    EXPECT_THROW(select_initial_support(d, 4, SupportSelection::y_uniform, 0), InsufficientData);
}

TEST(BatchLossAndGrad, InterpolatedBatchPointContributesNothing) {
    std::mt19937_64 rng(51);
    const RealMatrix xs = testing::uniform_matrix(rng, 6, 2, -1.0, 1.0);
    const RealVector ys = testing::uniform_vector(rng, 6, -1.0, 1.0);
    const BandwidthSet th(testing::uniform_matrix(rng, 6, 2, 1.0, 3.0));
    const auto lg = batch_loss_and_grad(xs, ys, th, 0.0, xs.topRows(1), ys.head(1));
    EXPECT_LE(lg.loss, 1e-20);
    EXPECT_LE(lg.grad.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BatchLossAndGrad, SingleSupportClosedForm) {
    const auto lg = batch_loss_and_grad(RealMatrix::Zero(1, 1), RealVector{{1.0}}, BandwidthSet::constant(1, 1, 1.0),
                                        0.0, RealMatrix{{1.0}}, RealVector{{0.0}});
    EXPECT_NEAR(lg.loss, 0.1353352832366127, 1e-15);
    EXPECT_NEAR(lg.grad(0, 0), -0.5413411329464508, 1e-15);
}

TEST(BatchLossAndGrad, MatchesFiniteDifferences) {
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 100; ++trial) {
        const RealMatrix xs = testing::uniform_matrix(rng, 5, 3, -1.0, 1.0);
        const RealVector ys = testing::uniform_vector(rng, 5, -1.0, 1.0);
        const RealMatrix th = testing::uniform_matrix(rng, 5, 3, 0.1, 5.0);
        const RealMatrix xb = testing::uniform_matrix(rng, 4, 3, -1.0, 1.0);
        const RealVector yb = testing::uniform_vector(rng, 4, -1.0, 1.0);
        const double jitter = trial % 2 ? 0.0 : kDefaultJitter;
        const auto lg = batch_loss_and_grad(xs, ys, BandwidthSet(th), jitter, xb, yb);
        EXPECT_NEAR(lg.loss, testing::naive_loss(xs, ys, th, jitter, xb, yb), 1e-8 * (1 + lg.loss));
        const RealMatrix fd = testing::fd_loss_grad(xs, ys, th, jitter, xb, yb, 1e-5);
        EXPECT_LE((lg.grad - fd).norm(), 1e-4 * fd.norm()) << "trial " << trial;
    }
}

TEST(BatchLossAndGrad, ShapeErrors) {
    const BandwidthSet th = BandwidthSet::constant(2, 1, 1.0);
    const RealMatrix xs{{0.0}, {1.0}};
    EXPECT_THROW(batch_loss_and_grad(xs, RealVector::Ones(3), th, 0.0, xs, RealVector::Ones(2)), DimensionMismatch);
    EXPECT_THROW(batch_loss_and_grad(xs, RealVector::Ones(2), th, 0.0, RealMatrix::Zero(2, 2), RealVector::Ones(2)),
                 DimensionMismatch);
}

TrainState single_support_state() {
    TrainState s;
    s.support_x = RealMatrix::Zero(1, 1);
    s.support_y = RealVector{{1.0}};
    s.theta = BandwidthSet::constant(1, 1, 1.0);
    s.pool_x = RealMatrix{{1.0}};
    s.pool_y = RealVector{{0.0}};
    return s;
}

TEST(SgdRound, ZeroLearningRateOrZeroStepsLeaveThetaUnchanged) {
    std::mt19937_64 rng(1);
    TrainConfig c;
    c.jitter = 0.0;
    c.eta = 0.0;
    c.L = 5;
    EXPECT_EQ(sgd_round(single_support_state(), c, rng).theta, single_support_state().theta);
    c.eta = 0.1;
    c.L = 0;
    const auto r = sgd_round(single_support_state(), c, rng);
    EXPECT_EQ(r.theta, single_support_state().theta);
    EXPECT_TRUE(r.losses.empty());
}

TEST(SgdRound, OneHandAppliedStep) {
    std::mt19937_64 rng(1);
    TrainConfig c;
    c.jitter = 0.0;
    c.eta = 0.1;
    c.L = 1;
    const auto r = sgd_round(single_support_state(), c, rng);
    EXPECT_NEAR(r.theta(0, 0), 1.0541341132946451, 1e-14);
    ASSERT_EQ(r.losses.size(), 1u);
    EXPECT_NEAR(r.losses[0], 0.1353352832366127, 1e-15);
}

TEST(SgdRound, RespectsBandwidthBounds) {
    std::mt19937_64 rng(2);
    const Dataset d = normalize(synth(SynthFunction::f1, 80, 0.0, 2));
    TrainState s;
    s.support_x = d.x.topRows(10);
    s.support_y = d.y.head(10);
    s.pool_x = d.x.bottomRows(70);
    s.pool_y = d.y.tail(70);
    TrainConfig c;
    c.theta_bounds = {0.9, 1.1};
    c.sigma0 = 1.0;
    c.eta = 5.0;
    c.L = 10;
    c.batch_size = 16;
    s.theta = BandwidthSet::constant(10, 2, 1.0, c.theta_bounds);
    for (const auto opt : {Optimizer::sgd, Optimizer::momentum, Optimizer::adam}) {
        c.optimizer = opt;
        const auto r = sgd_round(s, c, rng);
        EXPECT_GE(r.theta.values().minCoeff(), 0.9);
        EXPECT_LE(r.theta.values().maxCoeff(), 1.1);
        EXPECT_EQ(r.losses.size(), 10u);
    }
}

TEST(GrowSupport, Examples) {
    EXPECT_EQ(grow_support(RealVector{{0.5, 0.1, 0.9}}, 2), (std::vector<Index>{2, 0}));
    EXPECT_EQ(grow_support(RealVector::Constant(4, 0.3), 1), (std::vector<Index>{0}));
    EXPECT_EQ(grow_support(RealVector{{0.2, 0.7}}, 5), (std::vector<Index>{1, 0}));
    EXPECT_TRUE(grow_support(RealVector(), 3).empty());
    EXPECT_EQ(grow_support(RealVector{{0.4, 0.9, 0.4, 0.9}}, 3), (std::vector<Index>{1, 3, 0}));
    EXPECT_THROW(grow_support(RealVector::Ones(2), 0), InvalidArgument);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), InvalidArgument);
    };
    bad([](TrainConfig &c) { c.B = 0.0; });
    bad([](TrainConfig &c) { c.k = 0; });
    bad([](TrainConfig &c) { c.n0 = 0; });
    bad([](TrainConfig &c) { c.batch_size = 0; });
    bad([](TrainConfig &c) { c.theta_bounds.min = 0.0; });
    bad([](TrainConfig &c) { c.max_support_ratio = 1.5; });
    bad([](TrainConfig &c) { c.sigma0 = 1e5; });
}

TrainConfig quick_config() {
    TrainConfig c;
    c.B = 1e-3;
    c.k = 10;
    c.L = 10;
    c.n0 = 20;
    c.sigma0 = 5.0;
    c.eta = 0.01;
    c.seed = 3;
    return c;
}

TEST(Train, HugeToleranceStopsAfterFirstRound) {
    const Dataset d = normalize(synth(SynthFunction::f1, 150, 0.0, 1));
    TrainConfig c = quick_config();
    c.B = 100.0;
    const auto r = train(d, c);
    EXPECT_EQ(r.trace.rounds.size(), 1u);
    EXPECT_TRUE(r.trace.converged());
    EXPECT_EQ(r.model.n_support(), 20);
}

TEST(Train, DatasetOfN0PointsInterpolates) {
    const Dataset d = normalize(synth(SynthFunction::f2, 20, 0.0, 2));
    TrainConfig c = quick_config();
    c.jitter = 0.0;
    const auto r = train(d, c);
    EXPECT_EQ(r.model.n_support(), 20);
    EXPECT_EQ(r.trace.rounds.size(), 1u);
    EXPECT_TRUE(r.trace.rounds[0].inner_losses.empty());
    EXPECT_LE(r.trace.final_max_sq_error, 1e-12);
    EXPECT_TRUE(r.trace.converged());
}

TEST(Train, TerminatesWithEveryErrorBelowTolerance) {
    const Dataset d = normalize(synth(SynthFunction::f1, 300, 0.0, 4));
    const TrainConfig c = quick_config();
    std::vector<Index> sizes;
    const auto r = train(d, c, [&sizes](const RoundRecord &rec) { sizes.push_back(rec.support_size); });
    ASSERT_TRUE(r.trace.converged());
    EXPECT_LE(r.trace.final_max_sq_error, c.B);
    EXPECT_LE((predict(r.model, d.x) - d.y).array().square().maxCoeff(), c.B);
    EXPECT_LT(r.model.n_support(), d.size());
    EXPECT_EQ(sparsity_r0(r.model), r.model.n_support());
    EXPECT_TRUE(std::is_sorted(sizes.begin(), sizes.end()));
    EXPECT_EQ(std::set<Index>(r.support_indices.begin(), r.support_indices.end()).size(), r.support_indices.size());
    // the model's support rows are exactly the selected dataset rows, in order
    EXPECT_EQ(r.model.support_x, d.subset(r.support_indices).x);
    EXPECT_GE(r.model.theta.values().minCoeff(), c.theta_bounds.min);
    EXPECT_LE(r.model.theta.values().maxCoeff(), c.theta_bounds.max);
}

TEST(Train, DeterministicForFixedSeed) {
    const Dataset d = normalize(synth(SynthFunction::f3, 200, 0.1, 6));
    TrainConfig c = quick_config();
    c.max_outer = 4;
    c.optimizer = Optimizer::adam;
    const auto a = train(d, c);
    const auto b = train(d, c);
    EXPECT_EQ(a.model.theta, b.model.theta);
    EXPECT_EQ(a.model.alpha, b.model.alpha);
    EXPECT_EQ(a.support_indices, b.support_indices);
    c.seed = 99;
    EXPECT_NE(train(d, c).model.theta, a.model.theta);
}

TEST(Train, CapsAreFlagged) {
    const Dataset d = normalize(synth(SynthFunction::f1, 200, 0.5, 7));
    TrainConfig c = quick_config();
    c.B = 1e-8;
    c.max_support_ratio = 0.25;
    auto r = train(d, c);
    EXPECT_EQ(r.trace.stop, StopReason::support_cap);
    EXPECT_FALSE(r.trace.converged());
    EXPECT_EQ(r.model.n_support(), 50);

    c.max_support_ratio = 0.8;
    c.max_outer = 2;
    r = train(d, c);
    EXPECT_EQ(r.trace.stop, StopReason::outer_cap);
    EXPECT_EQ(r.trace.rounds.size(), 2u);
    EXPECT_EQ(r.model.n_support(), 30);
}

TEST(Train, NewSupportBandwidthsStartAtTheMean) {
    const Dataset d = normalize(synth(SynthFunction::f1, 120, 0.0, 8));
    TrainConfig c = quick_config();
    c.max_outer = 2;
    c.L = 0;  // no learning: every bandwidth stays at sigma0
    const auto r = train(d, c);
    EXPECT_EQ(r.model.n_support(), 30);
    EXPECT_EQ(r.model.theta.values(), RealMatrix::Constant(30, 2, c.sigma0));
}

TEST(WriteTrace, OneRecordPerRoundPlusEnd) {
    const Dataset d = normalize(synth(SynthFunction::f1, 150, 0.0, 9));
    TrainConfig c = quick_config();
    c.max_outer = 3;
    c.B = 1e-9;
    const auto r = train(d, c);
    std::ostringstream out;
    write_trace(out, r.trace);
    std::istringstream in(out.str());
    std::string line;
    std::vector<nlohmann::json> records;
    while (std::getline(in, line)) { records.push_back(nlohmann::json::parse(line)); }
    ASSERT_EQ(records.size(), 4u);
    EXPECT_EQ(records[0]["record"], "round");
    EXPECT_EQ(records[0]["support_size"], 20);
    EXPECT_EQ(records[2]["inner_losses"].size(), 10u);
    EXPECT_EQ(records[3]["record"], "end");
    EXPECT_EQ(records[3]["stop"], "outer_cap");
}

}  // namespace
}  // namespace labrr
