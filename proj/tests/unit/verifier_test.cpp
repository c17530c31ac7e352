// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "dlv/errors.hpp"
#include "dlv/io.hpp"
#include "dlv/refinement.hpp"
#include "dlv/verifier.hpp"
#include "support/test_nets.hpp"

using namespace dlv;

namespace {

// class 0 when x0 > x1, else class 1
Network diagonal() { return Network({2}, 2, {LayerSpec::dense(2, 2, {1, 0, 0, 1}, {0, 0})}, {-10.0, 10.0}); }

} // namespace

TEST(Verifier, CurveInputLayerExploresNinePointsAndIsSafe) {
    auto net = load_network(dlv::testing::fixture("curve2d.json"));
    auto x = load_images_csv(dlv::testing::fixture("point2d.csv"), net.input_shape(), net.input_bounds()).at(0);
    auto cfg = preset_2d();
    PreimageChain chain(net, x);
    auto sel = select_dims_start(x, 0, cfg.dims);
    Region region = Region::uniform(0, x, sel.dims, cfg.span, cfg.span_count);
    PointEvaluator ev(chain, 0, region.dims);
    auto out = verify_0_variation(ev, region, generate_manipulation_set(region), cfg);
    EXPECT_EQ(out.verdict, Verdict::Safe);
    EXPECT_EQ(out.explored, 9u);
    // the continuous box does hold a class change that the lattice misses
    EXPECT_EQ(brute_force_oracle(ev, region, 0.01).verdict, Verdict::Adversarial);
}

TEST(Verifier, FindsTheDecisionBoundaryOnTheLattice) {
    auto net = diagonal();
    Tensor x({2}, {1.0, 0.0});
    PreimageChain chain(net, x);
    PointEvaluator ev(chain, 0, {0, 1});
    SearchConfig cfg;
    Region tight(0, x, {0, 1}, {0.25, 0.25}, {1, 1});
    EXPECT_EQ(verify_0_variation(ev, tight, generate_manipulation_set(tight), cfg).verdict, Verdict::Safe);

    // at count 2 the corner is a tie, which argmax gives to class 0
    Region tie(0, x, {0, 1}, {0.25, 0.25}, {2, 2});
    EXPECT_EQ(verify_0_variation(ev, tie, generate_manipulation_set(tie), cfg).verdict, Verdict::Safe);

    Region wide(0, x, {0, 1}, {0.25, 0.25}, {3, 3});
    auto out = verify_0_variation(ev, wide, generate_manipulation_set(wide), cfg);
    ASSERT_EQ(out.verdict, Verdict::Adversarial);
    ASSERT_TRUE(out.witness_input.has_value());
    EXPECT_LE((*out.witness_input)[0], (*out.witness_input)[1]);
    EXPECT_EQ(out.new_class, std::optional<std::size_t>(1));
    EXPECT_EQ(brute_force_oracle(ev, wide, 0.25).verdict, Verdict::Adversarial);
}

TEST(Verifier, BruteForceRefusesHugeGrids) {
    auto net = diagonal();
    Tensor x({2}, {1.0, 0.0});
    PreimageChain chain(net, x);
    PointEvaluator ev(chain, 0, {0, 1});
    Region r(0, x, {0, 1}, {1.0, 1.0}, {5, 5});
    EXPECT_THROW(brute_force_oracle(ev, r, 1e-4), GridTooLarge);
}

TEST(Verifier, PartitionGroupsDimsBySaliency) {
    Tensor base({6}, {0.0, 10.0, 1.0, 5.0, 2.0, 3.0});
    Region r(0, base, {0, 1, 2, 3}, {1, 1, 1, 1}, {1, 1, 1, 1});
    auto sal = region_saliency(r);
    // layer mean is 3.5
    EXPECT_EQ(sal, (std::vector<double>{3.5, 6.5, 2.5, 1.5}));
    auto part = partition_features(r, 2, sal);
    ASSERT_EQ(part.features.size(), 2u);
    EXPECT_EQ(part.features[0].dims, (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(part.features[1].dims, (std::vector<std::size_t>{2, 3}));
    // 2 features of 2 dims: 8 directions each
    EXPECT_EQ(feature_manipulations(r, part).size(), 16u);
    auto sub = feature_region(r, part.features[1], base);
    EXPECT_EQ(sub.dims, (std::vector<std::size_t>{2, 3}));
}

TEST(Verifier, SinglePathAndMctsAgreeWithTheOracle) {
    auto net = diagonal();
    Tensor x({2}, {1.0, 0.0});
    PreimageChain chain(net, x);
    PointEvaluator ev(chain, 0, {0, 1});
    Region wide(0, x, {0, 1}, {0.25, 0.25}, {3, 3});
    auto part = partition_features(wide, 1, region_saliency(wide));
    SearchConfig cfg;
    auto sp = single_path_search(ev, wide, part, cfg);
    EXPECT_EQ(sp.verdict, Verdict::Adversarial);
    cfg.mode = SearchMode::MultiPath;
    cfg.seed = 4;
    auto a = mcts_search(ev, wide, part, cfg);
    auto b = mcts_search(ev, wide, part, cfg);
    EXPECT_EQ(a.verdict, Verdict::Adversarial);
    ASSERT_TRUE(a.witness.has_value() && b.witness.has_value());
    EXPECT_EQ(a.witness->data(), b.witness->data());
    EXPECT_EQ(a.explored, b.explored);

    Region tight(0, x, {0, 1}, {0.25, 0.25}, {1, 1});
    auto t = mcts_search(ev, tight, partition_features(tight, 1, region_saliency(tight)), cfg);
    EXPECT_EQ(t.verdict, Verdict::Safe);
}

TEST(Verifier, PathToWalksFeatureByFeature) {
    Tensor base({3}, {0.0, 0.0, 0.0});
    Region r(0, base, {0, 1, 2}, {1, 1, 1}, {2, 2, 2});
    FeaturePartition part{{Feature{{0, 1}, {0, 1}}, Feature{{2}, {2}}}};
    auto path = path_to(r, part, {2, -1, 1});
    // feature 0 moves (+,-) then (+,0); feature 1 moves +
    ASSERT_EQ(path.size(), 3u);
    EXPECT_EQ(path[0].feature, 0u);
    EXPECT_EQ(direction_from_index(path[0].direction, 2), (Direction{1, -1}));
    EXPECT_EQ(direction_from_index(path[1].direction, 2), (Direction{1, 0}));
    EXPECT_EQ(path[2].feature, 1u);
    EXPECT_EQ(direction_from_index(path[2].direction, 1), (Direction{1}));
}

TEST(Verifier, PresetsMatchTheDocumentedValues) {
    auto p = preset_2d();
    EXPECT_EQ(p.start_layer, 0u);
    EXPECT_EQ(p.dims, 2u);
    EXPECT_EQ(p.span, 1.0);
    EXPECT_EQ(p.epsilon, 0.1);
    auto m = preset_mnist_mini();
    EXPECT_EQ(m.start_layer, 1u);
    EXPECT_EQ(m.dims, 10u);
    EXPECT_EQ(m.feature_dims, 5u);
}
