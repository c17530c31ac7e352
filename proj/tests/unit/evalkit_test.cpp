// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dlv/errors.hpp"
#include "dlv/evalkit.hpp"
#include "support/test_nets.hpp"

using namespace dlv;

TEST(Distance, PerPixelConvention) {
    Tensor a({2}, {0.0, 0.0}), b({2}, {1.0, 0.0});
    EXPECT_DOUBLE_EQ(l_distance(a, b, 1), 0.5);
    EXPECT_DOUBLE_EQ(l_distance(a, b, 2), 1.0 / std::sqrt(2.0));
    EXPECT_EQ(l_distance(a, a, 1), 0.0);
    EXPECT_THROW(l_distance(a, Tensor({3}, {0, 0, 0}), 1), Error);
}

TEST(Distance, TriangleInequalityHolds) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a(16), b(16), c(16);
        for (std::size_t i = 0; i < 16; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
            c[i] = u(rng);
        }
        Tensor x({16}, a), y({16}, b), z({16}, c);
        for (int order : {1, 2}) {
            EXPECT_LE(l_distance(x, z, order), l_distance(x, y, order) + l_distance(y, z, order) + 1e-15);
            EXPECT_EQ(l_distance(x, y, order), l_distance(y, x, order));
        }
    }
}

TEST(Distance, DiffClassIsSymmetric) {
    Network net({2}, 2, {LayerSpec::dense(2, 2, {1, 0, 0, 1}, {0, 0})});
    Tensor a({2}, {0.9, 0.1}), b({2}, {0.1, 0.9}), c({2}, {0.8, 0.3});
    EXPECT_EQ(diff_class(net, a, b), 1);
    EXPECT_EQ(diff_class(net, b, a), 1);
    EXPECT_EQ(diff_class(net, a, c), 0);
}

TEST(Report, SummaryAveragesSuccessfulDistancesOnly) {
    std::vector<RunRecord> recs{
        {0, "m", true, 0.1, 0.2, 1, 1.0, ""},
        {1, "m", true, 0.3, 0.4, 1, 1.0, ""},
        {2, "m", false, std::nullopt, std::nullopt, 1, 1.0, ""},
        {3, "m", true, std::nullopt, std::nullopt, 1, 1.0, "no input"},
    };
    auto row = summarize("m", recs);
    EXPECT_DOUBLE_EQ(*row.avg_l1, 0.2);
    EXPECT_DOUBLE_EQ(*row.avg_l2, 0.3);
    EXPECT_DOUBLE_EQ(row.success_rate, 75.0);
    EXPECT_EQ(row.excluded, 1u);
    EXPECT_EQ(row.samples, 4u);
    EXPECT_DOUBLE_EQ(row.seconds_per_image, 1.0);

    auto none = summarize("x", {{0, "x", false, std::nullopt, std::nullopt, 0, 0.5, ""}});
    EXPECT_FALSE(none.avg_l1.has_value());
    EXPECT_NE(rows_text({none}).find("n/a"), std::string::npos);
    EXPECT_NE(rows_json({none}).find("null"), std::string::npos);
}

TEST(Report, CsvHasAFixedHeader) {
    auto csv = records_csv({{7, "fgsm", true, 0.25, 0.5, 1, 0.0, ""}});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "image_id,method,success,l1,l2,steps,seconds");
    EXPECT_NE(csv.find("7,fgsm,1,0.25,0.5,1,"), std::string::npos);
}

TEST(Report, RobustnessReportCoversEveryMethodAndImage) {
    std::mt19937_64 rng(3);
    auto net = dlv::testing::random_relu_net(rng, {4, 8, 3}, {0.0, 1.0});
    std::vector<Tensor> images;
    for (int i = 0; i < 3; ++i) {
        images.push_back(dlv::testing::random_input(rng, net));
    }
    MethodSpec f;
    f.kind = MethodSpec::Kind::Fgsm;
    f.epsilon = 0.3;
    MethodSpec j;
    j.kind = MethodSpec::Kind::Jsma;
    j.theta = 0.5;
    j.fraction = 0.5;
    auto rep = robustness_report(net, images, {f, j});
    EXPECT_EQ(rep.records.size(), 6u);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].method, f.name());
    EXPECT_EQ(rep.rows[1].samples, 3u);
}
