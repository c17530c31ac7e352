// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "dlv/errors.hpp"
#include "dlv/io.hpp"
#include "support/test_nets.hpp"

using namespace dlv;

TEST(Weights, RoundTripIsBitExact) {
    auto text = read_file(dlv::testing::fixture("curve2d.json"));
    auto net = parse_network(text);
    auto again = parse_network(dump_network(net));
    ASSERT_EQ(again.layer_count(), net.layer_count());
    for (std::size_t k = 1; k <= net.layer_count(); ++k) {
        EXPECT_EQ(again.layer(k).weights, net.layer(k).weights);
        EXPECT_EQ(again.layer(k).bias, net.layer(k).bias);
    }
    EXPECT_EQ(dump_network(again), dump_network(net));
}

TEST(Weights, TruncatedFileReportsAByteOffset) {
    auto text = read_file(dlv::testing::fixture("mini_digits.json"));
    try {
        parse_network(text.substr(0, text.size() / 2));
        FAIL() << "no error";
    } catch (const FormatError& e) {
        ASSERT_TRUE(e.byte_offset().has_value());
        EXPECT_GT(*e.byte_offset(), 0u);
    }
    EXPECT_THROW(parse_network(R"({"version": "0"})"), FormatError);
}

TEST(Images, CsvRejectsNonFiniteAndOutOfRangeValues) {
    InputBounds unit{0.0, 1.0};
    EXPECT_EQ(parse_images_csv("0.5,0.25\n", {2}, unit).at(0).data(), (std::vector<double>{0.5, 0.25}));
    EXPECT_THROW(parse_images_csv("nan,0.1\n", {2}, unit), FormatError);
    EXPECT_THROW(parse_images_csv("1.5,0.1\n", {2}, unit), FormatError);
    EXPECT_THROW(parse_images_csv("0.1\n", {2}, unit), FormatError);
    EXPECT_TRUE(parse_images_csv("", {2}, unit).empty());
}

TEST(Images, CsvRoundTripIsExact) {
    std::vector<Tensor> imgs{Tensor({3}, {0.1, 1.0 / 3.0, 0.7})};
    auto back = parse_images_csv(dump_images_csv(imgs), {3}, {0.0, 1.0});
    EXPECT_EQ(back.at(0).data(), imgs[0].data());
}

TEST(Images, PgmQuantisesToEightBits) {
    InputBounds unit{0.0, 1.0};
    Tensor img({1, 2, 2}, {0.5, 0.0, 1.0, 0.25});
    auto bytes = encode_pgm(img, unit);
    EXPECT_EQ(bytes.substr(0, 3), "P5\n");
    EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 4]), 128);
    auto back = decode_pgm(bytes, unit);
    EXPECT_DOUBLE_EQ(back[0], 128.0 / 255.0);
    EXPECT_DOUBLE_EQ(back[2], 1.0);
    EXPECT_EQ(pgm_geometry({64}), (std::pair<std::size_t, std::size_t>{8, 8}));
    EXPECT_THROW(decode_pgm("P2\n1 1\n255\n", unit), FormatError);
}

TEST(Files, Sha256MatchesKnownDigests) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    auto path = std::filesystem::temp_directory_path() / "dlv_io_test.bin";
    write_file(path, "abc");
    EXPECT_EQ(sha256_file(path), sha256_hex("abc"));
    std::filesystem::remove(path);
    EXPECT_THROW(read_file(path), Error);
}
