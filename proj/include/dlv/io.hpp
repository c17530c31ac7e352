// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dlv/network.hpp"

namespace dlv {

inline constexpr std::string_view kWeightsVersion = "dlv-weights-1";

/// Parses a "dlv-weights-1" document. Errors carry the byte offset when the
/// text is not valid JSON and name the layer when it is inconsistent.
Network parse_network(std::string_view text);
std::string dump_network(const Network& net);
Network load_network(const std::filesystem::path& path);
void save_network(const Network& net, const std::filesystem::path& path);

/// One image per row, comma separated, every value inside `bounds`.
std::vector<Tensor> parse_images_csv(std::string_view text, const Shape& shape, const InputBounds& bounds);
std::vector<Tensor> load_images_csv(const std::filesystem::path& path, const Shape& shape, const InputBounds& bounds);
std::string dump_images_csv(const std::vector<Tensor>& images);
void save_images_csv(const std::filesystem::path& path, const std::vector<Tensor>& images);

std::vector<std::size_t> load_labels_csv(const std::filesystem::path& path);

/// Height and width used for PGM export: [h, w], [1, h, w] or a square 1-D shape;
/// any other 1-D shape becomes a single row.
std::pair<std::size_t, std::size_t> pgm_geometry(const Shape& shape);

/// Binary 8-bit PGM; each value becomes round((v - lo) / (hi - lo) * 255). Lossy.
std::string encode_pgm(const Tensor& image, const InputBounds& bounds);
Tensor decode_pgm(std::string_view bytes, const InputBounds& bounds);
void save_pgm(const std::filesystem::path& path, const Tensor& image, const InputBounds& bounds);
Tensor load_pgm(const std::filesystem::path& path, const InputBounds& bounds);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace dlv
