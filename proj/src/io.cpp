// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "dlv/errors.hpp"

namespace dlv {

namespace {

using Json = nlohmann::json;

std::string layer_name(std::size_t index) { return "layer " + std::to_string(index + 1); }

const Json& field(const Json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw FormatError(where + ": missing \"" + key + "\"");
    }
    return *it;
}

std::size_t size_field(const Json& obj, const char* key, const std::string& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_number_unsigned()) {
        throw FormatError(where + ": \"" + key + "\" must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<double> number_array(const Json& obj, const char* key, const std::string& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_array()) {
        throw FormatError(where + ": \"" + key + "\" must be an array");
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            throw FormatError(where + ": \"" + key + "\"[" + std::to_string(i) + "] is not a finite number");
        }
        double d = v[i].get<double>();
        if (!std::isfinite(d)) {
            throw FormatError(where + ": \"" + key + "\"[" + std::to_string(i) + "] is not finite");
        }
        out.push_back(d);
    }
    return out;
}

LayerSpec parse_layer(const Json& j, std::size_t index) {
    auto where = layer_name(index);
    if (!j.is_object()) {
        throw FormatError(where + ": expected an object");
    }
    const auto& kind_field = field(j, "kind", where);
    if (!kind_field.is_string()) {
        throw FormatError(where + ": \"kind\" must be a string");
    }
    auto kind = layer_kind_from_string(kind_field.get<std::string>());
    if (!kind) {
        throw FormatError(where + ": unknown kind \"" + kind_field.get<std::string>() + "\"");
    }
    switch (*kind) {
    case LayerKind::Dense:
        return LayerSpec::dense(size_field(j, "in", where), size_field(j, "out", where),
                                number_array(j, "weights", where), number_array(j, "bias", where));
    case LayerKind::Conv2d: {
        const auto& kernel = field(j, "kernel", where);
        if (!kernel.is_array() || kernel.size() != 2 || !kernel[0].is_number_unsigned() ||
            !kernel[1].is_number_unsigned()) {
            throw FormatError(where + ": \"kernel\" must be [height, width]");
        }
        return LayerSpec::conv2d(size_field(j, "in_channels", where), size_field(j, "out_channels", where),
                                 kernel[0].get<std::size_t>(), kernel[1].get<std::size_t>(),
                                 number_array(j, "weights", where), number_array(j, "bias", where));
    }
    case LayerKind::Relu: return LayerSpec::relu();
    case LayerKind::MaxPool: return LayerSpec::maxpool(size_field(j, "window", where));
    case LayerKind::Flatten: return LayerSpec::flatten();
    case LayerKind::Softmax: return LayerSpec::softmax();
    case LayerKind::Dropout: {
        double rate = 0.0;
        if (j.contains("rate")) {
            if (!j["rate"].is_number()) {
                throw FormatError(where + ": \"rate\" must be a number");
            }
            rate = j["rate"].get<double>();
        }
        return LayerSpec::dropout(rate);
    }
    case LayerKind::ZeroPad2d: return LayerSpec::zeropad2d(size_field(j, "pad", where));
    }
    throw FormatError(where + ": unsupported kind");
}

Json layer_json(const LayerSpec& l) {
    Json j;
    j["kind"] = std::string(to_string(l.kind));
    switch (l.kind) {
    case LayerKind::Dense:
        j["in"] = l.in;
        j["out"] = l.out;
        j["weights"] = l.weights;
        j["bias"] = l.bias;
        break;
    case LayerKind::Conv2d:
        j["in_channels"] = l.in_channels;
        j["out_channels"] = l.out_channels;
        j["kernel"] = {l.kernel_h, l.kernel_w};
        j["weights"] = l.weights;
        j["bias"] = l.bias;
        break;
    case LayerKind::MaxPool: j["window"] = l.window; break;
    case LayerKind::Dropout: j["rate"] = l.rate; break;
    case LayerKind::ZeroPad2d: j["pad"] = l.pad; break;
    default: break;
    }
    return j;
}

double parse_double(std::string_view s, std::size_t row, std::size_t col) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw FormatError("row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) + ": \"" +
                          std::string(s) + "\" is not a finite number");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return parts;
        }
        start = pos + 1;
    }
}

std::string fmt_value(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

} // namespace

Network parse_network(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw FormatError(std::string("malformed weight file: ") + e.what(), e.byte);
    }
    if (!doc.is_object()) {
        throw FormatError("weight file must hold an object");
    }
    const auto& version = field(doc, "version", "weight file");
    if (!version.is_string() || version.get<std::string>() != kWeightsVersion) {
        throw FormatError("weight file version must be \"" + std::string(kWeightsVersion) + "\"");
    }
    const auto& shape_json = field(doc, "input_shape", "weight file");
    if (!shape_json.is_array() || shape_json.empty()) {
        throw FormatError("input_shape must be a non-empty array");
    }
    Shape shape;
    for (const auto& d : shape_json) {
        if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
            throw FormatError("input_shape entries must be positive integers");
        }
        shape.push_back(d.get<std::size_t>());
    }
    auto classes = size_field(doc, "class_count", "weight file");
    InputBounds bounds;
    if (doc.contains("input_bounds")) {
        auto b = number_array(doc, "input_bounds", "weight file");
        if (b.size() != 2) {
            throw FormatError("input_bounds must be [lo, hi]");
        }
        bounds = {b[0], b[1]};
    }
    const auto& layers_json = field(doc, "layers", "weight file");
    if (!layers_json.is_array()) {
        throw FormatError("layers must be an array");
    }
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i < layers_json.size(); ++i) {
        layers.push_back(parse_layer(layers_json[i], i));
    }
    try {
        return Network(std::move(shape), classes, std::move(layers), bounds);
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("invalid network: ") + e.what());
    }
}

std::string dump_network(const Network& net) {
    nlohmann::ordered_json doc;
    doc["version"] = std::string(kWeightsVersion);
    doc["input_shape"] = net.input_shape();
    doc["class_count"] = net.class_count();
    doc["input_bounds"] = {net.input_bounds().lo, net.input_bounds().hi};
    Json layers = Json::array();
    for (const auto& l : net.layers()) {
        layers.push_back(layer_json(l));
    }
    doc["layers"] = layers;
    return doc.dump(1) + "\n";
}

Network load_network(const std::filesystem::path& path) {
    auto text = read_file(path);
    try {
        return parse_network(text);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_network(const Network& net, const std::filesystem::path& path) { write_file(path, dump_network(net)); }

std::vector<Tensor> parse_images_csv(std::string_view text, const Shape& shape, const InputBounds& bounds) {
    const std::size_t n = shape_size(shape);
    std::vector<Tensor> images;
    auto lines = split(text, '\n');
    for (std::size_t row = 0; row < lines.size(); ++row) {
        auto line = lines[row];
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != n) {
            throw FormatError("row " + std::to_string(row + 1) + ": expected " + std::to_string(n) + " values, got " +
                              std::to_string(cells.size()));
        }
        std::vector<double> values;
        values.reserve(n);
        for (std::size_t c = 0; c < n; ++c) {
            double v = parse_double(cells[c], row, c);
            if (v < bounds.lo || v > bounds.hi) {
                throw FormatError("row " + std::to_string(row + 1) + ", column " + std::to_string(c + 1) + ": value " +
                                  fmt_value(v) + " outside [" + fmt_value(bounds.lo) + ", " + fmt_value(bounds.hi) +
                                  "]");
            }
            values.push_back(v);
        }
        images.emplace_back(shape, std::move(values));
    }
    return images;
}

std::vector<Tensor> load_images_csv(const std::filesystem::path& path, const Shape& shape, const InputBounds& bounds) {
    try {
        return parse_images_csv(read_file(path), shape, bounds);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string dump_images_csv(const std::vector<Tensor>& images) {
    std::string out;
    for (const auto& img : images) {
        for (std::size_t i = 0; i < img.size(); ++i) {
            if (i) {
                out += ',';
            }
            out += fmt_value(img[i]);
        }
        out += '\n';
    }
    return out;
}

void save_images_csv(const std::filesystem::path& path, const std::vector<Tensor>& images) {
    write_file(path, dump_images_csv(images));
}

std::vector<std::size_t> load_labels_csv(const std::filesystem::path& path) {
    auto text = read_file(path);
    std::vector<std::size_t> labels;
    auto lines = split(text, '\n');
    for (std::size_t row = 0; row < lines.size(); ++row) {
        auto line = lines[row];
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        double v = parse_double(line, row, 0);
        if (v < 0 || v != std::floor(v)) {
            throw FormatError(path.string() + ": row " + std::to_string(row + 1) + " is not a class index");
        }
        labels.push_back(static_cast<std::size_t>(v));
    }
    return labels;
}

std::pair<std::size_t, std::size_t> pgm_geometry(const Shape& shape) {
    if (shape.size() == 2) {
        return {shape[0], shape[1]};
    }
    if (shape.size() == 3 && shape[0] == 1) {
        return {shape[1], shape[2]};
    }
    std::size_t n = shape_size(shape);
    auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (shape.size() == 1 && side * side == n) {
        return {side, side};
    }
    return {1, n};
}

std::string encode_pgm(const Tensor& image, const InputBounds& bounds) {
    auto [h, w] = pgm_geometry(image.shape());
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (std::size_t i = 0; i < image.size(); ++i) {
        double scaled = (image[i] - bounds.lo) / (bounds.hi - bounds.lo) * 255.0;
        out += static_cast<char>(static_cast<unsigned char>(std::clamp(std::round(scaled), 0.0, 255.0)));
    }
    return out;
}

Tensor decode_pgm(std::string_view bytes, const InputBounds& bounds) {
    std::size_t pos = 0;
    auto token = [&]() {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            }
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
                continue;
            }
            break;
        }
        std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        }
        return bytes.substr(start, pos - start);
    };
    auto number = [&](const char* what) {
        auto t = token();
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
            throw FormatError(std::string("malformed PGM header: bad ") + what, pos);
        }
        return v;
    };
    if (token() != "P5") {
        throw FormatError("malformed PGM header: expected P5", 0);
    }
    auto w = number("width");
    auto h = number("height");
    auto maxval = number("maxval");
    if (maxval != 255 || w == 0 || h == 0) {
        throw FormatError("unsupported PGM: need 8-bit samples and a non-empty image", pos);
    }
    ++pos; // single whitespace before the raster
    if (bytes.size() < pos + w * h) {
        throw FormatError("truncated PGM raster", bytes.size());
    }
    std::vector<double> values(w * h);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto b = static_cast<unsigned char>(bytes[pos + i]);
        values[i] = bounds.lo + (bounds.hi - bounds.lo) * static_cast<double>(b) / 255.0;
    }
    return Tensor({h, w}, std::move(values));
}

void save_pgm(const std::filesystem::path& path, const Tensor& image, const InputBounds& bounds) {
    write_file(path, encode_pgm(image, bounds));
}

Tensor load_pgm(const std::filesystem::path& path, const InputBounds& bounds) {
    return decode_pgm(read_file(path), bounds);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw FormatError("write failed for " + path.string());
    }
}

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

} // namespace dlv
