// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/evalkit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dlv/attacks.hpp"
#include "dlv/errors.hpp"
#include "dlv/refinement.hpp"

namespace dlv {

double l_distance(const Tensor& x, const Tensor& y, int order) {
    if (x.size() != y.size()) {
        throw ShapeError(0, "distance between tensors of different sizes");
    }
    if (x.empty()) {
        throw ShapeError(0, "distance between empty tensors");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = std::abs(x[i] - y[i]);
        if (order == 1) {
            acc += d;
        } else if (order == 2) {
            acc += d * d;
        } else {
            throw Error("distance order must be 1 or 2");
        }
    }
    acc /= static_cast<double>(x.size());
    return order == 1 ? acc : std::sqrt(acc);
}

int diff_class(const Network& net, const Tensor& x, const Tensor& y) {
    return classify(net, x) == classify(net, y) ? 0 : 1;
}

ReportRow summarize(const std::string& method, const std::vector<RunRecord>& records) {
    ReportRow row;
    row.method = method;
    double l1 = 0.0, l2 = 0.0, seconds = 0.0;
    std::size_t with_distance = 0;
    for (const auto& r : records) {
        if (r.method != method) {
            continue;
        }
        ++row.samples;
        seconds += r.seconds;
        if (!r.success) {
            continue;
        }
        ++row.successes;
        if (r.l1 && r.l2) {
            l1 += *r.l1;
            l2 += *r.l2;
            ++with_distance;
        } else {
            ++row.excluded;
        }
    }
    if (with_distance > 0) {
        row.avg_l1 = l1 / static_cast<double>(with_distance);
        row.avg_l2 = l2 / static_cast<double>(with_distance);
    }
    if (row.samples > 0) {
        row.success_rate = 100.0 * static_cast<double>(row.successes) / static_cast<double>(row.samples);
        row.seconds_per_image = seconds / static_cast<double>(row.samples);
    }
    return row;
}

std::string MethodSpec::name() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::Fgsm: os << "fgsm(eps=" << epsilon << ")"; break;
    case Kind::Jsma:
        os << "jsma(theta=" << theta << ",frac=" << fraction;
        if (target) {
            os << ",target=" << *target;
        }
        os << ")";
        break;
    case Kind::Dlv: os << "dlv(" << to_string(search.mode) << ",layer=" << search.start_layer << ")"; break;
    }
    return os.str();
}

RobustnessReport robustness_report(const Network& net, const std::vector<Tensor>& images,
                                   const std::vector<MethodSpec>& methods) {
    if (images.empty()) {
        throw Error("robustness report needs at least one image");
    }
    RobustnessReport report;
    for (const auto& m : methods) {
        auto name = m.name();
        for (std::size_t i = 0; i < images.size(); ++i) {
            RunRecord rec;
            rec.image_id = i;
            rec.method = name;
            auto start = std::chrono::steady_clock::now();
            try {
                if (m.kind == MethodSpec::Kind::Dlv) {
                    auto layers = run_algorithm1(net, images[i], m.search);
                    const auto& out = layers.back().outcome;
                    rec.success = out.verdict == Verdict::Adversarial;
                    for (const auto& l : layers) {
                        rec.steps += l.outcome.explored;
                    }
                    if (rec.success && out.witness_input) {
                        rec.l1 = l_distance(*out.witness_input, images[i], 1);
                        rec.l2 = l_distance(*out.witness_input, images[i], 2);
                    }
                    rec.note = std::string(to_string(out.verdict)) + " at layer " + std::to_string(out.layer);
                } else {
                    auto r = m.kind == MethodSpec::Kind::Fgsm ? fgsm(net, images[i], m.epsilon)
                                                              : jsma(net, images[i], m.theta, m.fraction, m.target);
                    rec.success = r.success;
                    rec.steps = r.steps;
                    if (r.success) {
                        rec.l1 = r.l1;
                        rec.l2 = r.l2;
                    }
                }
            } catch (const std::exception& e) {
                rec.success = false;
                rec.note = e.what();
            }
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            report.records.push_back(std::move(rec));
        }
        report.rows.push_back(summarize(name, report.records));
    }
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? "\"\"" : std::string(1, c);
    }
    return out + "\"";
}

} // namespace

std::string records_csv(const std::vector<RunRecord>& records) {
    std::string out = "image_id,method,success,l1,l2,steps,seconds\n";
    for (const auto& r : records) {
        out += std::to_string(r.image_id) + "," + csv_field(r.method) + "," + (r.success ? "1" : "0") + "," +
               (r.l1 ? fmt(*r.l1) : "") + "," + (r.l2 ? fmt(*r.l2) : "") + "," + std::to_string(r.steps) + "," +
               fmt(r.seconds) + "\n";
    }
    return out;
}

std::string rows_json(const std::vector<ReportRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["method"] = r.method;
        j["avg_l1"] = r.avg_l1 ? nlohmann::ordered_json(*r.avg_l1) : nlohmann::ordered_json(nullptr);
        j["avg_l2"] = r.avg_l2 ? nlohmann::ordered_json(*r.avg_l2) : nlohmann::ordered_json(nullptr);
        j["success_rate"] = r.success_rate;
        j["samples"] = r.samples;
        j["successes"] = r.successes;
        j["excluded_from_distances"] = r.excluded;
        j["seconds_per_image"] = r.seconds_per_image;
        arr.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["distance_convention"] = "L1 = mean |x_i - y_i|, L2 = sqrt(mean (x_i - y_i)^2), per pixel";
    doc["rows"] = std::move(arr);
    return doc.dump(2) + "\n";
}

std::string rows_text(const std::vector<ReportRow>& rows) {
    std::size_t width = 6;
    for (const auto& r : rows) {
        width = std::max(width, r.method.size());
    }
    auto opt = [](const std::optional<double>& v) {
        if (!v) {
            return std::string("n/a");
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *v);
        return std::string(buf);
    };
    std::string out = "# distances: L1 = mean |x_i - y_i|, L2 = sqrt(mean (x_i - y_i)^2), per pixel, over successes\n";
    char line[512];
    std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s  %7s  %8s  %10s\n", static_cast<int>(width), "method", "L1",
                  "L2", "%", "n", "excluded", "s/image");
    out += line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8.2f  %7zu  %8zu  %10.4f\n", static_cast<int>(width),
                      r.method.c_str(), opt(r.avg_l1).c_str(), opt(r.avg_l2).c_str(), r.success_rate, r.samples,
                      r.excluded, r.seconds_per_image);
        out += line;
    }
    return out;
}

} // namespace dlv
