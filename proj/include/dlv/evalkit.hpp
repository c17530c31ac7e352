// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dlv/network.hpp"
#include "dlv/verifier.hpp"

namespace dlv {

/// order 1: mean absolute per-pixel difference; order 2: root-mean-square difference.
double l_distance(const Tensor& x, const Tensor& y, int order);

/// 1 when x and y are classified differently.
int diff_class(const Network& net, const Tensor& x, const Tensor& y);

struct RunRecord {
    std::size_t image_id = 0;
    std::string method;
    bool success = false;
    std::optional<double> l1;
    std::optional<double> l2;
    std::size_t steps = 0;
    double seconds = 0.0;
    std::string note;
};

struct ReportRow {
    std::string method;
    std::optional<double> avg_l1;
    std::optional<double> avg_l2;
    double success_rate = 0.0; // percent
    std::size_t samples = 0;
    std::size_t successes = 0;
    /// Successes without a distance (no input reconstruction).
    std::size_t excluded = 0;
    double seconds_per_image = 0.0;
};

/// Aggregates the records of one method.
ReportRow summarize(const std::string& method, const std::vector<RunRecord>& records);

struct MethodSpec {
    enum class Kind { Fgsm, Jsma, Dlv };
    Kind kind = Kind::Fgsm;
    double epsilon = 0.1;
    double theta = 1.0;
    double fraction = 0.1;
    std::optional<std::size_t> target;
    SearchConfig search;

    std::string name() const;
};

struct RobustnessReport {
    std::vector<RunRecord> records;
    std::vector<ReportRow> rows;
};

RobustnessReport robustness_report(const Network& net, const std::vector<Tensor>& images,
                                   const std::vector<MethodSpec>& methods);

std::string records_csv(const std::vector<RunRecord>& records);
std::string rows_json(const std::vector<ReportRow>& rows);
std::string rows_text(const std::vector<ReportRow>& rows);

} // namespace dlv
