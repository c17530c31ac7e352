// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/refinement.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dlv/errors.hpp"
#include "dlv/evalkit.hpp"
#include "dlv/preimage.hpp"

namespace dlv {

namespace {

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Indices of `scores` ordered by descending score, ties towards the lower index.
std::vector<std::size_t> rank(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

/// Corners of the region box (all of them up to kCornerCap, otherwise random
/// ones) followed by `samples` uniform points.
std::vector<Tensor> sample_region(const Region& region, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor> points;
    const std::size_t d = region.size();
    auto corner = [&](std::uint64_t bits) {
        Tensor t = region.base;
        for (std::size_t i = 0; i < d; ++i) {
            t[region.dims[i]] = (bits >> i) & 1u ? region.upper(i) : region.lower(i);
        }
        return t;
    };
    if (d < 64 && (std::uint64_t{1} << d) <= kCornerCap) {
        for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << d); ++bits) {
            points.push_back(corner(bits));
        }
    } else {
        for (std::size_t n = 0; n < kCornerCap; ++n) {
            Tensor t = region.base;
            for (std::size_t i = 0; i < d; ++i) {
                t[region.dims[i]] = rng() & 1u ? region.upper(i) : region.lower(i);
            }
            points.push_back(std::move(t));
        }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t n = 0; n < samples; ++n) {
        Tensor t = region.base;
        for (std::size_t i = 0; i < d; ++i) {
            double lo = region.lower(i), hi = region.upper(i);
            t[region.dims[i]] = lo + (hi - lo) * unit(rng);
        }
        points.push_back(std::move(t));
    }
    return points;
}

void check_adjacent(const Region& prev_region, const Region& region) {
    if (region.layer != prev_region.layer + 1) {
        throw Error("region at layer " + std::to_string(region.layer) + " does not follow layer " +
                    std::to_string(prev_region.layer));
    }
}

/// Subsample of prev_delta of at most `cap` entries, in original order.
std::vector<const Manipulation*> pick_directions(const std::vector<Manipulation>& delta, std::size_t cap,
                                                 std::uint64_t seed) {
    std::vector<std::size_t> idx(delta.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > cap) {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(cap);
        std::sort(idx.begin(), idx.end());
    }
    std::vector<const Manipulation*> out;
    for (auto i : idx) {
        out.push_back(&delta[i]);
    }
    return out;
}

/// Calls f(|Delta_p| per region dim) for every (sample, manipulation) obligation.
template <class F>
std::size_t for_each_obligation(const Network& net, const Region& prev_region,
                                const std::vector<Manipulation>& prev_delta, const Region& region,
                                std::size_t samples, std::uint64_t seed, std::size_t direction_cap, F&& f) {
    check_adjacent(prev_region, region);
    const std::size_t k = region.layer;
    auto dirs = pick_directions(prev_delta, direction_cap, seed);
    auto points = sample_region(prev_region, samples, seed);
    std::vector<double> delta(region.size());
    for (const auto& y : points) {
        auto fy = apply_layer(net, k, y);
        for (const auto* m : dirs) {
            auto moved = apply_manipulation(*m, Activation{prev_region.layer, y});
            auto fd = apply_layer(net, k, moved.tensor);
            for (std::size_t i = 0; i < region.size(); ++i) {
                delta[i] = std::abs(fd[region.dims[i]] - fy[region.dims[i]]);
            }
            f(std::span<const double>(delta));
        }
    }
    return points.size();
}

double obligation_residual(std::span<const double> delta, const std::vector<double>& spans, std::size_t horizon) {
    double sq = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        double n = std::round(delta[i] / spans[i]);
        double r = std::abs(delta[i] - std::min(static_cast<double>(horizon), n) * spans[i]);
        sq += r * r;
    }
    return std::sqrt(sq);
}

std::vector<std::size_t> horizons(std::size_t cap) {
    std::vector<std::size_t> hs;
    for (std::size_t h = 1; h <= std::max<std::size_t>(cap, 1); h *= 2) {
        hs.push_back(h);
    }
    return hs;
}

} // namespace

DimensionSelection select_dims_start(const Tensor& activation, std::size_t layer, std::size_t count) {
    if (count > activation.size()) {
        throw Error("cannot select " + std::to_string(count) + " dimensions from a layer of width " +
                    std::to_string(activation.size()));
    }
    DimensionSelection sel;
    sel.layer = layer;
    sel.average = mean(activation.values());
    std::vector<double> sal(activation.size());
    for (std::size_t p = 0; p < sal.size(); ++p) {
        sal[p] = std::abs(activation[p] - sel.average);
    }
    auto order = rank(sal);
    for (std::size_t i = 0; i < count; ++i) {
        sel.dims.push_back(order[i]);
        sel.saliency.push_back(sal[order[i]]);
    }
    return sel;
}

DimensionSelection select_dims_next(const Network& net, std::size_t k, const Tensor& activation,
                                    const DimensionSelection& prev) {
    if (k == 0 || k > net.layer_count()) {
        throw Error("select_dims_next: layer " + std::to_string(k) + " out of range");
    }
    if (prev.layer + 1 != k) {
        throw Error("select_dims_next: previous selection is at layer " + std::to_string(prev.layer));
    }
    if (activation.size() != net.width(k)) {
        throw ShapeError(k, "activation width does not match the layer");
    }
    const std::size_t prev_width = net.width(k - 1);
    std::vector<std::vector<std::size_t>> feeds(prev_width);
    for (std::size_t p = 0; p < activation.size(); ++p) {
        for (auto q : connected_inputs(net, k, p)) {
            feeds[q].push_back(p);
        }
    }
    DimensionSelection sel;
    sel.layer = k;
    sel.average = mean(activation.values());
    std::vector<double> sal(activation.size());
    for (std::size_t p = 0; p < sal.size(); ++p) {
        sal[p] = std::abs(activation[p] - sel.average);
    }
    std::vector<bool> taken(activation.size(), false);
    for (auto q : prev.dims) {
        if (feeds.at(q).empty()) {
            throw Error("dimension " + std::to_string(q) + " of layer " + std::to_string(k - 1) +
                        " is not connected to layer " + std::to_string(k));
        }
        std::optional<std::size_t> best;
        for (auto p : feeds[q]) {
            if (!taken[p] && (!best || sal[p] > sal[*best] || (sal[p] == sal[*best] && p < *best))) {
                best = p;
            }
        }
        if (best) {
            taken[*best] = true;
            sel.dims.push_back(*best);
        }
    }
    std::stable_sort(sel.dims.begin(), sel.dims.end(), [&](std::size_t a, std::size_t b) {
        return sal[a] > sal[b] || (sal[a] == sal[b] && a < b);
    });
    for (auto p : sel.dims) {
        sel.saliency.push_back(sal[p]);
    }
    return sel;
}

std::vector<Interval> region_intervals(const Region& region) {
    std::vector<Interval> box(region.base.size());
    for (std::size_t p = 0; p < box.size(); ++p) {
        box[p] = {region.base[p], region.base[p]};
    }
    for (std::size_t i = 0; i < region.size(); ++i) {
        box[region.dims[i]] = {region.lower(i), region.upper(i)};
    }
    return box;
}

std::vector<Interval> interval_image(const Network& net, std::size_t k, const std::vector<Interval>& box) {
    if (box.size() != net.width(k - 1)) {
        throw ShapeError(k, "interval box width does not match the layer input");
    }
    const auto& spec = net.layer(k);
    std::vector<Interval> out(net.width(k));
    if (auto map = affine_map(net, k)) {
        const auto& w = map->matrix;
        for (std::size_t r = 0; r < w.rows; ++r) {
            double c = map->offset[r], rad = 0.0;
            for (std::size_t j = 0; j < w.cols; ++j) {
                double wij = w(r, j);
                c += wij * 0.5 * (box[j].lo + box[j].hi);
                rad += std::abs(wij) * 0.5 * (box[j].hi - box[j].lo);
            }
            out[r] = {c - rad, c + rad};
        }
        return out;
    }
    if (spec.kind == LayerKind::Softmax) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            // each bound is attained with x_i at one end and the others at the opposite end
            double top = box[i].hi, bottom = box[i].lo;
            double sum_hi = 0.0, sum_lo = 0.0;
            for (std::size_t j = 0; j < box.size(); ++j) {
                if (j != i) {
                    sum_hi += std::exp(box[j].lo - top);
                    sum_lo += std::exp(box[j].hi - bottom);
                }
            }
            out[i] = {1.0 / (1.0 + sum_lo), 1.0 / (1.0 + sum_hi)};
        }
        return out;
    }
    // the remaining kinds are monotone in every coordinate
    std::vector<double> lo(box.size()), hi(box.size());
    for (std::size_t j = 0; j < box.size(); ++j) {
        lo[j] = box[j].lo;
        hi[j] = box[j].hi;
    }
    auto flo = apply_layer(net, k, Tensor(net.shape(k - 1), std::move(lo)));
    auto fhi = apply_layer(net, k, Tensor(net.shape(k - 1), std::move(hi)));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {flo[i], fhi[i]};
    }
    return out;
}

CoverageCheck check_region_covers(const Network& net, const Region& prev_region, const Region& region,
                                  std::size_t samples, std::uint64_t seed) {
    if (samples == 0) {
        throw Error("coverage check needs at least one sample");
    }
    check_adjacent(prev_region, region);
    auto box = region.box();
    CoverageCheck check;
    check.violated.assign(region.size(), false);
    for (const auto& y : sample_region(prev_region, samples, seed)) {
        auto image = apply_layer(net, region.layer, y);
        ++check.samples;
        for (std::size_t i = 0; i < region.size(); ++i) {
            double v = image[region.dims[i]];
            if (v < box.bounds[i].lo - kRegionTolerance || v > box.bounds[i].hi + kRegionTolerance) {
                check.violated[i] = true;
            }
        }
        double r = box.distance(image);
        if (r > check.worst_residual || check.worst_sample.empty()) {
            check.worst_residual = std::max(check.worst_residual, r);
            check.worst_sample = y.data();
        }
    }
    check.covered = check.worst_residual <= kRegionTolerance;
    return check;
}

Region grow_region(const Network& net, std::size_t k, const Region& prev_region, const DimensionSelection& selection,
                   const SearchConfig& config) {
    if (prev_region.layer + 1 != k || selection.layer != k) {
        throw Error("grow_region: layers do not line up at " + std::to_string(k));
    }
    auto base = apply_layer(net, k, prev_region.base);
    auto image = interval_image(net, k, region_intervals(prev_region));
    std::vector<double> spans;
    for (auto p : selection.dims) {
        spans.push_back(std::max({image[p].hi - base[p], base[p] - image[p].lo, 1e-6}));
    }
    Region region(k, std::move(base), selection.dims, std::move(spans), std::vector<std::size_t>(selection.dims.size(), 1));
    CoverageCheck check;
    for (std::size_t round = 0; round <= config.growth_cap; ++round) {
        check = check_region_covers(net, prev_region, region, config.coverage_samples, config.seed);
        if (check.covered) {
            return region;
        }
        if (round == config.growth_cap) {
            break;
        }
        for (std::size_t i = 0; i < region.size(); ++i) {
            if (check.violated[i]) {
                region.counts[i] *= 2;
            }
        }
    }
    throw CoverageFailure(k, check.worst_residual, check.worst_sample);
}

ResidualCheck refinement_residual(const Network& net, const Region& prev_region,
                                  const std::vector<Manipulation>& prev_delta, const Region& region,
                                  std::size_t horizon, std::size_t samples, std::uint64_t seed,
                                  std::size_t direction_cap) {
    ResidualCheck check;
    check.samples = for_each_obligation(net, prev_region, prev_delta, region, samples, seed, direction_cap,
                                        [&](std::span<const double> delta) {
                                            ++check.obligations;
                                            check.max_residual = std::max(
                                                check.max_residual, obligation_residual(delta, region.spans, horizon));
                                        });
    return check;
}

Refinement refine_manipulations(const Network& net, const Region& prev_region,
                                const std::vector<Manipulation>& prev_delta, const Region& region, double epsilon,
                                const SearchConfig& config) {
    if (!(epsilon > 0.0)) {
        throw Error("refinement precision must be positive");
    }
    const auto hs = horizons(config.horizon_cap);
    const std::size_t levels = config.halving_cap + 1;
    std::vector<std::vector<double>> scaled(levels, region.spans);
    for (std::size_t j = 1; j < levels; ++j) {
        for (std::size_t i = 0; i < scaled[j].size(); ++i) {
            scaled[j][i] = scaled[j - 1][i] / 2.0;
        }
    }
    // worst residual per (halvings, horizon) over one sample set
    auto table = [&](std::uint64_t seed, std::size_t& samples, std::size_t& obligations) {
        std::vector<std::vector<double>> worst(levels, std::vector<double>(hs.size(), 0.0));
        obligations = 0;
        samples = for_each_obligation(net, prev_region, prev_delta, region, config.coverage_samples, seed,
                                      config.direction_cap, [&](std::span<const double> delta) {
                                          ++obligations;
                                          for (std::size_t j = 0; j < levels; ++j) {
                                              for (std::size_t h = 0; h < hs.size(); ++h) {
                                                  worst[j][h] = std::max(
                                                      worst[j][h], obligation_residual(delta, scaled[j], hs[h]));
                                              }
                                          }
                                      });
        return worst;
    };
    std::size_t samples = 0, obligations = 0, resamples = 0, reobligations = 0;
    auto main = table(config.seed, samples, obligations);
    auto fresh = table(config.seed + 1, resamples, reobligations);
    double best_seen = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < levels; ++j) {
        for (std::size_t h = 0; h < hs.size(); ++h) {
            best_seen = std::min(best_seen, main[j][h]);
            if (main[j][h] <= epsilon && fresh[j][h] <= 2.0 * epsilon) {
                Refinement out{region, {}};
                out.region.spans = scaled[j];
                for (auto& m : out.region.counts) {
                    m <<= j;
                }
                auto& c = out.certificate;
                c.layer = region.layer;
                c.horizon = hs[h];
                c.samples = samples;
                c.obligations = obligations;
                c.max_residual = main[j][h];
                c.epsilon = epsilon;
                c.seed = config.seed;
                c.halvings = j;
                c.stability_residual = fresh[j][h];
                return out;
            }
        }
    }
    throw RefinementFailure(region.layer, best_seen);
}

std::vector<LayerReport> run_algorithm1(const Network& net, const Tensor& input, const SearchConfig& config) {
    const std::size_t n = net.layer_count();
    const std::size_t l = config.start_layer;
    if (l > n) {
        throw Error("start layer " + std::to_string(l) + " beyond the output layer " + std::to_string(n));
    }
    auto acts = forward(net, input);
    PreimageChain chain(net, acts);

    DimensionSelection sel = select_dims_start(acts[l], l, config.dims);
    Region region = Region::uniform(l, acts[l], sel.dims, config.span, config.span_count);
    Region prev_region;
    std::vector<Manipulation> prev_delta;
    std::vector<LayerReport> reports;

    for (std::size_t k = l; k <= n; ++k) {
        LayerReport report;
        report.layer = k;
        if (k > l) {
            sel = select_dims_next(net, k, acts[k], sel);
            Region grown;
            try {
                grown = grow_region(net, k, prev_region, sel, config);
            } catch (const Error& e) {
                throw PhaseError(k, "grow", e.what());
            }
            try {
                auto refined = refine_manipulations(net, prev_region, prev_delta, grown, config.epsilon, config);
                region = std::move(refined.region);
                report.certificate = refined.certificate;
            } catch (const Error& e) {
                throw PhaseError(k, "refine", e.what());
            }
        }
        auto partition = partition_features(region, config.feature_dims, region_saliency(region));
        std::vector<Manipulation> delta;
        try {
            delta = feature_manipulations(region, partition, config.dimension_cap);
        } catch (const Error& e) {
            throw PhaseError(k, "manipulations", e.what());
        }
        chain.set_constraint(k, region.box());
        PointEvaluator evaluator(chain, k, region.dims);
        try {
            report.outcome = config.mode == SearchMode::SinglePath
                                 ? single_path_search(evaluator, region, partition, config)
                                 : mcts_search(evaluator, region, partition, config);
        } catch (const Error& e) {
            throw PhaseError(k, "search", e.what());
        }
        auto& out = report.outcome;
        if (out.verdict == Verdict::Adversarial && !out.witness_input && out.witness) {
            out.witness_input = map_back_to_input(chain, Activation{k, *out.witness}, out.original_class);
            if (out.witness_input) {
                out.l1 = l_distance(*out.witness_input, input, 1);
                out.l2 = l_distance(*out.witness_input, input, 2);
            } else {
                out.note += "; no input-layer reconstruction";
            }
        }
        report.region = region;
        report.manipulation_count = delta.size();
        Verdict verdict = out.verdict;
        reports.push_back(std::move(report));
        if (verdict != Verdict::Safe) {
            break;
        }
        prev_region = region;
        prev_delta = std::move(delta);
    }
    return reports;
}

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) {
        throw NumericError(0, "non-finite constant in constraint export");
    }
    std::array<char, 512> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), std::abs(v), std::chars_format::fixed);
    if (ec != std::errc{}) {
        throw NumericError(0, "constant too long for constraint export");
    }
    std::string s(buf.data(), end);
    if (s.find('.') == std::string::npos) {
        s += ".0";
    }
    return v < 0.0 ? "(- " + s + ")" : s;
}

struct Expr {
    bool constant = true;
    double value = 0.0;
    std::string text;

    static Expr of(double v) { return {true, v, num(v)}; }
    static Expr var(std::string name) { return {false, 0.0, std::move(name)}; }
};

/// Expressions for every dim of activation k given expressions for activation k-1.
std::vector<Expr> layer_exprs(const Network& net, std::size_t k, const std::vector<Expr>& in,
                              const std::vector<std::size_t>& wanted) {
    const auto& spec = net.layer(k);
    if (!is_piecewise_linear(spec.kind)) {
        throw UnsupportedLayer("layer " + std::to_string(k) + " (" + std::string(to_string(spec.kind)) +
                               ") has no linear-arithmetic encoding");
    }
    std::vector<Expr> out(net.width(k));
    if (auto map = affine_map(net, k)) {
        for (auto p : wanted) {
            double c = map->offset[p];
            std::string terms;
            for (std::size_t j = 0; j < map->matrix.cols; ++j) {
                double w = map->matrix(p, j);
                if (w == 0.0) {
                    continue;
                }
                if (in[j].constant) {
                    c += w * in[j].value;
                } else {
                    terms += " (* " + num(w) + " " + in[j].text + ")";
                }
            }
            out[p] = terms.empty() ? Expr::of(c) : Expr{false, 0.0, "(+ " + num(c) + terms + ")"};
        }
        return out;
    }
    for (auto p : wanted) {
        switch (spec.kind) {
        case LayerKind::Relu: {
            const auto& e = in[p];
            out[p] = e.constant ? Expr::of(std::max(0.0, e.value))
                                : Expr{false, 0.0, "(ite (> " + e.text + " 0.0) " + e.text + " 0.0)"};
            break;
        }
        case LayerKind::MaxPool: {
            auto window = connected_inputs(net, k, p);
            bool all_const = std::all_of(window.begin(), window.end(), [&](std::size_t q) { return in[q].constant; });
            if (all_const) {
                double m = -std::numeric_limits<double>::infinity();
                for (auto q : window) {
                    m = std::max(m, in[q].value);
                }
                out[p] = Expr::of(m);
                break;
            }
            std::string text = "(let ((m0 " + in[window[0]].text + ")) ";
            std::string close = ")";
            for (std::size_t i = 1; i < window.size(); ++i) {
                auto prev = "m" + std::to_string(i - 1);
                const auto& e = in[window[i]].text;
                text += "(let ((m" + std::to_string(i) + " (ite (> " + e + " " + prev + ") " + e + " " + prev + "))) ";
                close += ")";
            }
            out[p] = Expr{false, 0.0, text + "m" + std::to_string(window.size() - 1) + close};
            break;
        }
        default: {
            auto src = connected_inputs(net, k, p);
            out[p] = src.empty() ? Expr::of(0.0) : in[src.front()];
            break;
        }
        }
    }
    return out;
}

std::string box_condition(const std::vector<std::string>& names, const std::vector<Interval>& bounds) {
    std::string s = "(and";
    for (std::size_t i = 0; i < names.size(); ++i) {
        s += " (<= " + num(bounds[i].lo) + " " + names[i] + ") (<= " + names[i] + " " + num(bounds[i].hi) + ")";
    }
    return s + ")";
}

std::vector<Interval> box_bounds(const Region& region) { return region.box().bounds; }

} // namespace

std::string export_constraints(const Network& net, std::size_t k, const Region& prev_region, const Region& region,
                               const std::vector<Manipulation>& prev_delta, SmtFormula which,
                               const SmtOptions& options) {
    if (k == 0 || k > net.layer_count() || region.layer != k) {
        throw Error("export_constraints: region is not at layer " + std::to_string(k));
    }
    check_adjacent(prev_region, region);
    std::vector<std::string> xs;
    std::vector<Expr> in(prev_region.base.size());
    for (std::size_t q = 0; q < in.size(); ++q) {
        in[q] = Expr::of(prev_region.base[q]);
    }
    for (auto q : prev_region.dims) {
        xs.push_back("x_" + std::to_string(q));
        in[q] = Expr::var(xs.back());
    }
    std::string binders = "(";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        binders += (i ? " (" : "(") + xs[i] + " Real)";
    }
    binders += ")";
    auto image = layer_exprs(net, k, in, region.dims);

    std::ostringstream os;
    os << "; layer " << k << "\n";
    os << "; formula: " << (which == SmtFormula::RegionCoverage ? "region-coverage" : "manipulation-refinement")
       << "\n";
    os << "; epsilon " << num(options.epsilon) << "\n";
    os << "; seed " << options.seed << "\n";
    os << "; sat <=> the formula holds\n";
    os << "(set-logic LRA)\n";

    std::vector<std::string> ys;
    std::string lets = "(";
    for (std::size_t i = 0; i < region.size(); ++i) {
        auto p = region.dims[i];
        ys.push_back("y_" + std::to_string(p));
        lets += (i ? " (" : "(") + ys.back() + " " + image[p].text + ")";
    }
    lets += ")";

    if (which == SmtFormula::RegionCoverage) {
        os << "(assert (forall " << binders << " (=> " << box_condition(xs, box_bounds(prev_region)) << " (let "
           << lets << " " << box_condition(ys, box_bounds(region)) << "))))\n";
        os << "(check-sat)\n";
        return os.str();
    }

    if (prev_delta.empty()) {
        throw Error("refinement export needs at least one manipulation");
    }
    const std::size_t h = std::max<std::size_t>(options.horizon, 1);
    double eps2 = options.epsilon * options.epsilon;
    std::string conj = "(and";
    for (const auto& m : prev_delta) {
        if (m.layer != prev_region.layer) {
            throw Error("manipulation layer does not match the previous region");
        }
        auto moved = in;
        for (std::size_t i = 0; i < m.dims.size(); ++i) {
            if (m.direction[i] == 0) {
                continue;
            }
            auto q = m.dims[i];
            double shift = m.direction[i] * m.spans[i];
            moved[q] = moved[q].constant ? Expr::of(moved[q].value + shift)
                                         : Expr{false, 0.0, "(+ " + moved[q].text + " " + num(shift) + ")"};
        }
        auto target = layer_exprs(net, k, moved, region.dims);

        std::string cs = "(";
        std::string domain = "(and";
        for (std::size_t t = 0; t < h; ++t) {
            for (auto p : region.dims) {
                auto c = "c_" + std::to_string(t) + "_" + std::to_string(p);
                cs += "(" + c + " Real) ";
                domain += " (or (= " + c + " (- 1.0)) (= " + c + " 0.0) (= " + c + " 1.0))";
            }
        }
        cs.back() = ')';
        domain += ")";

        std::string tlets = "(";
        for (std::size_t i = 0; i < region.size(); ++i) {
            auto p = region.dims[i];
            tlets += (i ? " (" : "(") + std::string("t_") + std::to_string(p) + " " + target[p].text + ")";
        }
        tlets += ")";

        auto position = [&](std::size_t t, std::size_t i) {
            auto p = region.dims[i];
            if (t == 0) {
                return ys[i];
            }
            std::string sum = "(+";
            for (std::size_t u = 0; u < t; ++u) {
                sum += " c_" + std::to_string(u) + "_" + std::to_string(p);
            }
            return "(+ " + ys[i] + " (* " + num(region.spans[i]) + " " + sum + ")))";
        };
        std::string any = "(or";
        for (std::size_t t = 0; t < h; ++t) {
            std::string step = "(and";
            std::string size = "(+";
            for (std::size_t i = 0; i < region.size(); ++i) {
                auto p = region.dims[i];
                auto a = position(t, i), b = position(t + 1, i);
                auto tp = "t_" + std::to_string(p);
                step += " (or (and (<= " + a + " " + tp + ") (<= " + tp + " " + b + ")) (and (<= " + b + " " + tp +
                        ") (<= " + tp + " " + a + ")))";
                auto c = "c_" + std::to_string(t) + "_" + std::to_string(p);
                size += " (ite (= " + c + " 0.0) 0.0 " + num(region.spans[i] * region.spans[i]) + ")";
            }
            step += " (<= " + size + " 0.0) " + num(eps2) + "))";
            any += " " + step;
        }
        any += ")";
        conj += " (let " + tlets + " (exists " + cs + " (and " + domain + " " + any + ")))";
    }
    conj += ")";
    os << "(assert (forall " << binders << " (=> " << box_condition(xs, box_bounds(prev_region)) << " (let " << lets
       << " " << conj << "))))\n";
    os << "(check-sat)\n";
    return os.str();
}

} // namespace dlv
