// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

#include "dlv/errors.hpp"
#include "dlv/evalkit.hpp"

namespace dlv {

namespace {

using Coords = std::vector<std::int32_t>;

struct CoordsHash {
    std::size_t operator()(const Coords& c) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (auto v : c) {
            h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(v));
            h *= 1099511628211ull;
        }
        return h;
    }
};

double margin_of(std::span<const double> scores, std::size_t cls) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != cls) {
            best = std::max(best, scores[i]);
        }
    }
    return scores[cls] - best;
}

bool is_adversarial(const PointEvaluation& e, std::size_t original) { return e.realizable && e.cls != original; }

/// Steps of each manipulation expressed in lattice coordinates of `region`.
std::vector<std::vector<std::int8_t>> lattice_steps(const Region& region, const std::vector<Manipulation>& delta) {
    std::vector<std::vector<std::int8_t>> steps;
    steps.reserve(delta.size());
    for (const auto& m : delta) {
        if (m.layer != region.layer) {
            throw Error("manipulation layer " + std::to_string(m.layer) + " does not match region layer " +
                        std::to_string(region.layer));
        }
        std::vector<std::int8_t> step(region.size(), 0);
        for (std::size_t i = 0; i < m.dims.size(); ++i) {
            auto it = std::find(region.dims.begin(), region.dims.end(), m.dims[i]);
            if (it == region.dims.end()) {
                throw Error("manipulation touches dimension " + std::to_string(m.dims[i]) + " outside the region");
            }
            auto pos = static_cast<std::size_t>(it - region.dims.begin());
            if (std::abs(m.spans[i] - region.spans[pos]) > kRegionTolerance * std::max(1.0, region.spans[pos])) {
                throw Error("manipulation span differs from the region span on dimension " +
                            std::to_string(m.dims[i]));
            }
            step[pos] = m.direction[i];
        }
        steps.push_back(std::move(step));
    }
    return steps;
}

struct LatticeRecord {
    Coords coords;
    PointEvaluation eval;
};

struct LatticeSearch {
    VerificationOutcome outcome;
    std::vector<LatticeRecord> records;
};

void attach_witness(VerificationOutcome& out, const PointEvaluator& evaluator, const Region& region,
                    const Coords& coords, const PointEvaluation& eval) {
    out.verdict = Verdict::Adversarial;
    out.new_class = eval.cls;
    out.witness_coords = coords;
    out.witness = region.lattice_point(coords);
    out.witness_input = eval.input;
    if (eval.input) {
        out.l1 = l_distance(*eval.input, evaluator.original_input(), 1);
        out.l2 = l_distance(*eval.input, evaluator.original_input(), 2);
    }
}

LatticeSearch explore(const PointEvaluator& evaluator, const Region& region, const std::vector<Manipulation>& delta,
                      std::size_t budget, bool keep_records) {
    auto steps = lattice_steps(region, delta);
    LatticeSearch result;
    auto& out = result.outcome;
    out.layer = region.layer;
    out.original_class = evaluator.original_class();

    std::unordered_set<Coords, CoordsHash> visited;
    std::deque<Coords> queue;
    auto visit = [&](const Coords& c) {
        visited.insert(c);
        ++out.explored;
        auto eval = evaluator.evaluate(region.lattice_point(c));
        if (!eval.realizable) {
            ++out.unrealizable;
        }
        bool hit = is_adversarial(eval, out.original_class);
        if (hit) {
            attach_witness(out, evaluator, region, c, eval);
        }
        if (keep_records) {
            result.records.push_back({c, std::move(eval)});
        }
        queue.push_back(c);
        return hit;
    };

    if (budget == 0) {
        out.verdict = Verdict::Inconclusive;
        out.note = "exploration budget exhausted";
        return result;
    }
    if (visit(Coords(region.size(), 0))) {
        return result;
    }
    while (!queue.empty()) {
        Coords cur = std::move(queue.front());
        queue.pop_front();
        for (const auto& step : steps) {
            Coords next = cur;
            for (std::size_t i = 0; i < next.size(); ++i) {
                auto m = static_cast<std::int32_t>(region.counts[i]);
                next[i] = std::clamp(next[i] + step[i], -m, m);
            }
            if (next == cur || visited.count(next)) {
                continue;
            }
            if (out.explored >= budget) {
                out.verdict = Verdict::Inconclusive;
                out.note = "exploration budget exhausted";
                return result;
            }
            if (visit(next)) {
                return result;
            }
        }
    }
    out.verdict = Verdict::Safe;
    out.note = "all " + std::to_string(out.explored) + " reachable lattice points keep class " +
               std::to_string(out.original_class);
    return result;
}

} // namespace

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Safe: return "safe";
    case Verdict::Adversarial: return "adversarial";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::string_view to_string(SearchMode m) { return m == SearchMode::SinglePath ? "single" : "mcts"; }

SearchConfig preset_2d() {
    SearchConfig c;
    c.start_layer = 0;
    c.dims = 2;
    c.span = 1.0;
    c.span_count = 1;
    c.epsilon = 0.1;
    c.feature_dims = 2;
    return c;
}

SearchConfig preset_mnist_mini() {
    SearchConfig c;
    c.start_layer = 1;
    c.dims = 10;
    c.span = 1.0;
    c.span_count = 1;
    c.epsilon = 1.0;
    c.feature_dims = 5;
    return c;
}

PointEvaluator::PointEvaluator(const PreimageChain& chain, std::size_t layer, std::vector<std::size_t> dims)
    : chain_(&chain), layer_(layer), dims_(std::move(dims)) {
    const auto& net = chain.network();
    if (layer > net.layer_count()) {
        throw Error("evaluator layer " + std::to_string(layer) + " beyond the output layer");
    }
    original_ = argmax(chain.base(net.logits_layer()).values());
}

PointEvaluation PointEvaluator::evaluate(const Tensor& point) const {
    const auto& net = chain_->network();
    PointEvaluation e;
    if (layer_ >= net.logits_layer()) {
        e.realizable = true;
        e.cls = argmax(point.values());
        e.margin = margin_of(point.values(), original_);
        if (layer_ == 0) {
            e.input = point;
        }
        return e;
    }
    Tensor input;
    if (layer_ == 0) {
        input = point;
        const auto& b = net.input_bounds();
        for (auto& v : input.values()) {
            v = std::clamp(v, b.lo, b.hi);
        }
    } else {
        auto r = realize_input(*chain_, PreimageTarget::on_dims(layer_, point, dims_));
        if (!r) {
            return e;
        }
        input = std::move(r.point->values);
    }
    auto acts = forward(net, input);
    const auto& logits = acts[net.logits_layer()];
    e.realizable = true;
    e.cls = argmax(logits.values());
    e.margin = margin_of(logits.values(), original_);
    e.input = std::move(input);
    return e;
}

VerificationOutcome verify_0_variation(const PointEvaluator& evaluator, const Region& region,
                                       const std::vector<Manipulation>& delta, const SearchConfig& config) {
    return explore(evaluator, region, delta, config.max_explored, false).outcome;
}

BruteForceResult brute_force_oracle(const PointEvaluator& evaluator, const Region& region, double quantum) {
    if (!(quantum > 0.0)) {
        throw Error("quantum must be positive");
    }
    std::vector<std::vector<double>> axes;
    std::size_t total = 1;
    for (std::size_t i = 0; i < region.size(); ++i) {
        double lo = region.lower(i), hi = region.upper(i);
        std::vector<double> axis;
        auto steps = static_cast<std::size_t>(std::floor((hi - lo) / quantum + 1e-9));
        if (steps + 1 > kBruteForceLimit) {
            throw GridTooLarge("brute-force grid exceeds " + std::to_string(kBruteForceLimit) + " points");
        }
        for (std::size_t s = 0; s <= steps; ++s) {
            axis.push_back(lo + static_cast<double>(s) * quantum);
        }
        if (axis.back() < hi - kRegionTolerance) {
            axis.push_back(hi);
        }
        if (total > kBruteForceLimit / axis.size()) {
            throw GridTooLarge("brute-force grid exceeds " + std::to_string(kBruteForceLimit) + " points");
        }
        total *= axis.size();
        axes.push_back(std::move(axis));
    }
    BruteForceResult result;
    std::vector<std::size_t> idx(region.size(), 0);
    Tensor point = region.base;
    for (std::size_t n = 0; n < total; ++n) {
        for (std::size_t i = 0; i < region.size(); ++i) {
            point[region.dims[i]] = axes[i][idx[i]];
        }
        ++result.points;
        auto e = evaluator.evaluate(point);
        if (is_adversarial(e, evaluator.original_class())) {
            result.verdict = Verdict::Adversarial;
            result.witness = point;
            return result;
        }
        for (std::size_t i = region.size(); i-- > 0;) {
            if (++idx[i] < axes[i].size()) {
                break;
            }
            idx[i] = 0;
        }
    }
    return result;
}

std::vector<double> region_saliency(const Region& region) {
    auto values = region.base.values();
    double avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    std::vector<double> s;
    s.reserve(region.size());
    for (auto p : region.dims) {
        s.push_back(std::abs(region.base[p] - avg));
    }
    return s;
}

FeaturePartition partition_features(const Region& region, std::size_t dims_per_feature,
                                    const std::vector<double>& saliency) {
    if (dims_per_feature == 0) {
        throw Error("dims_per_feature must be at least 1");
    }
    if (saliency.size() != region.size()) {
        throw Error("saliency must have one score per region dimension");
    }
    std::vector<std::size_t> order(region.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });
    FeaturePartition partition;
    for (std::size_t start = 0; start < order.size(); start += dims_per_feature) {
        Feature f;
        for (std::size_t i = start; i < std::min(order.size(), start + dims_per_feature); ++i) {
            f.positions.push_back(order[i]);
            f.dims.push_back(region.dims[order[i]]);
        }
        partition.features.push_back(std::move(f));
    }
    return partition;
}

Region feature_region(const Region& region, const Feature& feature, const Tensor& base) {
    std::vector<double> spans;
    std::vector<std::size_t> counts;
    for (auto pos : feature.positions) {
        spans.push_back(region.spans[pos]);
        counts.push_back(region.counts[pos]);
    }
    return Region(region.layer, base, feature.dims, std::move(spans), std::move(counts));
}

std::vector<Manipulation> feature_manipulations(const Region& region, const FeaturePartition& partition,
                                                std::size_t cap) {
    std::vector<Manipulation> all;
    for (const auto& f : partition.features) {
        auto part = generate_manipulation_set(feature_region(region, f, region.base), cap);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

VerificationOutcome single_path_search(const PointEvaluator& evaluator, const Region& region,
                                       const FeaturePartition& partition, const SearchConfig& config) {
    VerificationOutcome out;
    out.layer = region.layer;
    out.original_class = evaluator.original_class();
    Coords coords(region.size(), 0);
    for (std::size_t fi = 0; fi < partition.features.size(); ++fi) {
        const auto& feature = partition.features[fi];
        auto sub = feature_region(region, feature, region.lattice_point(coords));
        auto delta = generate_manipulation_set(sub, config.dimension_cap);
        std::size_t budget = config.max_explored > out.explored ? config.max_explored - out.explored : 0;
        auto search = explore(evaluator, sub, delta, budget, true);
        out.explored += search.outcome.explored;
        out.unrealizable += search.outcome.unrealizable;
        if (search.outcome.verdict == Verdict::Adversarial) {
            for (std::size_t i = 0; i < feature.positions.size(); ++i) {
                coords[feature.positions[i]] = search.outcome.witness_coords[i];
            }
            auto& w = search.outcome;
            out.verdict = Verdict::Adversarial;
            out.new_class = w.new_class;
            out.witness_coords = coords;
            out.witness = region.lattice_point(coords);
            out.witness_input = w.witness_input;
            out.l1 = w.l1;
            out.l2 = w.l2;
            out.note = "class change in feature " + std::to_string(fi);
            return out;
        }
        if (search.outcome.verdict == Verdict::Inconclusive) {
            out.verdict = Verdict::Inconclusive;
            out.note = search.outcome.note + " in feature " + std::to_string(fi);
            return out;
        }
        // acts(x,k): keep the boundary point closest to a class change
        const LatticeRecord* pick = nullptr;
        for (const auto& rec : search.records) {
            if (!rec.eval.realizable) {
                continue;
            }
            bool boundary = false;
            for (std::size_t i = 0; i < rec.coords.size(); ++i) {
                if (sub.counts[i] > 0 && std::abs(rec.coords[i]) == static_cast<std::int32_t>(sub.counts[i])) {
                    boundary = true;
                }
            }
            if (boundary && (!pick || rec.eval.margin < pick->eval.margin)) {
                pick = &rec;
            }
        }
        if (pick) {
            for (std::size_t i = 0; i < feature.positions.size(); ++i) {
                coords[feature.positions[i]] = pick->coords[i];
            }
        }
    }
    out.verdict = Verdict::Safe;
    out.note = "no class change over " + std::to_string(partition.features.size()) + " features";
    return out;
}

std::vector<MctsAction> path_to(const Region& region, const FeaturePartition& partition, const Coords& coords) {
    std::vector<MctsAction> path;
    for (std::size_t fi = 0; fi < partition.features.size(); ++fi) {
        const auto& f = partition.features[fi];
        Coords cur(f.positions.size(), 0);
        for (;;) {
            Direction d(f.positions.size(), 0);
            bool moved = false;
            for (std::size_t i = 0; i < f.positions.size(); ++i) {
                std::int32_t want = coords[f.positions[i]];
                if (want != cur[i]) {
                    d[i] = static_cast<std::int8_t>(want > cur[i] ? 1 : -1);
                    cur[i] += d[i];
                    moved = true;
                }
            }
            if (!moved) {
                break;
            }
            path.push_back({fi, direction_index(d)});
        }
    }
    (void)region;
    return path;
}

namespace {

struct MctsNode {
    Coords coords;
    std::size_t parent = std::numeric_limits<std::size_t>::max();
    MctsAction action;
    std::size_t depth = 0;
    std::vector<std::size_t> children;
    std::vector<MctsAction> untried;
    bool expanded_actions = false;
    bool terminal = false;
    double reward = 0.0;
    std::size_t visits = 0;
    double value = 0.0;
};

class Mcts {
  public:
    Mcts(const PointEvaluator& evaluator, const Region& region, const FeaturePartition& partition,
         const SearchConfig& config)
        : evaluator_(evaluator), region_(region), partition_(partition), config_(config), rng_(config.seed) {
        for (const auto& f : partition.features) {
            if (f.dims.size() > config.dimension_cap) {
                throw CombinatorialBlowUp(f.dims.size(), config.dimension_cap);
            }
            action_counts_.push_back(direction_count(f.dims.size()));
        }
        out_.layer = region.layer;
        out_.original_class = evaluator.original_class();
    }

    VerificationOutcome run(const std::vector<MctsAction>& seed_path) {
        if (config_.mcts_iterations == 0) {
            out_.verdict = Verdict::Inconclusive;
            out_.note = "zero iteration budget";
            return out_;
        }
        nodes_.push_back(MctsNode{});
        nodes_[0].coords.assign(region_.size(), 0);
        evaluate(nodes_[0].coords);
        std::size_t iter = 0;
        if (!seed_path.empty()) {
            replay(seed_path);
            ++iter;
        }
        for (; iter < config_.mcts_iterations; ++iter) {
            iterate();
        }
        out_.explored = cache_.size();
        for (const auto& [c, e] : cache_) {
            if (!e.realizable) {
                ++out_.unrealizable;
            }
        }
        if (best_) {
            const auto& [coords, eval] = *best_;
            attach_witness(out_, evaluator_, region_, coords, eval);
            out_.note = "best of " + std::to_string(config_.mcts_iterations) + " iterations";
        } else if (cache_.size() == region_.lattice_size()) {
            out_.verdict = Verdict::Safe;
            out_.note = "every lattice point visited without a class change";
        } else {
            out_.verdict = Verdict::Inconclusive;
            out_.note = "no class change within " + std::to_string(config_.mcts_iterations) +
                        " iterations (not a safety proof)";
        }
        return out_;
    }

  private:
    Coords apply(const Coords& from, const MctsAction& a) const {
        const auto& f = partition_.features[a.feature];
        auto d = direction_from_index(a.direction, f.positions.size());
        Coords next = from;
        for (std::size_t i = 0; i < f.positions.size(); ++i) {
            auto pos = f.positions[i];
            auto m = static_cast<std::int32_t>(region_.counts[pos]);
            next[pos] = std::clamp(next[pos] + d[i], -m, m);
        }
        return next;
    }

    double distance_of(const Coords& c, const PointEvaluation& e) const {
        if (e.input) {
            return l_distance(*e.input, evaluator_.original_input(), 1);
        }
        return l_distance(region_.lattice_point(c), region_.base, 1);
    }

    /// Reward of a point; records it as the best witness when it beats the current one.
    double evaluate(const Coords& c) {
        auto it = cache_.find(c);
        if (it == cache_.end()) {
            it = cache_.emplace(c, evaluator_.evaluate(region_.lattice_point(c))).first;
        }
        const auto& e = it->second;
        if (!is_adversarial(e, out_.original_class)) {
            return 0.0;
        }
        double dist = distance_of(c, e);
        if (!best_ || dist < best_distance_) {
            best_ = std::make_pair(c, e);
            best_distance_ = dist;
        }
        return 1.0 / (1.0 + dist);
    }

    void ensure_actions(std::size_t n) {
        auto& node = nodes_[n];
        if (node.expanded_actions) {
            return;
        }
        node.expanded_actions = true;
        for (std::size_t f = 0; f < action_counts_.size(); ++f) {
            for (std::size_t d = 0; d < action_counts_[f]; ++d) {
                node.untried.push_back({f, d});
            }
        }
    }

    std::size_t add_child(std::size_t parent, const MctsAction& a, Coords coords) {
        MctsNode child;
        child.coords = std::move(coords);
        child.parent = parent;
        child.action = a;
        child.depth = nodes_[parent].depth + 1;
        child.reward = evaluate(child.coords);
        child.terminal = child.reward > 0.0 || child.depth >= config_.mcts_rollout_depth;
        nodes_.push_back(std::move(child));
        std::size_t id = nodes_.size() - 1;
        nodes_[parent].children.push_back(id);
        return id;
    }

    /// Pops untried actions until one moves the point; returns the new child or npos.
    std::size_t expand(std::size_t n) {
        ensure_actions(n);
        while (!nodes_[n].untried.empty()) {
            auto& untried = nodes_[n].untried;
            std::uniform_int_distribution<std::size_t> pick(0, untried.size() - 1);
            std::size_t i = pick(rng_);
            MctsAction a = untried[i];
            untried[i] = untried.back();
            untried.pop_back();
            Coords next = apply(nodes_[n].coords, a);
            if (next != nodes_[n].coords) {
                return add_child(n, a, std::move(next));
            }
        }
        return npos;
    }

    std::size_t select_child(std::size_t n) const {
        const auto& node = nodes_[n];
        double log_n = std::log(static_cast<double>(std::max<std::size_t>(node.visits, 1)));
        std::size_t best = node.children.front();
        double best_score = -std::numeric_limits<double>::infinity();
        for (auto c : node.children) {
            const auto& ch = nodes_[c];
            double visits = static_cast<double>(std::max<std::size_t>(ch.visits, 1));
            double score = ch.value / visits + config_.mcts_exploration * std::sqrt(log_n / visits);
            if (score > best_score) {
                best_score = score;
                best = c;
            }
        }
        return best;
    }

    double rollout(Coords coords, std::size_t depth) {
        std::uniform_int_distribution<std::size_t> pick_feature(0, action_counts_.size() - 1);
        for (std::size_t d = depth; d < config_.mcts_rollout_depth; ++d) {
            std::size_t f = pick_feature(rng_);
            std::uniform_int_distribution<std::size_t> pick_dir(0, action_counts_[f] - 1);
            coords = apply(coords, {f, pick_dir(rng_)});
            double r = evaluate(coords);
            if (r > 0.0) {
                return r;
            }
        }
        return 0.0;
    }

    void backpropagate(std::size_t n, double reward) {
        for (;;) {
            nodes_[n].visits += 1;
            nodes_[n].value += reward;
            if (nodes_[n].parent == npos) {
                break;
            }
            n = nodes_[n].parent;
        }
    }

    void iterate() {
        std::size_t n = 0;
        for (;;) {
            if (nodes_[n].terminal) {
                backpropagate(n, nodes_[n].reward);
                return;
            }
            ensure_actions(n);
            if (!nodes_[n].untried.empty()) {
                std::size_t child = expand(n);
                if (child != npos) {
                    const auto& c = nodes_[child];
                    double reward = c.terminal ? c.reward : rollout(c.coords, c.depth);
                    backpropagate(child, reward);
                    return;
                }
            }
            if (nodes_[n].children.empty()) {
                nodes_[n].terminal = true;
                backpropagate(n, 0.0);
                return;
            }
            n = select_child(n);
        }
    }

    void replay(const std::vector<MctsAction>& path) {
        std::size_t n = 0;
        for (const auto& a : path) {
            if (nodes_[n].terminal) {
                break;
            }
            std::size_t next = npos;
            for (auto c : nodes_[n].children) {
                if (nodes_[c].action == a) {
                    next = c;
                }
            }
            if (next == npos) {
                ensure_actions(n);
                auto& untried = nodes_[n].untried;
                auto it = std::find(untried.begin(), untried.end(), a);
                if (it != untried.end()) {
                    untried.erase(it);
                }
                next = add_child(n, a, apply(nodes_[n].coords, a));
            }
            n = next;
        }
        backpropagate(n, nodes_[n].reward);
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    const PointEvaluator& evaluator_;
    const Region& region_;
    const FeaturePartition& partition_;
    const SearchConfig& config_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> action_counts_;
    std::vector<MctsNode> nodes_;
    std::map<Coords, PointEvaluation> cache_;
    std::optional<std::pair<Coords, PointEvaluation>> best_;
    double best_distance_ = 0.0;
    VerificationOutcome out_;
};

} // namespace

VerificationOutcome mcts_search(const PointEvaluator& evaluator, const Region& region,
                                const FeaturePartition& partition, const SearchConfig& config,
                                const std::vector<MctsAction>& seed_path) {
    return Mcts(evaluator, region, partition, config).run(seed_path);
}

} // namespace dlv
