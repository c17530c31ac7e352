// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlv/attacks.hpp"
#include "dlv/cli.hpp"
#include "dlv/evalkit.hpp"
#include "dlv/geometry.hpp"
#include "dlv/io.hpp"
#include "dlv/preimage.hpp"
#include "dlv/refinement.hpp"
#include "dlv/verifier.hpp"
#include "support/test_nets.hpp"

using namespace dlv;
using dlv::testing::fixture;
using dlv::testing::random_input;
using dlv::testing::random_relu_net;

namespace {

struct Check {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Check()>& check) {
    auto start = std::chrono::steady_clock::now();
    Check v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %-28s %s (%.2fs)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) {
        ++failures;
    }
}

/// Runs the CLI with its progress output discarded.
int quiet_cli(const std::vector<std::string>& args) {
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    int code = cli_main(args);
    std::cout.rdbuf(old);
    return code;
}

std::string str(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

double cross_entropy(const Network& net, const Tensor& x, std::size_t label) {
    auto logits = forward(net, x)[net.logits_layer()];
    double m = *std::max_element(logits.values().begin(), logits.values().end());
    double s = 0.0;
    for (double v : logits.values()) {
        s += std::exp(v - m);
    }
    return m + std::log(s) - logits[label];
}

// ---------------------------------------------------------------------------

Check two_d_reproduction() {
    auto start = std::chrono::steady_clock::now();
    auto net = load_network(fixture("curve2d.json"));
    Tensor x({2}, {3.59, 1.11});
    auto cls = classify(net, x);
    auto reports = run_algorithm1(net, x, preset_2d());
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    auto dir = std::filesystem::temp_directory_path() / "dlv_acceptance_2d";
    int code = quiet_cli({"verify", "--model", fixture("curve2d.json").string(), "--image",
                         fixture("point2d.csv").string(), "--preset", "2d", "--out-dir", dir.string()});
    secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (reports.size() != 2) {
        return {false, "expected the run to stop at layer 1, got " + std::to_string(reports.size()) + " layers"};
    }
    const auto& l0 = reports[0].outcome;
    const auto& l1 = reports[1].outcome;
    bool ok0 = reports[0].layer == 0 && l0.verdict == Verdict::Safe && l0.explored == 9;
    bool ok1 = reports[1].layer == 1 && l1.verdict == Verdict::Adversarial && l1.witness_input.has_value();
    std::size_t wcls = ok1 ? classify(net, *l1.witness_input) : cls;
    bool files = std::filesystem::exists(dir / "witness.csv") && std::filesystem::exists(dir / "witness.pgm");
    bool pass = ok0 && ok1 && wcls != cls && code == kExitAdversarial && files && secs < 10.0;
    return {pass, "layer0 " + std::string(to_string(l0.verdict)) + " explored=" + std::to_string(l0.explored) +
                      ", layer1 " + std::string(to_string(l1.verdict)) + ", class " + std::to_string(cls) + " -> " +
                      std::to_string(wcls) + ", cli exit " + std::to_string(code) + ", " + str(secs) + "s < 10s"};
}

Check oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    int agree = 0, safe = 0, adv = 0;
    const double q = 0.01;
    for (int i = 0; i < 20; ++i) {
        auto net = random_relu_net(rng, {2, 10, 10, 2}, {-100.0, 100.0});
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Tensor x({2}, {u(rng), u(rng)});
        std::uniform_int_distribution<std::size_t> m(10, 150);
        std::size_t m0 = m(rng), m1 = m(rng);
        Region region(0, x, {0, 1}, {q, q}, {m0, m1});
        if (region.lattice_size() > 100000) {
            return {false, "grid larger than 1e5"};
        }
        PreimageChain chain(net, x);
        PointEvaluator ev(chain, 0, region.dims);
        auto v = verify_0_variation(ev, region, generate_manipulation_set(region), SearchConfig{});
        auto b = brute_force_oracle(ev, region, q);
        if (v.verdict == b.verdict) {
            ++agree;
        }
        (b.verdict == Verdict::Safe ? safe : adv)++;
    }
    return {agree == 20, std::to_string(agree) + "/20 agree (" + std::to_string(safe) + " safe, " +
                             std::to_string(adv) + " adversarial)"};
}

Check covering_property() {
    std::mt19937_64 rng(99);
    std::size_t violations = 0, checked = 0;
    for (int r = 0; r < 10; ++r) {
        std::uniform_int_distribution<std::size_t> nd(1, 3), cnt(0, 3);
        std::uniform_real_distribution<double> span(0.1, 2.0), val(-3.0, 3.0);
        std::vector<double> base(5);
        for (auto& b : base) {
            b = val(rng);
        }
        std::vector<std::size_t> all{0, 1, 2, 3, 4};
        std::shuffle(all.begin(), all.end(), rng);
        std::size_t d = nd(rng);
        std::vector<std::size_t> dims(all.begin(), all.begin() + static_cast<long>(d));
        std::vector<double> spans;
        std::vector<std::size_t> counts;
        for (std::size_t i = 0; i < d; ++i) {
            spans.push_back(span(rng));
            counts.push_back(cnt(rng));
        }
        Region region(0, Tensor({5}, base), dims, spans, counts);
        auto delta = generate_manipulation_set(region);

        // every lattice point
        std::vector<Tensor> lattice;
        std::vector<std::int32_t> c(d);
        for (std::size_t i = 0; i < d; ++i) {
            c[i] = -static_cast<std::int32_t>(counts[i]);
        }
        for (;;) {
            lattice.push_back(region.lattice_point(c));
            std::size_t i = 0;
            for (; i < d; ++i) {
                if (c[i] < static_cast<std::int32_t>(counts[i])) {
                    ++c[i];
                    break;
                }
                c[i] = -static_cast<std::int32_t>(counts[i]);
            }
            if (i == d) {
                break;
            }
        }
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int s = 0; s < 1000; ++s) {
            Tensor y = region.base;
            for (std::size_t i = 0; i < d; ++i) {
                y[dims[i]] = region.lower(i) + (region.upper(i) - region.lower(i)) * unit(rng);
            }
            bool covered = false;
            for (const auto& a : lattice) {
                for (const auto& m : delta) {
                    bool inside = true;
                    for (std::size_t i = 0; i < d && inside; ++i) {
                        double lo = a[dims[i]], hi = a[dims[i]] + m.direction[i] * m.spans[i];
                        if (lo > hi) {
                            std::swap(lo, hi);
                        }
                        inside = y[dims[i]] >= lo - 1e-12 && y[dims[i]] <= hi + 1e-12;
                    }
                    if (inside) {
                        covered = true;
                        break;
                    }
                }
                if (covered) {
                    break;
                }
            }
            ++checked;
            if (!covered) {
                ++violations;
            }
        }
    }
    return {violations == 0, std::to_string(checked) + " samples over 10 regions, " + std::to_string(violations) +
                                 " outside every manipulation rectangle"};
}

/// Residual of one obligation with the best step count in [0, h] chosen per dim.
double oracle_residual(const std::vector<double>& delta, const std::vector<double>& spans, std::size_t h) {
    double sq = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        double best = std::abs(delta[i]);
        for (std::size_t n = 1; n <= h; ++n) {
            best = std::min(best, std::abs(std::abs(delta[i]) - static_cast<double>(n) * spans[i]));
        }
        sq += best * best;
    }
    return std::sqrt(sq);
}

struct OracleResult {
    double corners = 0.0;
    double fresh = 0.0;
};

OracleResult refinement_oracle(const Network& net, const Region& prev, const std::vector<Manipulation>& prev_delta,
                               const Region& region, std::size_t h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    OracleResult out;
    auto worst = [&](const Tensor& y) {
        double w = 0.0;
        auto fy = apply_layer(net, region.layer, y);
        for (const auto& m : prev_delta) {
            Tensor moved = y;
            for (std::size_t i = 0; i < m.dims.size(); ++i) {
                moved[m.dims[i]] += m.direction[i] * m.spans[i];
            }
            auto fd = apply_layer(net, region.layer, moved);
            std::vector<double> delta;
            for (auto p : region.dims) {
                delta.push_back(fd[p] - fy[p]);
            }
            w = std::max(w, oracle_residual(delta, region.spans, h));
        }
        return w;
    };
    const std::size_t d = prev.size();
    for (std::size_t bits = 0; bits < (std::size_t{1} << d); ++bits) {
        Tensor y = prev.base;
        for (std::size_t i = 0; i < d; ++i) {
            y[prev.dims[i]] = (bits >> i) & 1 ? prev.upper(i) : prev.lower(i);
        }
        out.corners = std::max(out.corners, worst(y));
    }
    for (int s = 0; s < 1000; ++s) {
        Tensor y = prev.base;
        for (std::size_t i = 0; i < d; ++i) {
            y[prev.dims[i]] = prev.lower(i) + (prev.upper(i) - prev.lower(i)) * unit(rng);
        }
        out.fresh = std::max(out.fresh, worst(y));
    }
    return out;
}

Check refinement_certificate() {
    const double eps = 0.1;
    std::vector<std::pair<Network, Tensor>> cases;
    cases.emplace_back(load_network(fixture("curve2d.json")), Tensor({2}, {3.59, 1.11}));
    std::mt19937_64 rng(4242);
    for (int i = 0; i < 5; ++i) {
        auto net = random_relu_net(rng, {2, 8, 8, 2}, {-5.0, 5.0});
        auto x = random_input(rng, net);
        cases.emplace_back(std::move(net), std::move(x));
    }
    std::size_t checks = 0;
    double worst_cert = 0.0, worst_corner = 0.0, worst_fresh = 0.0;
    bool pass = true;
    for (auto& [net, x] : cases) {
        SearchConfig config = preset_2d();
        config.epsilon = eps;
        config.span = 0.5;
        auto acts = forward(net, x);
        auto sel = select_dims_start(acts[0], 0, 2);
        Region prev = Region::uniform(0, acts[0], sel.dims, config.span, 1);
        auto delta = feature_manipulations(prev, partition_features(prev, 2, region_saliency(prev)));
        for (std::size_t k = 1; k <= 3; ++k) {
            sel = select_dims_next(net, k, acts[k], sel);
            auto grown = grow_region(net, k, prev, sel, config);
            auto refined = refine_manipulations(net, prev, delta, grown, eps, config);
            const auto& cert = refined.certificate;
            auto oracle = refinement_oracle(net, prev, delta, refined.region, cert.horizon, 777 + k);
            worst_cert = std::max(worst_cert, cert.max_residual);
            worst_corner = std::max(worst_corner, oracle.corners);
            worst_fresh = std::max(worst_fresh, oracle.fresh);
            pass = pass && cert.max_residual <= eps && oracle.corners <= eps && oracle.fresh <= 2 * eps &&
                   cert.stability_residual <= 2 * eps;
            ++checks;
            prev = refined.region;
            delta = feature_manipulations(prev, partition_features(prev, 2, region_saliency(prev)));
        }
    }
    return {pass, std::to_string(checks) + " layer refinements; certificate max " + str(worst_cert) +
                      ", oracle corners " + str(worst_corner) + " <= " + str(eps) + ", fresh-seed " +
                      str(worst_fresh) + " <= " + str(2 * eps)};
}

Check preimage_round_trip() {
    std::mt19937_64 rng(31337);
    std::size_t witnesses = 0, realized = 0, bad_replay = 0, mapped = 0, bad_map = 0;
    auto check = [&](const Network& net, const Tensor& input, std::size_t k, const Tensor& point,
                     const std::vector<std::size_t>& dims, const PreimageChain& chain) {
        ++witnesses;
        auto original = classify(net, input);
        auto r = realize_input(chain, PreimageTarget::on_dims(k, point, dims));
        if (r) {
            ++realized;
            auto replay = forward(net, r.point->values)[k];
            for (auto p : dims) {
                if (std::abs(replay[p] - point[p]) > 1e-6 * std::max(1.0, std::abs(point[p]))) {
                    ++bad_replay;
                    break;
                }
            }
        }
        if (auto img = map_back_to_input(chain, Activation{k, point}, original)) {
            ++mapped;
            if (classify(net, *img) == original) {
                ++bad_map;
            }
        }
    };

    // witnesses reported by the verifier
    auto mini = load_network(fixture("mini_digits.json"));
    auto images = load_images_csv(fixture("mini_test.csv"), mini.input_shape(), mini.input_bounds());
    for (std::size_t i = 0; i < 40 && witnesses < 40; ++i) {
        auto reports = run_algorithm1(mini, images[i], preset_mnist_mini());
        const auto& out = reports.back().outcome;
        if (out.verdict != Verdict::Adversarial || !out.witness || out.layer == 0) {
            continue;
        }
        PreimageChain chain(mini, images[i]);
        for (const auto& r : reports) {
            chain.set_constraint(r.layer, r.region.box());
        }
        check(mini, images[i], out.layer, *out.witness, reports.back().region.dims, chain);
    }
    auto curve = load_network(fixture("curve2d.json"));
    {
        Tensor x({2}, {3.59, 1.11});
        auto reports = run_algorithm1(curve, x, preset_2d());
        const auto& out = reports.back().outcome;
        if (out.witness) {
            PreimageChain chain(curve, x);
            for (const auto& r : reports) {
                chain.set_constraint(r.layer, r.region.box());
            }
            check(curve, x, out.layer, *out.witness, reports.back().region.dims, chain);
        }
    }
    // perturbed hidden activations of both fixtures
    while (witnesses < 100) {
        bool use_mini = witnesses % 2 == 0;
        const auto& net = use_mini ? mini : curve;
        Tensor x = use_mini ? images[witnesses % images.size()] : random_input(rng, curve);
        auto acts = forward(net, x);
        std::uniform_int_distribution<std::size_t> layer(1, net.layer_count() - 1);
        std::size_t k = layer(rng);
        auto sel = select_dims_start(acts[k], k, 2);
        Tensor point = acts[k];
        std::uniform_real_distribution<double> shift(-0.5, 0.5);
        for (auto p : sel.dims) {
            point[p] += shift(rng);
        }
        PreimageChain chain(net, acts);
        check(net, x, k, point, sel.dims, chain);
    }
    bool pass = bad_replay == 0 && bad_map == 0 && realized > 0;
    return {pass, std::to_string(witnesses) + " witnesses, " + std::to_string(realized) + " preimages replayed (" +
                      std::to_string(bad_replay) + " off by > 1e-6), " + std::to_string(mapped) +
                      " mapped to inputs (" + std::to_string(bad_map) + " keep the original class)"};
}

Tensor perturb(const Tensor& x, std::size_t i, double h) {
    Tensor y = x;
    y[i] += h;
    return y;
}

Check gradient_correctness() {
    std::vector<std::pair<std::string, Network>> nets;
    nets.emplace_back("curve2d", load_network(fixture("curve2d.json")));
    nets.emplace_back("mini_digits", load_network(fixture("mini_digits.json")));
    std::mt19937_64 rng(5);
    double worst = 0.0;
    std::size_t probes = 0;
    for (auto& [name, net] : nets) {
        for (int t = 0; t < 10; ++t) {
            auto x = random_input(rng, net);
            auto label = classify(net, x);
            auto g = gradient_input(net, x, label);
            auto jac = jacobian_output_input(net, x);
            const double h = 1e-5 * (net.input_bounds().hi - net.input_bounds().lo);
            double num = 0.0, den = 0.0, jnum = 0.0, jden = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                double fd = (cross_entropy(net, perturb(x, i, h), label) - cross_entropy(net, perturb(x, i, -h), label)) /
                            (2 * h);
                num += (g[i] - fd) * (g[i] - fd);
                den += fd * fd;
                auto up = forward(net, perturb(x, i, h))[net.logits_layer()];
                auto down = forward(net, perturb(x, i, -h))[net.logits_layer()];
                for (std::size_t c = 0; c < net.class_count(); ++c) {
                    double jfd = (up[c] - down[c]) / (2 * h);
                    jnum += (jac(c, i) - jfd) * (jac(c, i) - jfd);
                    jden += jfd * jfd;
                }
            }
            worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-6));
            worst = std::max(worst, std::sqrt(jnum) / std::max(std::sqrt(jden), 1e-6));
            ++probes;
        }
    }
    return {worst < 1e-4, std::to_string(probes) + " probes, worst relative error " + str(worst) + " < 1e-4"};
}

Check fgsm_trend() {
    auto net = load_network(fixture("mini_digits.json"));
    auto images = load_images_csv(fixture("mini_test.csv"), net.input_shape(), net.input_bounds());
    images.resize(std::min<std::size_t>(images.size(), 100));
    std::vector<double> rates;
    for (double eps : {0.1, 0.2, 0.4}) {
        std::size_t ok = 0;
        for (const auto& x : images) {
            ok += fgsm(net, x, eps).success ? 1 : 0;
        }
        rates.push_back(100.0 * static_cast<double>(ok) / static_cast<double>(images.size()));
    }
    bool pass = images.size() == 100 && rates[0] <= rates[1] && rates[1] <= rates[2];
    return {pass, "success % at eps 0.1/0.2/0.4 = " + str(rates[0]) + "/" + str(rates[1]) + "/" + str(rates[2]) +
                      " over " + std::to_string(images.size()) + " images"};
}

/// Brute-force pair choice over every (p, q) with p < q.
std::optional<std::pair<std::size_t, std::size_t>> oracle_pair(const Network& net, const Tensor& original,
                                                               const Tensor& image, std::size_t target,
                                                               std::size_t budget) {
    auto jac = jacobian_output_input(net, image);
    const std::size_t n = image.size();
    std::vector<bool> modified(n);
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        modified[i] = image[i] != original[i];
        used += modified[i] ? 1 : 0;
    }
    double hi = net.input_bounds().hi;
    std::optional<std::pair<std::size_t, std::size_t>> best;
    double best_score = -1.0;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p >= q || image[p] >= hi || image[q] >= hi) {
                continue;
            }
            std::size_t fresh = (modified[p] ? 0 : 1) + (modified[q] ? 0 : 1);
            if (used + fresh > budget) {
                continue;
            }
            double a = jac(target, p) + jac(target, q), b = 0.0;
            for (std::size_t c = 0; c < net.class_count(); ++c) {
                if (c != target) {
                    b += jac(c, p) + jac(c, q);
                }
            }
            if (a > 0 && b < 0 && a * -b > best_score) {
                best_score = a * -b;
                best = std::make_pair(p, q);
            }
        }
    }
    return best;
}

Check jsma_oracle() {
    std::mt19937_64 rng(1616);
    std::size_t compared = 0, agree = 0;
    for (int n = 0; n < 5; ++n) {
        auto net = random_relu_net(rng, {16, 12, 4});
        std::size_t steps_for_net = 0;
        for (int attempt = 0; attempt < 200 && steps_for_net < 20; ++attempt) {
            Tensor x = random_input(rng, net);
            for (auto& v : x.values()) {
                v *= 0.5;
            }
            std::vector<JsmaStep> trace;
            auto r = jsma(net, x, 0.05, 1.0, std::nullopt, &trace);
            for (const auto& step : trace) {
                if (steps_for_net == 20) {
                    break;
                }
                auto pick = oracle_pair(net, x, step.image_before, *r.target, 16);
                ++compared;
                ++steps_for_net;
                if (pick && pick->first == step.p && pick->second == step.q) {
                    ++agree;
                }
            }
        }
    }
    return {compared == 100 && agree == compared,
            std::to_string(agree) + "/" + std::to_string(compared) + " pair selections match brute force"};
}

Check metrics_exactness() {
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    bool pass = true;
    std::string detail;

    // 4 runs, 2 successes at L1 0.02 / 0.04
    std::vector<RunRecord> batch{{0, "m", true, 0.02, 0.1, 1, 0.0, ""},
                                 {1, "m", false, std::nullopt, std::nullopt, 1, 0.0, ""},
                                 {2, "m", true, 0.04, 0.3, 1, 0.0, ""},
                                 {3, "m", false, std::nullopt, std::nullopt, 1, 0.0, ""}};
    auto row = summarize("m", batch);
    pass = pass && row.avg_l1 && near(*row.avg_l1, 0.03) && row.avg_l2 && near(*row.avg_l2, 0.2) &&
           near(row.success_rate, 50.0);

    // a success without reconstruction counts for % but not for distances
    batch.push_back({4, "m", true, std::nullopt, std::nullopt, 1, 0.0, ""});
    row = summarize("m", batch);
    pass = pass && near(*row.avg_l1, 0.03) && near(row.success_rate, 60.0) && row.excluded == 1;

    // all failures
    std::vector<RunRecord> none{{0, "z", false, std::nullopt, std::nullopt, 0, 0.0, ""}};
    row = summarize("z", none);
    pass = pass && !row.avg_l1 && near(row.success_rate, 0.0) &&
           rows_text({row}).find("n/a") != std::string::npos;

    // random batch against a hand-rolled fold, and permutation invariance
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RunRecord> big;
    double s1 = 0.0, s2 = 0.0;
    std::size_t succ = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        bool ok = u(rng) < 0.4;
        RunRecord r{i, "r", ok, std::nullopt, std::nullopt, 1, 0.0, ""};
        if (ok) {
            r.l1 = u(rng);
            r.l2 = u(rng);
            s1 += *r.l1;
            s2 += *r.l2;
            ++succ;
        }
        big.push_back(r);
    }
    row = summarize("r", big);
    std::shuffle(big.begin(), big.end(), rng);
    auto shuffled = summarize("r", big);
    pass = pass && near(*row.avg_l1, s1 / static_cast<double>(succ)) &&
           near(*row.avg_l2, s2 / static_cast<double>(succ)) && near(row.success_rate, 100.0 * succ / 200.0) &&
           near(shuffled.success_rate, row.success_rate);

    // end to end: FGSM rows recomputed from independent attack runs
    auto net = load_network(fixture("mini_digits.json"));
    auto images = load_images_csv(fixture("mini_test.csv"), net.input_shape(), net.input_bounds());
    images.resize(20);
    MethodSpec spec;
    spec.kind = MethodSpec::Kind::Fgsm;
    spec.epsilon = 0.2;
    auto rep = robustness_report(net, images, {spec});
    double e1 = 0.0, e2 = 0.0;
    std::size_t es = 0;
    for (const auto& x : images) {
        auto r = fgsm(net, x, 0.2);
        if (!r.success) {
            continue;
        }
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = r.perturbed[i] - x[i];
            a += std::abs(d);
            b += d * d;
        }
        e1 += a / static_cast<double>(x.size());
        e2 += std::sqrt(b / static_cast<double>(x.size()));
        ++es;
    }
    const auto& fr = rep.rows.front();
    bool e2e = es > 0 && fr.avg_l1 && near(*fr.avg_l1, e1 / static_cast<double>(es)) &&
               near(*fr.avg_l2, e2 / static_cast<double>(es)) && near(fr.success_rate, 100.0 * es / 20.0);
    pass = pass && e2e;
    detail = "hand batches (50%, 60% with 1 excluded, all-fail n/a, 200 random) and FGSM report " +
             std::string(e2e ? "match" : "differ") + " to 1e-12";
    return {pass, detail};
}

std::string manifest_without_timings(const std::filesystem::path& dir) {
    auto doc = nlohmann::ordered_json::parse(read_file(dir / "manifest.json"));
    doc.erase("timings");
    return doc.dump(2);
}

Check determinism() {
    auto dir = std::filesystem::temp_directory_path() / "dlv_acceptance_det";
    std::vector<std::vector<std::string>> runs{
        {"verify", "--model", fixture("curve2d.json").string(), "--image", fixture("point2d.csv").string(), "--preset",
         "2d", "--mode", "mcts", "--seed", "7", "--out-dir", dir.string()},
        {"verify", "--model", fixture("mini_digits.json").string(), "--image", fixture("mini_test.csv").string(),
         "--index", "3", "--preset", "mnist-mini", "--mode", "mcts", "--seed", "7", "--out-dir", dir.string()}};
    std::size_t identical = 0;
    for (const auto& argv : runs) {
        std::filesystem::remove_all(dir);
        int c1 = quiet_cli(argv);
        auto first = manifest_without_timings(dir);
        std::filesystem::remove_all(dir);
        int c2 = quiet_cli(argv);
        auto second = manifest_without_timings(dir);
        if (c1 == c2 && c1 != kExitUsage && first == second) {
            ++identical;
        }
    }
    return {identical == runs.size(), std::to_string(identical) + "/" + std::to_string(runs.size()) +
                                          " repeated mcts runs (seed 7) give byte-identical manifests"};
}

} // namespace

int main() {
    report("2d-experiment-reproduction", two_d_reproduction);
    report("oracle-equivalence", oracle_equivalence);
    report("covering-property", covering_property);
    report("refinement-certificate", refinement_certificate);
    report("preimage-round-trip", preimage_round_trip);
    report("gradient-correctness", gradient_correctness);
    report("fgsm-trend", fgsm_trend);
    report("jsma-oracle", jsma_oracle);
    report("metrics-exactness", metrics_exactness);
    report("determinism", determinism);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
