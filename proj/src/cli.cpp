// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlv/attacks.hpp"
#include "dlv/errors.hpp"
#include "dlv/evalkit.hpp"
#include "dlv/io.hpp"
#include "dlv/refinement.hpp"
#include "dlv/verifier.hpp"

namespace dlv {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Raised for bad inputs discovered after argument parsing.
class UsageError : public Error {
  public:
    using Error::Error;
};

struct Common {
    std::string model;
    std::string image;
    std::size_t index = 0;
    std::string out_dir = "dlv-out";
};

struct SearchFlags {
    std::string preset;
    std::string mode = "single";
    SearchConfig config;
    CLI::Option* start_layer = nullptr;
    CLI::Option* dims = nullptr;
    CLI::Option* span = nullptr;
    CLI::Option* span_count = nullptr;
    CLI::Option* epsilon = nullptr;
    CLI::Option* feature_dims = nullptr;
    CLI::Option* iterations = nullptr;
};

void add_model_image(CLI::App* cmd, Common& c) {
    cmd->add_option("--model", c.model, "Weight file (dlv-weights-1)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--image", c.image, "CSV image set, one image per row")->required()->check(CLI::ExistingFile);
    cmd->add_option("--index", c.index, "Row of the image to use")->capture_default_str();
}

void add_search_flags(CLI::App* cmd, SearchFlags& f) {
    auto& c = f.config;
    cmd->add_option("--preset", f.preset, "Named parameter set; explicit flags override it")
        ->check(CLI::IsMember({"2d", "mnist-mini"}));
    f.start_layer = cmd->add_option("--start-layer", c.start_layer, "Layer l where the search starts")
                        ->capture_default_str();
    f.dims = cmd->add_option("--dims", c.dims, "Dimensions per region (dims_l)")->capture_default_str();
    f.span = cmd->add_option("--span", c.span, "Span s_p of every starting dimension")->capture_default_str();
    f.span_count = cmd->add_option("--spans-count", c.span_count, "Span count m_p of every starting dimension")
                       ->capture_default_str();
    f.epsilon = cmd->add_option("--epsilon", c.epsilon, "Refinement precision")->capture_default_str();
    f.feature_dims = cmd->add_option("--feature-dims", c.feature_dims, "Dimensions per feature")->capture_default_str();
    f.iterations = cmd->add_option("--mcts-iterations", c.mcts_iterations, "Tree-search iterations")
                       ->capture_default_str();
    cmd->add_option("--mode", f.mode, "Search mode")->check(CLI::IsMember({"single", "mcts"}))->capture_default_str();
    cmd->add_option("--seed", c.seed, "Seed for sampling and tree search")->envname("DLV_SEED")->capture_default_str();
}

/// Preset first, then every flag the user actually passed.
SearchConfig resolve(const SearchFlags& f) {
    SearchConfig c = f.preset == "2d" ? preset_2d() : f.preset == "mnist-mini" ? preset_mnist_mini() : SearchConfig{};
    const auto& given = f.config;
    auto set = [](CLI::Option* opt, auto& dst, const auto& src) {
        if (opt->count() > 0) {
            dst = src;
        }
    };
    set(f.start_layer, c.start_layer, given.start_layer);
    set(f.dims, c.dims, given.dims);
    set(f.span, c.span, given.span);
    set(f.span_count, c.span_count, given.span_count);
    set(f.epsilon, c.epsilon, given.epsilon);
    set(f.feature_dims, c.feature_dims, given.feature_dims);
    set(f.iterations, c.mcts_iterations, given.mcts_iterations);
    c.mode = f.mode == "mcts" ? SearchMode::MultiPath : SearchMode::SinglePath;
    c.seed = given.seed;
    return c;
}

Json config_json(const SearchConfig& c) {
    Json j;
    j["start_layer"] = c.start_layer;
    j["dims"] = c.dims;
    j["span"] = c.span;
    j["spans_count"] = c.span_count;
    j["epsilon"] = c.epsilon;
    j["feature_dims"] = c.feature_dims;
    j["mode"] = std::string(to_string(c.mode));
    j["seed"] = c.seed;
    j["mcts_iterations"] = c.mcts_iterations;
    j["mcts_rollout_depth"] = c.mcts_rollout_depth;
    j["coverage_samples"] = c.coverage_samples;
    j["growth_cap"] = c.growth_cap;
    j["horizon_cap"] = c.horizon_cap;
    j["halving_cap"] = c.halving_cap;
    j["direction_cap"] = c.direction_cap;
    return j;
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

struct Loaded {
    Network net;
    Tensor image;
};

Loaded load_inputs(const Common& c) {
    auto net = load_network(c.model);
    auto images = load_images_csv(c.image, net.input_shape(), net.input_bounds());
    if (c.index >= images.size()) {
        throw UsageError("--index " + std::to_string(c.index) + " but " + c.image + " holds " +
                         std::to_string(images.size()) + " images");
    }
    return {std::move(net), images[c.index]};
}

class Manifest {
  public:
    Manifest(std::string command, std::vector<std::string> args, fs::path dir)
        : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(command);
        doc_["args"] = std::move(args);
        doc_["inputs"] = Json::object();
        doc_["outputs"] = Json::array();
    }
    void config(const Json& c, std::uint64_t seed) {
        doc_["config"] = c;
        doc_["seed"] = seed;
    }
    void input(const std::string& role, const std::string& path) {
        doc_["inputs"][role] = Json{{"path", path}, {"sha256", sha256_file(path)}};
    }
    void output(const std::string& name, std::string_view contents) {
        write_file(dir_ / name, contents);
        doc_["outputs"].push_back(Json{{"name", name}, {"sha256", sha256_hex(contents)}});
    }
    void write() {
        auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        doc_["timings"] = Json{{"total_seconds", seconds}};
        write_file(dir_ / "manifest.json", doc_.dump(2) + "\n");
    }

  private:
    fs::path dir_;
    Json doc_;
    std::chrono::steady_clock::time_point start_;
};

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw UsageError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

Json certificate_json(const RefinementCertificate& c) {
    return Json{{"horizon", c.horizon},
                {"samples", c.samples},
                {"obligations", c.obligations},
                {"max_residual", c.max_residual},
                {"stability_residual", c.stability_residual},
                {"epsilon", c.epsilon},
                {"norm", c.norm},
                {"halvings", c.halvings},
                {"seed", c.seed}};
}

int run_verify(const Common& common, const SearchFlags& flags, const std::vector<std::string>& args) {
    auto [net, image] = load_inputs(common);
    auto config = resolve(flags);
    fs::path dir = common.out_dir;
    prepare_dir(dir);
    Manifest manifest("verify", args, dir);
    manifest.config(config_json(config), config.seed);
    manifest.input("model", common.model);
    manifest.input("image", common.image);

    Json outcome;
    outcome["original_class"] = classify(net, image);
    outcome["image_index"] = common.index;
    outcome["seed"] = config.seed;
    outcome["config"] = config_json(config);
    int code = kExitInconclusive;
    std::vector<LayerReport> reports;
    try {
        reports = run_algorithm1(net, image, config);
    } catch (const PhaseError& e) {
        outcome["verdict"] = std::string(to_string(Verdict::Inconclusive));
        outcome["layer"] = e.layer();
        outcome["error"] = Json{{"phase", e.phase()}, {"message", e.what()}};
        std::cout << "inconclusive: " << e.what() << "\n";
        manifest.output("outcome.json", outcome.dump(2) + "\n");
        manifest.write();
        return kExitInconclusive;
    }
    Json layers = Json::array();
    for (const auto& r : reports) {
        Json l;
        l["layer"] = r.layer;
        l["verdict"] = std::string(to_string(r.outcome.verdict));
        l["dims"] = r.region.dims;
        l["spans"] = r.region.spans;
        l["spans_count"] = r.region.counts;
        l["manipulations"] = r.manipulation_count;
        l["explored"] = r.outcome.explored;
        l["unrealizable"] = r.outcome.unrealizable;
        l["certificate"] = r.certificate ? certificate_json(*r.certificate) : Json(nullptr);
        l["note"] = r.outcome.note;
        layers.push_back(std::move(l));
        std::cout << "layer " << r.layer << ": " << to_string(r.outcome.verdict) << " (" << r.outcome.explored
                  << " points explored)\n";
    }
    const auto& last = reports.back().outcome;
    outcome["verdict"] = std::string(to_string(last.verdict));
    outcome["layer"] = last.layer;
    outcome["layers"] = std::move(layers);
    outcome["new_class"] = last.new_class ? Json(*last.new_class) : Json(nullptr);
    outcome["l1"] = opt_json(last.l1);
    outcome["l2"] = opt_json(last.l2);
    outcome["witness_coords"] = last.witness_coords;
    outcome["input_reconstructed"] = last.witness_input.has_value();
    manifest.output("outcome.json", outcome.dump(2) + "\n");

    switch (last.verdict) {
    case Verdict::Safe: code = kExitSafe; break;
    case Verdict::Adversarial: code = kExitAdversarial; break;
    case Verdict::Inconclusive: code = kExitInconclusive; break;
    }
    if (last.verdict == Verdict::Adversarial) {
        manifest.output("original.csv", dump_images_csv({image}));
        manifest.output("original.pgm", encode_pgm(image, net.input_bounds()));
        if (last.witness_input) {
            manifest.output("witness.csv", dump_images_csv({*last.witness_input}));
            manifest.output("witness.pgm", encode_pgm(*last.witness_input, net.input_bounds()));
            std::cout << "witness class " << classify(net, *last.witness_input) << " (original "
                      << last.original_class << "), L1 " << *last.l1 << ", L2 " << *last.l2 << "\n";
        } else {
            std::cout << "witness found at layer " << last.layer << " without an input-layer reconstruction\n";
        }
    }
    manifest.write();
    return code;
}

struct AttackFlags {
    double epsilon = 0.1;
    double theta = 1.0;
    double fraction = 0.1;
    std::optional<std::size_t> target;
};

int run_attack(const std::string& which, const Common& common, const AttackFlags& f,
               const std::vector<std::string>& args) {
    auto [net, image] = load_inputs(common);
    fs::path dir = common.out_dir;
    prepare_dir(dir);
    Manifest manifest("attack " + which, args, dir);
    Json params = which == "fgsm" ? Json{{"epsilon", f.epsilon}}
                                  : Json{{"theta", f.theta},
                                         {"fraction", f.fraction},
                                         {"target", f.target ? Json(*f.target) : Json(nullptr)}};
    manifest.config(params, 0);
    manifest.input("model", common.model);
    manifest.input("image", common.image);
    auto r = which == "fgsm" ? fgsm(net, image, f.epsilon) : jsma(net, image, f.theta, f.fraction, f.target);
    Json out{{"method", which},
             {"params", params},
             {"success", r.success},
             {"original_class", r.original_class},
             {"new_class", r.new_class},
             {"l1", r.l1},
             {"l2", r.l2},
             {"steps", r.steps},
             {"pixels_changed", r.pixels_changed}};
    manifest.output("result.json", out.dump(2) + "\n");
    manifest.output("perturbed.csv", dump_images_csv({r.perturbed}));
    manifest.output("perturbed.pgm", encode_pgm(r.perturbed, net.input_bounds()));
    manifest.output("original.csv", dump_images_csv({image}));
    manifest.output("original.pgm", encode_pgm(image, net.input_bounds()));
    manifest.write();
    std::cout << which << ": " << (r.success ? "success" : "no class change") << ", class " << r.original_class
              << " -> " << r.new_class << ", L1 " << r.l1 << ", L2 " << r.l2 << "\n";
    return r.success ? kExitSafe : kExitInconclusive;
}

struct CompareFlags {
    std::string model;
    std::string images;
    std::size_t count = 10;
    std::vector<std::string> methods{"fgsm", "jsma", "dlv"};
    std::vector<double> fgsm_eps{0.1};
    std::vector<double> jsma_theta{1.0};
    double jsma_fraction = 0.1;
    std::string out_dir = "dlv-out";
};

int run_compare(const CompareFlags& f, const SearchFlags& search, const std::vector<std::string>& args) {
    auto net = load_network(f.model);
    auto images = load_images_csv(f.images, net.input_shape(), net.input_bounds());
    if (images.empty()) {
        throw UsageError(f.images + " holds no images");
    }
    images.resize(std::min(images.size(), f.count));
    auto config = resolve(search);
    std::vector<MethodSpec> methods;
    for (const auto& m : f.methods) {
        if (m == "fgsm") {
            for (double e : f.fgsm_eps) {
                MethodSpec s;
                s.kind = MethodSpec::Kind::Fgsm;
                s.epsilon = e;
                methods.push_back(s);
            }
        } else if (m == "jsma") {
            for (double t : f.jsma_theta) {
                MethodSpec s;
                s.kind = MethodSpec::Kind::Jsma;
                s.theta = t;
                s.fraction = f.jsma_fraction;
                methods.push_back(s);
            }
        } else if (m == "dlv") {
            MethodSpec s;
            s.kind = MethodSpec::Kind::Dlv;
            s.search = config;
            methods.push_back(s);
        } else {
            throw UsageError("unknown method " + m);
        }
    }
    fs::path dir = f.out_dir;
    prepare_dir(dir);
    Manifest manifest("compare", args, dir);
    manifest.config(config_json(config), config.seed);
    manifest.input("model", f.model);
    manifest.input("images", f.images);
    auto report = robustness_report(net, images, methods);
    manifest.output("records.csv", records_csv(report.records));
    manifest.output("summary.json", rows_json(report.rows));
    auto text = rows_text(report.rows);
    manifest.output("summary.txt", text);
    manifest.write();
    std::cout << text;
    return kExitSafe;
}

struct ExportFlags {
    std::size_t layer = 1;
    std::string formula = "coverage";
    std::string out;
};

int run_export(const Common& common, const SearchFlags& search, const ExportFlags& f) {
    auto [net, image] = load_inputs(common);
    auto config = resolve(search);
    const std::size_t k = f.layer;
    if (k == 0 || k > net.layer_count()) {
        throw UsageError("--layer must lie in [1, " + std::to_string(net.layer_count()) + "]");
    }
    auto acts = forward(net, image);
    auto prev_sel = select_dims_start(acts[k - 1], k - 1, std::min(config.dims, net.width(k - 1)));
    auto prev = Region::uniform(k - 1, acts[k - 1], prev_sel.dims, config.span, config.span_count);
    auto partition = partition_features(prev, config.feature_dims, region_saliency(prev));
    auto prev_delta = feature_manipulations(prev, partition, config.dimension_cap);
    auto sel = select_dims_next(net, k, acts[k], prev_sel);
    auto region = grow_region(net, k, prev, sel, config);
    SmtOptions options;
    options.epsilon = config.epsilon;
    options.seed = config.seed;
    SmtFormula which = SmtFormula::RegionCoverage;
    if (f.formula == "refinement") {
        auto refined = refine_manipulations(net, prev, prev_delta, region, config.epsilon, config);
        region = refined.region;
        options.horizon = refined.certificate.horizon;
        which = SmtFormula::Refinement;
    }
    auto text = export_constraints(net, k, prev, region, prev_delta, which, options);
    if (f.out.empty()) {
        std::cout << text;
    } else {
        write_file(f.out, text);
    }
    return kExitSafe;
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Layer-by-layer safety verification of feed-forward classifiers"};
    app.require_subcommand(1);
    std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);

    Common common;
    SearchFlags search;
    auto* verify = app.add_subcommand("verify", "Search for adversarial manipulations layer by layer");
    add_model_image(verify, common);
    add_search_flags(verify, search);
    verify->add_option("--out-dir", common.out_dir, "Directory for outcome, manifest and witness files")
        ->capture_default_str();

    auto* attack = app.add_subcommand("attack", "Run a baseline attack");
    attack->require_subcommand(1);
    AttackFlags attack_flags;
    std::string attack_kind;
    for (const char* name : {"fgsm", "jsma"}) {
        auto* sub = attack->add_subcommand(name, std::string(name) + " attack");
        add_model_image(sub, common);
        sub->add_option("--out-dir", common.out_dir, "Output directory")->capture_default_str();
        if (std::string(name) == "fgsm") {
            sub->add_option("--epsilon", attack_flags.epsilon, "Perturbation size")->capture_default_str();
        } else {
            sub->add_option("--theta", attack_flags.theta, "Per-step pixel increase")->capture_default_str();
            sub->add_option("--fraction", attack_flags.fraction, "Largest fraction of pixels to change")
                ->capture_default_str();
            sub->add_option("--target", attack_flags.target, "Target class (default: runner-up)");
        }
        sub->callback([&attack_kind, name] { attack_kind = name; });
    }

    CompareFlags compare_flags;
    auto* compare = app.add_subcommand("compare", "Compare FGSM, JSMA and the verifier over an image set");
    compare->add_option("--model", compare_flags.model, "Weight file")->required()->check(CLI::ExistingFile);
    compare->add_option("--images", compare_flags.images, "CSV image set")->required()->check(CLI::ExistingFile);
    compare->add_option("--count", compare_flags.count, "Images to use from the start of the set")
        ->capture_default_str();
    compare->add_option("--methods", compare_flags.methods, "Subset of fgsm, jsma, dlv")->delimiter(',')
        ->capture_default_str();
    compare->add_option("--fgsm-eps", compare_flags.fgsm_eps, "FGSM perturbation sizes")->delimiter(',')
        ->capture_default_str();
    compare->add_option("--jsma-theta", compare_flags.jsma_theta, "JSMA per-step increases")->delimiter(',')
        ->capture_default_str();
    compare->add_option("--jsma-fraction", compare_flags.jsma_fraction, "JSMA pixel budget fraction")
        ->capture_default_str();
    compare->add_option("--out-dir", compare_flags.out_dir, "Output directory")->capture_default_str();
    SearchFlags compare_search;
    add_search_flags(compare, compare_search);

    auto* exporter = app.add_subcommand("export-smt", "Write the coverage or refinement condition as SMT-LIB 2");
    Common export_common;
    SearchFlags export_search;
    ExportFlags export_flags;
    add_model_image(exporter, export_common);
    add_search_flags(exporter, export_search);
    exporter->add_option("--layer", export_flags.layer, "Layer k; the condition relates layers k-1 and k")
        ->capture_default_str();
    exporter->add_option("--formula", export_flags.formula, "Which condition")
        ->check(CLI::IsMember({"coverage", "refinement"}))
        ->capture_default_str();
    exporter->add_option("--out", export_flags.out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << "\n" << app.help("", CLI::AppFormatMode::All);
        return kExitUsage;
    }

    try {
        if (verify->parsed()) {
            return run_verify(common, search, args);
        }
        if (attack->parsed()) {
            return run_attack(attack_kind, common, attack_flags, args);
        }
        if (compare->parsed()) {
            return run_compare(compare_flags, compare_search, args);
        }
        return run_export(export_common, export_search, export_flags);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInconclusive;
    }
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("dlv");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) {
        argv.push_back(s.data());
    }
    argv.push_back(nullptr);
    return cli_main(static_cast<int>(storage.size()), argv.data());
}

} // namespace dlv
