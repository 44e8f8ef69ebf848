#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "caada/checkpoint.hpp"
#include "caada/data.hpp"
#include "caada/errors.hpp"
#include "caada/rng.hpp"
#include "caada/text_io.hpp"
#include "caada/trainer.hpp"
#include "caada/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitVerification = 4;

fs::path resolve_out_dir(const std::string& out_flag, const std::string& command) {
    if (!out_flag.empty()) return fs::path(out_flag);
    const char* root = std::getenv("CAADA_OUTPUT_ROOT");
    return fs::path(root != nullptr ? root : "caada-out") / command;
}

void write_manifest(const fs::path& dir, json manifest) {
    manifest["format_version"] = 1;
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw caada::DataError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
}

// Splits "a,b;c,d" into {{a,b},{c,d}}.
std::vector<std::vector<double>> parse_vector_list(const std::string& text,
                                                   const std::string& flag) {
    std::vector<std::vector<double>> out;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::vector<double> values;
        std::stringstream items(group);
        std::string item;
        while (std::getline(items, item, ',')) {
            double v = 0.0;
            if (!caada::parse_double(item, v)) {
                throw caada::ConfigError(flag + ": bad number '" + item + "'");
            }
            values.push_back(v);
        }
        out.push_back(std::move(values));
    }
    return out;
}

struct ConfigFlags {
    caada::TrainConfig config;
    std::string mode = "da";

    // Flags mirror the TrainConfig fields one to one.
    void attach(CLI::App& cmd, bool with_mode) {
        cmd.add_option("--gamma", config.gamma, "Adversarial loss weight");
        cmd.add_option("--sigma", config.sigma, "Correlation alignment loss weight");
        cmd.add_option("--learning-rate", config.learning_rate, "SGD learning rate");
        cmd.add_option("--momentum", config.momentum, "SGD momentum");
        cmd.add_option("--weight-decay", config.weight_decay, "L2 weight decay");
        cmd.add_option("--batch-size", config.batch_size, "Mini-batch size");
        cmd.add_option("--epochs", config.epochs, "Training epochs");
        cmd.add_option("--bottleneck-dim", config.bottleneck_dim,
                       "Bottleneck (embedding) dimension");
        cmd.add_option("--extractor-hidden-dims", config.extractor_hidden_dims,
                       "Hidden widths of the feature extractors")
            ->delimiter(',');
        cmd.add_option("--discriminator-hidden-dim", config.discriminator_hidden_dim,
                       "Hidden width of the domain discriminator");
        cmd.add_option("--seed", config.seed, "Experiment seed");
        cmd.add_option("--target-fraction", config.target_fraction,
                       "Stratified share of target data used for adaptation");
        cmd.add_flag("--grl-ramp", config.grl_ramp,
                     "Ramp the reversal strength linearly from 0 to gamma");
        cmd.add_flag("--per-step-metrics", config.per_step_metrics,
                     "Record metrics per optimizer step instead of per epoch");
        if (with_mode) {
            cmd.add_option("--mode", mode, "Training regime")
                ->check(CLI::IsMember({"da", "dg"}));
        }
    }

    caada::TrainConfig resolve() const {
        caada::TrainConfig c = config;
        c.mode = mode == "dg" ? caada::Mode::Dg : caada::Mode::Da;
        c.validate();
        return c;
    }

    json to_json() const {
        json j;
        j["gamma"] = config.gamma;
        j["sigma"] = config.sigma;
        j["learning_rate"] = config.learning_rate;
        j["momentum"] = config.momentum;
        j["weight_decay"] = config.weight_decay;
        j["batch_size"] = config.batch_size;
        j["epochs"] = config.epochs;
        j["bottleneck_dim"] = config.bottleneck_dim;
        j["extractor_hidden_dims"] = config.extractor_hidden_dims;
        j["discriminator_hidden_dim"] = config.discriminator_hidden_dim;
        j["seed"] = config.seed;
        j["mode"] = mode;
        j["target_fraction"] = config.target_fraction;
        j["grl_ramp"] = config.grl_ramp;
        j["per_step_metrics"] = config.per_step_metrics;
        return j;
    }
};

struct GenFlags {
    std::size_t classes = 2;
    std::size_t per_class = 100;
    std::size_t dim = 2;
    double class_sep = 4.0;
    std::vector<double> noise;
    std::string centers;
    std::vector<double> domains;  // rotation degrees, one per domain
    std::string translate;        // "dx,dy;dx,dy" per domain
    std::string scales;           // "1;1.2" per domain
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_gen(const GenFlags& flags) {
    caada::MixtureSpec spec;
    spec.num_classes = flags.classes;
    spec.samples_per_class = flags.per_class;
    spec.dim = flags.dim;
    spec.class_spacing = flags.class_sep;
    spec.class_stddev = flags.noise;
    if (!flags.centers.empty()) {
        spec.class_centers = parse_vector_list(flags.centers, "--centers");
    }

    std::vector<std::vector<double>> translations;
    if (!flags.translate.empty()) {
        translations = parse_vector_list(flags.translate, "--translate");
        if (translations.size() != flags.domains.size()) {
            throw caada::ConfigError("--translate: need one vector per domain");
        }
    }
    std::vector<std::vector<double>> scale_list;
    if (!flags.scales.empty()) {
        scale_list = parse_vector_list(flags.scales, "--scale");
        if (scale_list.size() != flags.domains.size()) {
            throw caada::ConfigError("--scale: need one value per domain");
        }
    }
    for (std::size_t j = 0; j < flags.domains.size(); ++j) {
        caada::DomainShift shift;
        shift.rotation_deg = flags.domains[j];
        if (!translations.empty()) shift.translation = translations[j];
        if (!scale_list.empty()) {
            if (scale_list[j].size() != 1) {
                throw caada::ConfigError("--scale: one scalar per domain");
            }
            shift.scale = scale_list[j][0];
        }
        spec.domains.push_back(std::move(shift));
    }

    const auto datasets = caada::gen_gaussian_domains(spec, flags.seed);

    const fs::path dir = resolve_out_dir(flags.out, "gen");
    fs::create_directories(dir);
    json manifest;
    manifest["command"] = "gen";
    manifest["seed"] = flags.seed;
    manifest["classes"] = flags.classes;
    manifest["per_class"] = flags.per_class;
    manifest["dim"] = flags.dim;
    manifest["rotations_deg"] = flags.domains;
    json artifacts = json::array();
    for (const auto& dataset : datasets) {
        const fs::path file = dir / (dataset.name() + ".csv");
        caada::save_csv(dataset, file);
        artifacts.push_back(file.filename().string());
        std::cout << "wrote " << file.string() << " (" << dataset.size()
                  << " rows)\n";
    }
    manifest["artifacts"] = artifacts;
    write_manifest(dir, std::move(manifest));
    return kExitOk;
}

struct TrainFlags {
    ConfigFlags config;
    std::string source;
    std::string target;
    std::vector<std::string> sources;
    std::string out;
};

int cmd_train(const TrainFlags& flags) {
    const caada::TrainConfig config = flags.config.resolve();
    const fs::path dir = resolve_out_dir(flags.out, "train");
    fs::create_directories(dir);

    json manifest;
    manifest["command"] = "train";
    manifest["config"] = flags.config.to_json();
    manifest["artifacts"] = {"metrics.csv", "model.ckpt", "summary.txt"};

    std::vector<caada::MetricsRecord> history;
    const auto sink = [&history](const caada::MetricsRecord& r) {
        history.push_back(r);
    };

    auto finish = [&](caada::CaadaModel& model) {
        caada::write_metrics_csv(dir / "metrics.csv", history);
        caada::save_checkpoint(model, dir / "model.ckpt");
        const double final_acc = history.empty() ? 0.0 : history.back().target_accuracy;
        {
            std::ofstream summary(dir / "summary.txt", std::ios::binary);
            summary << "final_target_accuracy " << caada::format_double(final_acc)
                    << "\n";
        }
        write_manifest(dir, manifest);
        std::cout << "final_target_accuracy " << caada::format_double(final_acc)
                  << "\n";
        return kExitOk;
    };

    try {
        if (config.mode == caada::Mode::Da) {
            if (flags.source.empty() || flags.target.empty()) {
                throw caada::ConfigError("train --mode da needs --source and --target");
            }
            manifest["inputs"] = {flags.source, flags.target};
            const caada::DomainDataset source = caada::load_csv(flags.source);
            caada::DomainDataset target = caada::load_csv(flags.target);
            if (config.target_fraction < 1.0) {
                target = caada::subsample_target(
                    target, config.target_fraction,
                    caada::derive_seed(config.seed, "target_subsample"));
            }
            auto result = caada::train_da(config, source, target, sink);
            return finish(result.model);
        }
        if (flags.sources.size() < 2) {
            throw caada::ConfigError("train --mode dg needs at least 2 --sources");
        }
        manifest["inputs"] = flags.sources;
        std::vector<caada::DomainDataset> sources;
        sources.reserve(flags.sources.size());
        for (const auto& path : flags.sources) sources.push_back(caada::load_csv(path));
        auto result = caada::train_dg(config, sources, sink);
        return finish(result.model);
    } catch (const caada::DivergenceError& e) {
        // Keep whatever metrics exist so the failure can be inspected.
        caada::write_metrics_csv(dir / "metrics.csv", history);
        manifest["artifacts"] = {"metrics.csv"};
        manifest["divergence"] = e.what();
        write_manifest(dir, manifest);
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    }
}

struct StudyFlags {  // shared by ablate and sweep
    ConfigFlags config;
    std::string source;
    std::string target;
    std::vector<std::string> sources;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
    std::string out;
};

std::vector<caada::DomainDataset> load_study_sources(const StudyFlags& flags,
                                                     const caada::TrainConfig& config) {
    std::vector<caada::DomainDataset> sources;
    if (config.mode == caada::Mode::Da) {
        if (flags.source.empty()) {
            throw caada::ConfigError("--mode da needs --source");
        }
        sources.push_back(caada::load_csv(flags.source));
    } else {
        if (flags.sources.size() < 2) {
            throw caada::ConfigError("--mode dg needs at least 2 --sources");
        }
        for (const auto& path : flags.sources) sources.push_back(caada::load_csv(path));
    }
    return sources;
}

void write_study_csv(const fs::path& file,
                     const std::vector<std::pair<std::string, std::pair<double, double>>>& rows) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw caada::DataError("cannot write " + file.string());
    out << "mode_or_value,mean_acc,std_acc\n";
    for (const auto& [key, stats] : rows) {
        out << key << "," << caada::format_double(stats.first) << ","
            << caada::format_double(stats.second) << "\n";
    }
}

int cmd_ablate(const StudyFlags& flags) {
    const caada::TrainConfig config = flags.config.resolve();
    if (flags.target.empty()) throw caada::ConfigError("ablate needs --target");
    const auto sources = load_study_sources(flags, config);
    const caada::DomainDataset target = caada::load_csv(flags.target);

    const auto rows =
        caada::run_ablation(config, sources, target, flags.seeds, flags.jobs);

    const fs::path dir = resolve_out_dir(flags.out, "ablate");
    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::pair<double, double>>> out_rows;
    for (const auto& row : rows) {
        out_rows.emplace_back(row.mode,
                              std::make_pair(row.mean_accuracy, row.std_accuracy));
        std::cout << row.mode << " mean=" << caada::format_double(row.mean_accuracy)
                  << " std=" << caada::format_double(row.std_accuracy) << "\n";
    }
    write_study_csv(dir / "ablation.csv", out_rows);

    json manifest;
    manifest["command"] = "ablate";
    manifest["config"] = flags.config.to_json();
    manifest["seeds"] = flags.seeds;
    manifest["inputs"] = {flags.source.empty() ? json(flags.sources) : json(flags.source),
                          json(flags.target)};
    manifest["artifacts"] = {"ablation.csv"};
    write_manifest(dir, std::move(manifest));
    return kExitOk;
}

struct SweepFlags {
    StudyFlags study;
    std::string param;
    std::vector<double> values;
};

int cmd_sweep(const SweepFlags& flags) {
    const caada::TrainConfig config = flags.study.config.resolve();
    if (flags.study.target.empty()) throw caada::ConfigError("sweep needs --target");
    const auto sources = load_study_sources(flags.study, config);
    const caada::DomainDataset target = caada::load_csv(flags.study.target);

    const caada::SweepParam param = flags.param == "bottleneck_dim"
                                        ? caada::SweepParam::BottleneckDim
                                        : caada::SweepParam::TargetFraction;
    const auto rows = caada::run_sweep(config, param, flags.values, sources, target,
                                       flags.study.seeds, flags.study.jobs);

    const fs::path dir = resolve_out_dir(flags.study.out, "sweep");
    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::pair<double, double>>> out_rows;
    for (const auto& row : rows) {
        out_rows.emplace_back(caada::format_double(row.value),
                              std::make_pair(row.mean_accuracy, row.std_accuracy));
        std::cout << flags.param << "=" << caada::format_double(row.value)
                  << " mean=" << caada::format_double(row.mean_accuracy)
                  << " std=" << caada::format_double(row.std_accuracy) << "\n";
    }
    write_study_csv(dir / "sweep.csv", out_rows);

    json manifest;
    manifest["command"] = "sweep";
    manifest["config"] = flags.study.config.to_json();
    manifest["param"] = flags.param;
    manifest["values"] = flags.values;
    manifest["seeds"] = flags.study.seeds;
    manifest["artifacts"] = {"sweep.csv"};
    write_manifest(dir, std::move(manifest));
    return kExitOk;
}

struct ExportFlags {
    std::string checkpoint;
    std::string data;
    std::string layer = "fcb";
    std::string stream = "auto";
    std::string out;
};

int cmd_export_embeddings(const ExportFlags& flags) {
    caada::CaadaModel model = caada::load_checkpoint(flags.checkpoint);
    const caada::DomainDataset dataset = caada::load_csv(flags.data);

    caada::Stream stream = model.eval_stream();
    if (flags.stream == "source") stream = caada::Stream::Source;
    if (flags.stream == "target") stream = caada::Stream::Target;

    const caada::Matrix activations =
        flags.layer == "fc8" ? model.eval_logits(dataset.features(), stream)
                             : model.eval_bottleneck(dataset.features(), stream);

    const fs::path dir = resolve_out_dir(flags.out, "export");
    fs::create_directories(dir);
    const fs::path file = dir / "embeddings.csv";
    std::ofstream out(file, std::ios::binary);
    if (!out) throw caada::DataError("cannot write " + file.string());
    for (std::size_t d = 0; d < activations.cols(); ++d) {
        out << "dim" << d << ",";
    }
    out << "label,domain\n";
    std::span<const int> labels;
    if (dataset.has_labels()) labels = dataset.labels();
    for (std::size_t i = 0; i < activations.rows(); ++i) {
        for (std::size_t d = 0; d < activations.cols(); ++d) {
            out << caada::format_double(activations(i, d)) << ",";
        }
        if (!labels.empty()) out << labels[i];
        out << "," << dataset.domain_id() << "\n";
    }

    json manifest;
    manifest["command"] = "export-embeddings";
    manifest["checkpoint"] = flags.checkpoint;
    manifest["data"] = flags.data;
    manifest["layer"] = flags.layer;
    manifest["stream"] = flags.stream;
    manifest["artifacts"] = {"embeddings.csv"};
    write_manifest(dir, std::move(manifest));
    std::cout << "wrote " << file.string() << " (" << activations.rows() << " rows, "
              << activations.cols() + 2 << " columns)\n";
    return kExitOk;
}

struct GradcheckFlags {
    double eps = 1e-5;
    std::optional<double> tol;
    bool corrupt_coral = false;
};

int cmd_gradcheck(const GradcheckFlags& flags) {
    caada::GradCheckOptions options;
    options.eps = flags.eps;
    options.tolerance = flags.tol;
    options.corrupt_coral = flags.corrupt_coral;

    const auto checks = caada::run_gradient_suite(options);
    for (const auto& check : checks) {
        std::cout << check.name << ": max_rel_err="
                  << caada::format_double(check.max_rel_error)
                  << " threshold=" << caada::format_double(check.threshold) << " "
                  << (check.passed ? "PASS" : "FAIL") << "\n";
    }
    return caada::all_passed(checks) ? kExitOk : kExitVerification;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Correlation-aware adversarial domain adaptation and "
                 "generalization experiments"};
    app.require_subcommand(1);

    GenFlags gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate synthetic domain-shifted CSV datasets");
    gen_cmd->add_option("--classes", gen.classes, "Number of classes");
    gen_cmd->add_option("--per-class", gen.per_class, "Samples per class per domain");
    gen_cmd->add_option("--dim", gen.dim, "Feature dimension");
    gen_cmd->add_option("--class-sep", gen.class_sep,
                        "Spacing of the default line of class centers");
    gen_cmd->add_option("--noise", gen.noise, "Per-dimension class stddev")
        ->delimiter(',');
    gen_cmd->add_option("--centers", gen.centers,
                        "Explicit class centers, e.g. \"0,0;4,0\"");
    gen_cmd->add_option("--domains", gen.domains,
                        "Rotation (degrees) of each domain, e.g. 0,30")
        ->delimiter(',')
        ->required();
    gen_cmd->add_option("--translate", gen.translate,
                        "Per-domain translation vectors, e.g. \"0,0;-2.5,1\"");
    gen_cmd->add_option("--scale", gen.scales, "Per-domain scale factors, e.g. \"1;1.2\"");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_option("--out", gen.out, "Output directory");

    TrainFlags train;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a DA or DG model");
    train.config.attach(*train_cmd, true);
    train_cmd->add_option("--source", train.source, "Labeled source CSV (DA)");
    train_cmd->add_option("--target", train.target, "Unlabeled-use target CSV (DA)");
    train_cmd->add_option("--sources", train.sources, "Labeled source CSVs (DG)")
        ->delimiter(',');
    train_cmd->add_option("--out", train.out, "Output directory");

    StudyFlags ablate;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Four-mode ablation study");
    ablate.config.attach(*ablate_cmd, true);
    ablate_cmd->add_option("--source", ablate.source, "Labeled source CSV (DA)");
    ablate_cmd->add_option("--sources", ablate.sources, "Labeled source CSVs (DG)")
        ->delimiter(',');
    ablate_cmd->add_option("--target", ablate.target,
                           "Target CSV (DA) or held-out domain CSV (DG)");
    ablate_cmd->add_option("--seeds", ablate.seeds, "Seed list, e.g. 1,2,3,4,5")
        ->delimiter(',')
        ->required();
    ablate_cmd->add_option("--jobs", ablate.jobs, "Parallel training runs");
    ablate_cmd->add_option("--out", ablate.out, "Output directory");

    SweepFlags sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Hyperparameter sweep");
    sweep.study.config.attach(*sweep_cmd, true);
    sweep_cmd->add_option("--param", sweep.param, "Swept parameter")
        ->check(CLI::IsMember({"target_fraction", "bottleneck_dim"}))
        ->required();
    sweep_cmd->add_option("--values", sweep.values, "Sweep values, e.g. 0.2,0.4,0.6")
        ->delimiter(',')
        ->required();
    sweep_cmd->add_option("--source", sweep.study.source, "Labeled source CSV (DA)");
    sweep_cmd->add_option("--sources", sweep.study.sources, "Labeled source CSVs (DG)")
        ->delimiter(',');
    sweep_cmd->add_option("--target", sweep.study.target,
                          "Target CSV (DA) or held-out domain CSV (DG)");
    sweep_cmd->add_option("--seeds", sweep.study.seeds, "Seed list")
        ->delimiter(',')
        ->required();
    sweep_cmd->add_option("--jobs", sweep.study.jobs, "Parallel training runs");
    sweep_cmd->add_option("--out", sweep.study.out, "Output directory");

    ExportFlags exp;
    CLI::App* export_cmd = app.add_subcommand(
        "export-embeddings", "Dump bottleneck or classifier activations to CSV");
    export_cmd->add_option("--checkpoint", exp.checkpoint, "Model checkpoint")->required();
    export_cmd->add_option("--data", exp.data, "Dataset CSV")->required();
    export_cmd->add_option("--layer", exp.layer, "Activation layer")
        ->check(CLI::IsMember({"fcb", "fc8"}));
    export_cmd->add_option("--stream", exp.stream, "Extractor stream")
        ->check(CLI::IsMember({"auto", "source", "target"}));
    export_cmd->add_option("--out", exp.out, "Output directory");

    GradcheckFlags gradcheck;
    CLI::App* gradcheck_cmd = app.add_subcommand(
        "gradcheck", "Finite-difference certification of every analytic gradient");
    gradcheck_cmd->add_option("--eps", gradcheck.eps, "Central-difference step");
    double tol_value = 0.0;
    CLI::Option* tol_opt =
        gradcheck_cmd->add_option("--tol", tol_value, "Pass threshold for all components");
    gradcheck_cmd->add_flag("--corrupt-coral", gradcheck.corrupt_coral)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen);
        if (train_cmd->parsed()) return cmd_train(train);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep);
        if (export_cmd->parsed()) return cmd_export_embeddings(exp);
        if (gradcheck_cmd->parsed()) {
            if (tol_opt->count() > 0) gradcheck.tol = tol_value;
            return cmd_gradcheck(gradcheck);
        }
    } catch (const caada::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const caada::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const caada::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
