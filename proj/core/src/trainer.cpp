#include "caada/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>

#include "caada/errors.hpp"
#include "caada/rng.hpp"
#include "caada/text_io.hpp"

namespace caada {

namespace {

using Clock = std::chrono::steady_clock;

double accuracy_of(std::span<const int> predictions, std::span<const int> labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out(logits.rows(), 0);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) best = j;
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

struct LossAccumulator {
    double cls = 0.0, dm = 0.0, adv = 0.0, total = 0.0;
    std::size_t count = 0;

    void add(const LossTerms& terms) {
        cls += terms.classification;
        dm += terms.discrepancy;
        adv += terms.adversarial;
        total += terms.combined;
        ++count;
    }
    LossTerms mean() const {
        const double n = count ? static_cast<double>(count) : 1.0;
        return LossTerms{cls / n, dm / n, adv / n, total / n};
    }
};

// Shared epoch loop for both regimes. `stream_b_labels` is null in DA.
TrainResult run_training(const TrainConfig& config, const DomainDataset& stream_a,
                         const DomainDataset& stream_b,
                         const std::vector<int>* stream_b_labels,
                         const DomainDataset& eval_target, const MetricsSink& sink) {
    const std::size_t input_dim = stream_a.dim();
    if (stream_b.dim() != input_dim) {
        throw DimensionError("train: stream dims differ, " +
                             std::to_string(input_dim) + " vs " +
                             std::to_string(stream_b.dim()));
    }
    const std::vector<int> labels_a(stream_a.labels().begin(), stream_a.labels().end());
    std::size_t num_classes = static_cast<std::size_t>(stream_a.num_classes());
    if (stream_b_labels) {
        for (int y : *stream_b_labels) {
            num_classes = std::max(num_classes, static_cast<std::size_t>(y) + 1);
        }
    }

    CaadaModel model = CaadaModel::build(config, input_dim, num_classes);
    SgdOptimizer optimizer(config.learning_rate, config.momentum, config.weight_decay);
    optimizer.register_parameters(model.trainable_parameters());

    const BatchPlan plan{config.batch_size, derive_seed(config.seed, "batching")};
    const std::size_t steps_per_epoch =
        paired_batches(stream_a.size(), stream_b.size(), plan, 0).size();
    const std::size_t total_steps = config.epochs * steps_per_epoch;

    std::vector<MetricsRecord> history;
    std::size_t global_step = 0;
    std::size_t consecutive_bad = 0;
    const auto run_start = Clock::now();

    auto emit = [&](std::size_t epoch, const LossTerms& losses) {
        MetricsRecord record;
        record.epoch = epoch;
        record.step = global_step;
        record.loss_classification = losses.classification;
        record.loss_discrepancy = losses.discrepancy;
        record.loss_adversarial = losses.adversarial;
        record.loss_combined = losses.combined;
        record.source_train_accuracy = accuracy_of(
            argmax_rows(model.eval_logits(stream_a.features(), Stream::Source)),
            labels_a);
        record.target_accuracy = evaluate(model, eval_target);
        record.wall_time_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - run_start).count();
        history.push_back(record);
        if (sink) sink(record);
    };

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto pairs = paired_batches(stream_a.size(), stream_b.size(), plan, epoch);
        LossAccumulator epoch_losses;
        for (const BatchPair& pair : pairs) {
            if (config.grl_ramp && total_steps > 1) {
                const double progress = static_cast<double>(global_step) /
                                        static_cast<double>(total_steps - 1);
                model.set_grl_lambda(config.gamma * progress);
            }
            const Matrix x_a = take_rows(stream_a.features(), pair.a_rows);
            const std::vector<int> y_a = take_labels(labels_a, pair.a_rows);
            const Matrix x_b = take_rows(stream_b.features(), pair.b_rows);

            bool bad_step = false;
            LossTerms step_losses;
            try {
                StepOutput step;
                if (stream_b_labels) {
                    const std::vector<int> y_b = take_labels(*stream_b_labels, pair.b_rows);
                    step = model.forward_dg(x_a, y_a, x_b, y_b);
                } else {
                    step = model.forward_da(x_a, y_a, x_b);
                }
                step_losses = step.losses;
                if (std::isfinite(step.losses.combined)) {
                    model.backward_and_step(step, optimizer);
                    epoch_losses.add(step.losses);
                } else {
                    bad_step = true;
                }
            } catch (const NumericError&) {
                bad_step = true;  // step aborted
            }
            ++global_step;
            consecutive_bad = bad_step ? consecutive_bad + 1 : 0;
            if (consecutive_bad >= 3) {
                throw DivergenceError("training diverged: non-finite losses for 3 "
                                      "consecutive steps, last at step " +
                                      std::to_string(global_step));
            }
            if (config.per_step_metrics && !bad_step) emit(epoch, step_losses);
        }
        if (!config.per_step_metrics) emit(epoch, epoch_losses.mean());
    }
    return TrainResult{std::move(model), std::move(history)};
}

}  // namespace

TrainResult train_da(const TrainConfig& config, const DomainDataset& source,
                     const DomainDataset& target, const MetricsSink& sink) {
    config.validate();
    if (config.mode != Mode::Da) throw ConfigError("train_da: config.mode must be da");
    if (!source.has_labels()) throw DataError("train_da: source must be labeled");
    return run_training(config, source, target, nullptr, target, sink);
}

TrainResult train_dg(const TrainConfig& config,
                     std::span<const DomainDataset> sources,
                     const MetricsSink& sink) {
    config.validate();
    if (config.mode != Mode::Dg) throw ConfigError("train_dg: config.mode must be dg");
    if (sources.size() < 2)
        throw ConfigError("train_dg: need at least 2 source domains");

    DgSplit split = dg_split(sources, 0.7, derive_seed(config.seed, "dg_split"));
    const std::vector<int> val_labels(split.val_stream.labels().begin(),
                                      split.val_stream.labels().end());
    return run_training(config, split.train_stream, split.val_stream, &val_labels,
                        split.val_stream, sink);
}

double evaluate(CaadaModel& model, const DomainDataset& dataset) {
    if (!dataset.has_labels())
        throw DataError("evaluate: dataset '" + dataset.name() + "' has no labels");
    const std::vector<int> predictions = model.predict(dataset.features());
    const auto labels = dataset.labels();
    return accuracy_of(predictions, labels);
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const MetricsRecord> history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "epoch,step,loss_cls,loss_dm,loss_adv,loss_total,src_acc,tgt_acc,wall_ms\n";
    for (const MetricsRecord& r : history) {
        out << r.epoch << "," << r.step << "," << format_double(r.loss_classification)
            << "," << format_double(r.loss_discrepancy) << ","
            << format_double(r.loss_adversarial) << ","
            << format_double(r.loss_combined) << ","
            << format_double(r.source_train_accuracy) << ","
            << format_double(r.target_accuracy) << ",0\n";
    }
    if (!out) throw DataError("write to " + path.string() + " failed");
}

namespace {

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;
};

Summary summarize(const std::vector<double>& values) {
    Summary s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

// Runs `tasks` with at most `jobs` concurrent workers; results keep order.
std::vector<double> run_jobs(const std::vector<std::function<double()>>& tasks,
                             std::size_t jobs) {
    std::vector<double> results(tasks.size(), 0.0);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) results[i] = tasks[i]();
        return results;
    }
    std::size_t next = 0;
    while (next < tasks.size()) {
        const std::size_t wave = std::min(jobs, tasks.size() - next);
        std::vector<std::future<double>> futures;
        futures.reserve(wave);
        for (std::size_t i = 0; i < wave; ++i) {
            futures.push_back(std::async(std::launch::async, tasks[next + i]));
        }
        for (std::size_t i = 0; i < wave; ++i) results[next + i] = futures[i].get();
        next += wave;
    }
    return results;
}

double train_and_score(const TrainConfig& config,
                       std::span<const DomainDataset> sources,
                       const DomainDataset& target) {
    if (config.mode == Mode::Da) {
        if (sources.size() != 1)
            throw ConfigError("DA run needs exactly one source domain");
        TrainResult result = train_da(config, sources[0], target);
        return evaluate(result.model, target);
    }
    TrainResult result = train_dg(config, sources);
    return evaluate(result.model, target);
}

}  // namespace

std::vector<AblationRow> run_ablation(const TrainConfig& config,
                                      std::span<const DomainDataset> sources,
                                      const DomainDataset& target,
                                      std::span<const std::uint64_t> seeds,
                                      std::size_t jobs) {
    config.validate();
    if (seeds.empty()) throw ConfigError("run_ablation: seed list is empty");

    struct ModeSpec {
        const char* name;
        double gamma, sigma;
    };
    const ModeSpec modes[] = {
        {"source_only", 0.0, 0.0},
        {"coral_only", 0.0, config.sigma},
        {"adversarial_only", config.gamma, 0.0},
        {"combined", config.gamma, config.sigma},
    };

    std::vector<std::function<double()>> tasks;
    for (const ModeSpec& mode : modes) {
        for (std::uint64_t seed : seeds) {
            TrainConfig run = config;
            run.gamma = mode.gamma;
            run.sigma = mode.sigma;
            run.seed = seed;
            tasks.push_back([run, sources, &target] {
                return train_and_score(run, sources, target);
            });
        }
    }
    const std::vector<double> scores = run_jobs(tasks, jobs);

    std::vector<AblationRow> rows;
    std::size_t idx = 0;
    for (const ModeSpec& mode : modes) {
        std::vector<double> per_seed(scores.begin() + static_cast<std::ptrdiff_t>(idx),
                                     scores.begin() +
                                         static_cast<std::ptrdiff_t>(idx + seeds.size()));
        idx += seeds.size();
        const Summary s = summarize(per_seed);
        rows.push_back(AblationRow{mode.name, s.mean, s.stddev});
    }
    return rows;
}

std::vector<SweepRow> run_sweep(const TrainConfig& config, SweepParam param,
                                std::span<const double> values,
                                std::span<const DomainDataset> sources,
                                const DomainDataset& target,
                                std::span<const std::uint64_t> seeds,
                                std::size_t jobs) {
    config.validate();
    if (seeds.empty()) throw ConfigError("run_sweep: seed list is empty");
    if (values.empty()) throw ConfigError("run_sweep: value list is empty");
    if (param == SweepParam::TargetFraction && config.mode != Mode::Da) {
        throw ConfigError("run_sweep: target_fraction sweep is a DA protocol");
    }

    std::vector<std::function<double()>> tasks;
    for (double value : values) {
        for (std::uint64_t seed : seeds) {
            TrainConfig run = config;
            run.seed = seed;
            if (param == SweepParam::BottleneckDim) {
                if (value < 1.0 || value != std::floor(value)) {
                    throw ConfigError("run_sweep: bottleneck_dim values must be "
                                      "positive integers");
                }
                run.bottleneck_dim = static_cast<std::size_t>(value);
                tasks.push_back([run, sources, &target] {
                    return train_and_score(run, sources, target);
                });
            } else {
                run.target_fraction = value;
                tasks.push_back([run, sources, &target] {
                    // Train on the stratified subsample, evaluate on the full
                    // target.
                    const DomainDataset subsampled = subsample_target(
                        target, run.target_fraction,
                        derive_seed(run.seed, "target_subsample"));
                    if (sources.size() != 1)
                        throw ConfigError("DA run needs exactly one source domain");
                    TrainResult result = train_da(run, sources[0], subsampled);
                    return evaluate(result.model, target);
                });
            }
        }
    }
    const std::vector<double> scores = run_jobs(tasks, jobs);

    std::vector<SweepRow> rows;
    std::size_t idx = 0;
    for (double value : values) {
        std::vector<double> per_seed(scores.begin() + static_cast<std::ptrdiff_t>(idx),
                                     scores.begin() +
                                         static_cast<std::ptrdiff_t>(idx + seeds.size()));
        idx += seeds.size();
        const Summary s = summarize(per_seed);
        rows.push_back(SweepRow{value, s.mean, s.stddev});
    }
    return rows;
}

}  // namespace caada
