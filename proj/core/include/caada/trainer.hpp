#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caada/config.hpp"
#include "caada/data.hpp"
#include "caada/model.hpp"

namespace caada {

// One logged row of a training run. Losses are epoch means (or single-step
// values with per_step_metrics); accuracies are exact fractions.
struct MetricsRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;  // cumulative optimizer steps
    double loss_classification = 0.0;
    double loss_discrepancy = 0.0;
    double loss_adversarial = 0.0;
    double loss_combined = 0.0;
    double source_train_accuracy = 0.0;
    double target_accuracy = 0.0;
    double wall_time_ms = 0.0;
};

struct TrainResult {
    CaadaModel model;
    std::vector<MetricsRecord> history;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

// Unsupervised domain adaptation: labeled source plus unlabeled target.
// Target labels are never read here; the per-epoch target accuracy comes
// from evaluate(), the one sanctioned evaluation-only label access. The
// target_fraction field is applied by callers (CLI, sweeps) before this
// function so the trainer itself never touches target labels.
TrainResult train_da(const TrainConfig& config, const DomainDataset& source,
                     const DomainDataset& target, const MetricsSink& sink = {});

// Domain generalization: the labeled sources are split 70/30 per domain,
// aggregated into two streams, and fed through the two-stream network. The
// held-out domain is simply never passed in. The logged target_accuracy is
// the validation-stream accuracy (no target exists during DG training).
TrainResult train_dg(const TrainConfig& config,
                     std::span<const DomainDataset> sources,
                     const MetricsSink& sink = {});

// Fraction of predict() matches over a labeled dataset.
double evaluate(CaadaModel& model, const DomainDataset& dataset);

// Header: epoch,step,loss_cls,loss_dm,loss_adv,loss_total,src_acc,tgt_acc,wall_ms
// Floats use shortest round-trip formatting. The wall_ms column is written as
// 0 so runs with identical flags produce byte-identical files; measured times
// stay available on the in-memory records.
void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const MetricsRecord> history);

struct AblationRow {
    std::string mode;  // source_only | coral_only | adversarial_only | combined
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

// Runs the four ablation modes over the seed list and reports mean and
// (sample) standard deviation of the final target accuracy. In DA mode
// `sources` must hold exactly the one source domain and `target` is the
// adaptation target; in DG mode `target` is the held-out domain and is only
// ever evaluated. `jobs` > 1 runs independent trainings in worker threads.
std::vector<AblationRow> run_ablation(const TrainConfig& config,
                                      std::span<const DomainDataset> sources,
                                      const DomainDataset& target,
                                      std::span<const std::uint64_t> seeds,
                                      std::size_t jobs = 1);

enum class SweepParam { TargetFraction, BottleneckDim };

struct SweepRow {
    double value = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

// One train/evaluate cycle per (value, seed). The target-fraction sweep is a
// DA protocol (it subsamples the adaptation target, evaluation stays on the
// full target); the bottleneck sweep works in both modes.
std::vector<SweepRow> run_sweep(const TrainConfig& config, SweepParam param,
                                std::span<const double> values,
                                std::span<const DomainDataset> sources,
                                const DomainDataset& target,
                                std::span<const std::uint64_t> seeds,
                                std::size_t jobs = 1);

}  // namespace caada
