#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caada/matrix.hpp"

namespace caada {

// Labeled (or unlabeled) samples tagged with a domain identifier. Feature and
// label accesses are counted so tests can prove the training protocol: a DA
// trainer must never read target labels, a DG trainer must never touch the
// held-out domain at all. Copies start with fresh counters.
class DomainDataset {
public:
    DomainDataset(std::string name, int domain_id, Matrix features,
                  std::optional<std::vector<int>> labels);

    DomainDataset(const DomainDataset& other);
    DomainDataset& operator=(const DomainDataset& other);
    DomainDataset(DomainDataset&& other) noexcept;
    DomainDataset& operator=(DomainDataset&& other) noexcept;

    const Matrix& features() const;
    bool has_labels() const noexcept { return labels_.has_value(); }
    // Evaluation / stratification accessor; throws DataError when unlabeled.
    std::span<const int> labels() const;

    const std::string& name() const noexcept { return name_; }
    int domain_id() const noexcept { return domain_id_; }
    std::size_t size() const noexcept { return features_.rows(); }
    std::size_t dim() const noexcept { return features_.cols(); }
    int num_classes() const;  // max label + 1

    std::uint64_t feature_reads() const { return feature_reads_.load(); }
    std::uint64_t label_reads() const { return label_reads_.load(); }

private:
    std::string name_;
    int domain_id_ = 0;
    Matrix features_;
    std::optional<std::vector<int>> labels_;
    mutable std::atomic<std::uint64_t> feature_reads_{0};
    mutable std::atomic<std::uint64_t> label_reads_{0};
};

// Rigid transform applied to one domain's samples: x' = scale * R(theta) x + t
// with R rotating in the first two feature dimensions.
struct DomainShift {
    double rotation_deg = 0.0;
    std::vector<double> translation;  // empty = zero vector
    double scale = 1.0;
};

// Gaussian mixture shared by all domains. When class_centers is empty the
// centers default to a line: center_k = (k * class_spacing, 0, ..., 0).
struct MixtureSpec {
    std::size_t num_classes = 2;
    std::size_t samples_per_class = 100;
    std::size_t dim = 2;
    std::vector<std::vector<double>> class_centers;  // K x dim when present
    std::vector<double> class_stddev;                // per-dim; empty = all 1.0
    std::vector<DomainShift> domains;
    double class_spacing = 4.0;
};

// One dataset per domain; each domain draws fresh samples from the base
// mixture (seeded per domain) and maps them through its shift.
std::vector<DomainDataset> gen_gaussian_domains(const MixtureSpec& spec,
                                                std::uint64_t seed);

// CSV schema (exact contract): header "f0,...,f{d-1},label,domain", one sample
// per row, decimal floats, label empty for unlabeled rows, LF line endings.
DomainDataset load_csv(const std::filesystem::path& path);
void save_csv(const DomainDataset& dataset, const std::filesystem::path& path);

struct DgSplit {
    DomainDataset train_stream;
    DomainDataset val_stream;
};

// Per-domain seeded shuffle and floor(fraction * N) split, then aggregation of
// the train parts and the remainders across all source domains.
DgSplit dg_split(std::span<const DomainDataset> sources, double fraction,
                 std::uint64_t seed);

// Stratified subsample: per class, keep floor(fraction * N_class) samples
// (seeded shuffle). A resulting class bucket below 2 is rejected.
DomainDataset subsample_target(const DomainDataset& target, double fraction,
                               std::uint64_t seed);

struct BatchPlan {
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
};

struct BatchPair {
    std::vector<std::size_t> a_rows;
    std::vector<std::size_t> b_rows;
};

// Paired two-stream batches for one epoch. The longer stream is visited
// exactly once (a trailing 1-row batch merges into its predecessor); the
// shorter stream cycles, reshuffling on each wrap, and contributes a batch of
// the same size as its partner.
std::vector<BatchPair> paired_batches(std::size_t n_a, std::size_t n_b,
                                      const BatchPlan& plan, std::size_t epoch);

std::vector<int> take_labels(std::span<const int> labels,
                             std::span<const std::size_t> rows);

}  // namespace caada
