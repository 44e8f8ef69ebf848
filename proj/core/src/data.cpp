#include "caada/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "caada/errors.hpp"
#include "caada/rng.hpp"
#include "caada/text_io.hpp"

namespace caada {

DomainDataset::DomainDataset(std::string name, int domain_id, Matrix features,
                             std::optional<std::vector<int>> labels)
    : name_(std::move(name)),
      domain_id_(domain_id),
      features_(std::move(features)),
      labels_(std::move(labels)) {
    if (features_.rows() == 0) throw DataError("dataset '" + name_ + "' is empty");
    if (labels_ && labels_->size() != features_.rows()) {
        throw DimensionError("dataset '" + name_ + "': " +
                             std::to_string(labels_->size()) + " labels for " +
                             std::to_string(features_.rows()) + " rows");
    }
    if (labels_) {
        for (int y : *labels_) {
            if (y < 0) throw DataError("dataset '" + name_ + "': negative label");
        }
    }
}

DomainDataset::DomainDataset(const DomainDataset& other)
    : name_(other.name_),
      domain_id_(other.domain_id_),
      features_(other.features_),
      labels_(other.labels_) {}

DomainDataset& DomainDataset::operator=(const DomainDataset& other) {
    if (this != &other) {
        name_ = other.name_;
        domain_id_ = other.domain_id_;
        features_ = other.features_;
        labels_ = other.labels_;
        feature_reads_ = 0;
        label_reads_ = 0;
    }
    return *this;
}

DomainDataset::DomainDataset(DomainDataset&& other) noexcept
    : name_(std::move(other.name_)),
      domain_id_(other.domain_id_),
      features_(std::move(other.features_)),
      labels_(std::move(other.labels_)) {}

DomainDataset& DomainDataset::operator=(DomainDataset&& other) noexcept {
    if (this != &other) {
        name_ = std::move(other.name_);
        domain_id_ = other.domain_id_;
        features_ = std::move(other.features_);
        labels_ = std::move(other.labels_);
        feature_reads_ = 0;
        label_reads_ = 0;
    }
    return *this;
}

const Matrix& DomainDataset::features() const {
    feature_reads_.fetch_add(1, std::memory_order_relaxed);
    return features_;
}

std::span<const int> DomainDataset::labels() const {
    if (!labels_) throw DataError("dataset '" + name_ + "' has no labels");
    label_reads_.fetch_add(1, std::memory_order_relaxed);
    return *labels_;
}

int DomainDataset::num_classes() const {
    if (!labels_) throw DataError("dataset '" + name_ + "' has no labels");
    int max_label = 0;
    for (int y : *labels_) max_label = std::max(max_label, y);
    return max_label + 1;
}

std::vector<DomainDataset> gen_gaussian_domains(const MixtureSpec& spec,
                                                std::uint64_t seed) {
    if (spec.num_classes < 2) throw ConfigError("generator: need at least 2 classes");
    if (spec.samples_per_class < 2)
        throw ConfigError("generator: need at least 2 samples per class");
    if (spec.dim == 0) throw ConfigError("generator: dim must be positive");
    if (spec.domains.empty()) throw ConfigError("generator: need at least 1 domain");

    std::vector<std::vector<double>> centers = spec.class_centers;
    if (centers.empty()) {
        for (std::size_t k = 0; k < spec.num_classes; ++k) {
            std::vector<double> c(spec.dim, 0.0);
            c[0] = static_cast<double>(k) * spec.class_spacing;
            centers.push_back(std::move(c));
        }
    }
    if (centers.size() != spec.num_classes)
        throw ConfigError("generator: center count does not match class count");
    for (const auto& c : centers) {
        if (c.size() != spec.dim)
            throw ConfigError("generator: center dimension does not match dim");
    }
    std::vector<double> stddev = spec.class_stddev;
    if (stddev.empty()) stddev.assign(spec.dim, 1.0);
    if (stddev.size() != spec.dim)
        throw ConfigError("generator: stddev dimension does not match dim");

    std::vector<DomainDataset> out;
    out.reserve(spec.domains.size());
    for (std::size_t j = 0; j < spec.domains.size(); ++j) {
        const DomainShift& shift = spec.domains[j];
        std::vector<double> translation = shift.translation;
        if (translation.empty()) translation.assign(spec.dim, 0.0);
        if (translation.size() != spec.dim)
            throw ConfigError("generator: translation dimension does not match dim");

        Rng rng = make_rng(derive_seed(seed, "gen.domain", j));
        std::normal_distribution<double> normal(0.0, 1.0);

        const double theta = shift.rotation_deg * std::numbers::pi / 180.0;
        const double cos_t = std::cos(theta);
        const double sin_t = std::sin(theta);

        const std::size_t n = spec.num_classes * spec.samples_per_class;
        Matrix features(n, spec.dim);
        std::vector<int> labels(n, 0);
        std::size_t row = 0;
        for (std::size_t k = 0; k < spec.num_classes; ++k) {
            for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
                std::vector<double> x(spec.dim);
                for (std::size_t d = 0; d < spec.dim; ++d) {
                    x[d] = centers[k][d] + stddev[d] * normal(rng);
                }
                if (spec.dim >= 2) {
                    const double x0 = x[0];
                    const double x1 = x[1];
                    x[0] = cos_t * x0 - sin_t * x1;
                    x[1] = sin_t * x0 + cos_t * x1;
                }
                for (std::size_t d = 0; d < spec.dim; ++d) {
                    features(row, d) = shift.scale * x[d] + translation[d];
                }
                labels[row] = static_cast<int>(k);
            }
        }
        out.emplace_back("domain_" + std::to_string(j), static_cast<int>(j),
                         std::move(features), std::move(labels));
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

std::string expected_header(std::size_t dim) {
    std::string h;
    for (std::size_t d = 0; d < dim; ++d) h += "f" + std::to_string(d) + ",";
    return h + "label,domain";
}

}  // namespace

DomainDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "label" ||
        header.back() != "domain") {
        throw DataError(path.string() + ": bad header, expected f0,...,label,domain");
    }
    const std::size_t dim = header.size() - 2;
    if (line != expected_header(dim)) {
        throw DataError(path.string() + ": bad header '" + line + "'");
    }

    std::vector<double> values;
    std::vector<int> labels;
    bool any_unlabeled = false;
    bool any_labeled = false;
    long domain = -1;
    std::size_t line_no = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;  // ignore a trailing blank line
        const auto fields = split_csv_line(line);
        if (fields.size() != dim + 2) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected " + std::to_string(dim + 2) +
                            " columns, got " + std::to_string(fields.size()));
        }
        for (std::size_t d = 0; d < dim; ++d) {
            double v = 0.0;
            if (!parse_double(fields[d], v)) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": bad float '" + fields[d] + "'");
            }
            values.push_back(v);
        }
        if (fields[dim].empty()) {
            any_unlabeled = true;
            labels.push_back(-1);
        } else {
            long y = 0;
            if (!parse_long(fields[dim], y) || y < 0) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": bad label '" + fields[dim] + "'");
            }
            any_labeled = true;
            labels.push_back(static_cast<int>(y));
        }
        long row_domain = 0;
        if (!parse_long(fields[dim + 1], row_domain) || row_domain < 0) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": bad domain '" + fields[dim + 1] + "'");
        }
        if (domain < 0) {
            domain = row_domain;
        } else if (domain != row_domain) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": mixed domain ids in one file");
        }
        ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": no samples after header");
    if (any_labeled && any_unlabeled) {
        throw DataError(path.string() + ": mixed labeled and unlabeled rows");
    }

    std::optional<std::vector<int>> label_opt;
    if (any_labeled) label_opt = std::move(labels);
    return DomainDataset(path.stem().string(), static_cast<int>(domain),
                         Matrix(rows, dim, std::move(values)), std::move(label_opt));
}

void save_csv(const DomainDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");

    const Matrix& f = dataset.features();
    out << expected_header(f.cols()) << "\n";
    const bool labeled = dataset.has_labels();
    std::span<const int> labels;
    if (labeled) labels = dataset.labels();
    for (std::size_t i = 0; i < f.rows(); ++i) {
        for (std::size_t d = 0; d < f.cols(); ++d) {
            out << format_double(f(i, d)) << ",";
        }
        if (labeled) out << labels[i];
        out << "," << dataset.domain_id() << "\n";
    }
    if (!out) throw DataError("write to " + path.string() + " failed");
}

DgSplit dg_split(std::span<const DomainDataset> sources, double fraction,
                 std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("dg_split: fraction must be in (0, 1)");
    if (sources.size() < 2)
        throw ConfigError("dg_split: need at least 2 source domains");

    std::vector<double> train_values, val_values;
    std::vector<int> train_labels, val_labels;
    const std::size_t dim = sources[0].dim();

    for (std::size_t si = 0; si < sources.size(); ++si) {
        const DomainDataset& source = sources[si];
        if (source.dim() != dim)
            throw DimensionError("dg_split: feature dims differ across sources");
        if (!source.has_labels())
            throw DataError("dg_split: source '" + source.name() + "' is unlabeled");

        const std::size_t n = source.size();
        const auto n_train =
            static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
        if (n_train < 2 || n - n_train < 2) {
            throw DegenerateBatchError("dg_split: domain '" + source.name() +
                                       "' leaves a side with fewer than 2 samples");
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(derive_seed(seed, "dg_split.domain", si));
        std::shuffle(order.begin(), order.end(), rng);

        const Matrix& f = source.features();
        const auto labels = source.labels();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t row = order[i];
            auto& values = i < n_train ? train_values : val_values;
            auto& labs = i < n_train ? train_labels : val_labels;
            for (std::size_t d = 0; d < dim; ++d) values.push_back(f(row, d));
            labs.push_back(labels[row]);
        }
    }

    Matrix train_f(train_labels.size(), dim, std::move(train_values));
    Matrix val_f(val_labels.size(), dim, std::move(val_values));
    return DgSplit{
        DomainDataset("dg_train", 0, std::move(train_f), std::move(train_labels)),
        DomainDataset("dg_val", 1, std::move(val_f), std::move(val_labels)),
    };
}

DomainDataset subsample_target(const DomainDataset& target, double fraction,
                               std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("subsample_target: fraction must be in (0, 1]");
    if (!target.has_labels())
        throw DataError("subsample_target: stratification needs labels");

    const auto labels = target.labels();
    const int k = target.num_classes();
    std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        buckets[static_cast<std::size_t>(labels[i])].push_back(i);
    }

    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < buckets.size(); ++c) {
        auto& bucket = buckets[c];
        const auto keep = static_cast<std::size_t>(
            std::floor(fraction * static_cast<double>(bucket.size())));
        if (keep < 2) {
            throw DegenerateBatchError("subsample_target: class " + std::to_string(c) +
                                       " would keep " + std::to_string(keep) +
                                       " samples");
        }
        Rng rng = make_rng(derive_seed(seed, "subsample.class", c));
        std::shuffle(bucket.begin(), bucket.end(), rng);
        kept.insert(kept.end(), bucket.begin(),
                    bucket.begin() + static_cast<std::ptrdiff_t>(keep));
    }

    Matrix features = take_rows(target.features(), kept);
    std::vector<int> new_labels = take_labels(labels, kept);
    return DomainDataset(target.name() + "_sub", target.domain_id(),
                         std::move(features), std::move(new_labels));
}

std::vector<BatchPair> paired_batches(std::size_t n_a, std::size_t n_b,
                                      const BatchPlan& plan, std::size_t epoch) {
    if (plan.batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (n_a < 2 || n_b < 2)
        throw DegenerateBatchError("paired_batches: both streams need >= 2 samples");

    const bool a_is_long = n_a >= n_b;
    const std::size_t n_long = a_is_long ? n_a : n_b;
    const std::size_t n_short = a_is_long ? n_b : n_a;

    std::vector<std::size_t> long_order(n_long);
    std::iota(long_order.begin(), long_order.end(), std::size_t{0});
    {
        Rng rng = make_rng(derive_seed(plan.seed, "batches.long", epoch));
        std::shuffle(long_order.begin(), long_order.end(), rng);
    }

    // Chunk the long stream; a trailing single row merges into its predecessor.
    std::vector<std::size_t> chunk_sizes;
    std::size_t remaining = n_long;
    while (remaining > 0) {
        const std::size_t take = std::min(plan.batch_size, remaining);
        chunk_sizes.push_back(take);
        remaining -= take;
    }
    if (chunk_sizes.size() > 1 && chunk_sizes.back() == 1) {
        chunk_sizes.pop_back();
        chunk_sizes.back() += 1;
    }

    // Cycling cursor over the short stream, reshuffled on every wrap.
    std::vector<std::size_t> short_order(n_short);
    std::iota(short_order.begin(), short_order.end(), std::size_t{0});
    std::size_t wrap_count = 0;
    {
        Rng rng = make_rng(derive_seed(plan.seed, "batches.short", epoch * 1000));
        std::shuffle(short_order.begin(), short_order.end(), rng);
    }
    std::size_t cursor = 0;
    auto next_short = [&]() {
        if (cursor == n_short) {
            ++wrap_count;
            Rng rng = make_rng(
                derive_seed(plan.seed, "batches.short", epoch * 1000 + wrap_count));
            std::shuffle(short_order.begin(), short_order.end(), rng);
            cursor = 0;
        }
        return short_order[cursor++];
    };

    std::vector<BatchPair> pairs;
    pairs.reserve(chunk_sizes.size());
    std::size_t offset = 0;
    for (std::size_t size : chunk_sizes) {
        BatchPair pair;
        auto& long_rows = a_is_long ? pair.a_rows : pair.b_rows;
        auto& short_rows = a_is_long ? pair.b_rows : pair.a_rows;
        long_rows.assign(long_order.begin() + static_cast<std::ptrdiff_t>(offset),
                         long_order.begin() + static_cast<std::ptrdiff_t>(offset + size));
        short_rows.reserve(size);
        for (std::size_t i = 0; i < size; ++i) short_rows.push_back(next_short());
        offset += size;
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<int> take_labels(std::span<const int> labels,
                             std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= labels.size()) {
            throw DimensionError("take_labels: row index out of range");
        }
        out.push_back(labels[r]);
    }
    return out;
}

}  // namespace caada
