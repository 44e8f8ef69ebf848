#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "caada/data.hpp"
#include "caada/errors.hpp"

using namespace caada;
namespace fs = std::filesystem;

namespace {

MixtureSpec two_class_spec() {
    MixtureSpec spec;
    spec.num_classes = 2;
    spec.samples_per_class = 200;
    spec.dim = 2;
    spec.class_centers = {{0.0, 0.0}, {4.0, 0.0}};
    spec.class_stddev = {0.5, 0.5};
    return spec;
}

std::vector<double> class_mean(const DomainDataset& ds, int cls) {
    const Matrix& f = ds.features();
    const auto labels = ds.labels();
    std::vector<double> mean(f.cols(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < f.rows(); ++i) {
        if (labels[i] != cls) continue;
        for (std::size_t d = 0; d < f.cols(); ++d) mean[d] += f(i, d);
        ++count;
    }
    for (double& m : mean) m /= static_cast<double>(count);
    return mean;
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::multiset<std::size_t> as_multiset(const std::vector<std::size_t>& v) {
    return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("generator bookkeeping: per-domain datasets with preserved labels") {
    MixtureSpec spec = two_class_spec();
    spec.domains = {{0.0, {}, 1.0}, {15.0, {}, 1.0}, {30.0, {}, 1.0}, {45.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 5);
    REQUIRE(domains.size() == 4);
    for (std::size_t j = 0; j < domains.size(); ++j) {
        CHECK(domains[j].domain_id() == static_cast<int>(j));
        CHECK(domains[j].size() == 400);
        CHECK(domains[j].dim() == 2);
        CHECK(domains[j].num_classes() == 2);
    }
}

TEST_CASE("zero rotation and translation reproduce the base mixture statistics") {
    MixtureSpec spec = two_class_spec();
    spec.domains = {{0.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 7);
    const auto mean0 = class_mean(domains[0], 0);
    const auto mean1 = class_mean(domains[0], 1);
    // 200 samples at stddev 0.5: the empirical mean sits within ~5 sigma/sqrt(N).
    CHECK(std::fabs(mean0[0] - 0.0) < 0.2);
    CHECK(std::fabs(mean0[1] - 0.0) < 0.2);
    CHECK(std::fabs(mean1[0] - 4.0) < 0.2);
    CHECK(std::fabs(mean1[1] - 0.0) < 0.2);
}

TEST_CASE("rotation moves class centers by the rotation matrix") {
    MixtureSpec spec = two_class_spec();
    spec.domains = {{0.0, {}, 1.0}, {30.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 9);
    const auto mean1 = class_mean(domains[1], 1);
    const double expected_x = 4.0 * std::cos(30.0 * std::numbers::pi / 180.0);
    const double expected_y = 4.0 * std::sin(30.0 * std::numbers::pi / 180.0);
    CHECK(std::fabs(mean1[0] - expected_x) < 0.2);  // ~3.464
    CHECK(std::fabs(mean1[1] - expected_y) < 0.2);  // ~2.0
}

TEST_CASE("generator rejects degenerate specs") {
    MixtureSpec spec = two_class_spec();
    spec.domains = {{0.0, {}, 1.0}};
    spec.num_classes = 1;
    CHECK_THROWS_AS(gen_gaussian_domains(spec, 1), ConfigError);
    spec = two_class_spec();
    spec.domains = {{0.0, {}, 1.0}};
    spec.samples_per_class = 1;
    CHECK_THROWS_AS(gen_gaussian_domains(spec, 1), ConfigError);
}

TEST_CASE("csv round trip preserves every bit") {
    const fs::path dir = fresh_dir("caada_csv_test");
    MixtureSpec spec = two_class_spec();
    spec.samples_per_class = 5;
    spec.domains = {{33.0, {0.25, -1.5}, 1.1}};
    const auto domains = gen_gaussian_domains(spec, 11);

    const fs::path file = dir / "d.csv";
    save_csv(domains[0], file);
    const DomainDataset loaded = load_csv(file);

    CHECK(loaded.size() == domains[0].size());
    CHECK(loaded.domain_id() == domains[0].domain_id());
    CHECK(std::memcmp(loaded.features().values().data(),
                      domains[0].features().values().data(),
                      loaded.size() * loaded.dim() * sizeof(double)) == 0);
    CHECK(std::equal(loaded.labels().begin(), loaded.labels().end(),
                     domains[0].labels().begin()));

    // Byte-stable second save.
    const fs::path file2 = dir / "d2.csv";
    save_csv(loaded, file2);
    std::ifstream f1(file, std::ios::binary), f2(file2, std::ios::binary);
    const std::string c1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string c2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    fs::remove_all(dir);
}

TEST_CASE("csv loader rejects malformed input with line numbers") {
    const fs::path dir = fresh_dir("caada_csv_bad");

    auto write = [&](const char* name, const char* content) {
        const fs::path p = dir / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    };

    const fs::path header_only = write("h.csv", "f0,f1,label,domain\n");
    CHECK_THROWS_AS(load_csv(header_only), DataError);

    const fs::path bad_float = write("f.csv", "f0,f1,label,domain\n1.0,oops,0,0\n");
    try {
        load_csv(bad_float);
        CHECK(false);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }

    const fs::path ragged = write("r.csv", "f0,f1,label,domain\n1.0,2.0,0,0\n1.0,0,0\n");
    try {
        load_csv(ragged);
        CHECK(false);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }

    const fs::path bad_header = write("bh.csv", "x,y,label,domain\n1,2,0,0\n");
    CHECK_THROWS_AS(load_csv(bad_header), DataError);

    const fs::path mixed = write("m.csv", "f0,f1,label,domain\n1,2,0,0\n1,2,,0\n");
    CHECK_THROWS_AS(load_csv(mixed), DataError);

    // Unlabeled datasets are fine and stay unlabeled.
    const fs::path unlabeled = write("u.csv", "f0,f1,label,domain\n1,2,,0\n3,4,,0\n");
    const DomainDataset u = load_csv(unlabeled);
    CHECK_FALSE(u.has_labels());
    CHECK_THROWS_AS(u.labels(), DataError);
    fs::remove_all(dir);
}

TEST_CASE("dg_split fixtures: 70/30 over 3x10 samples") {
    MixtureSpec spec = two_class_spec();
    spec.samples_per_class = 5;  // 10 per domain
    spec.domains = {{0.0, {}, 1.0}, {10.0, {}, 1.0}, {20.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 13);

    const DgSplit split = dg_split(domains, 0.7, 17);
    CHECK(split.train_stream.size() == 21);
    CHECK(split.val_stream.size() == 9);
    CHECK(split.train_stream.has_labels());
    CHECK(split.val_stream.has_labels());
}

TEST_CASE("dg_split uses floor arithmetic and conserves samples") {
    MixtureSpec spec = two_class_spec();
    spec.samples_per_class = 3;  // 5 is odd; use 6 per domain -> floor(3.0)
    spec.domains = {{0.0, {}, 1.0}, {10.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 19);

    const DgSplit split = dg_split(domains, 0.5, 23);
    CHECK(split.train_stream.size() == 6);  // floor(0.5 * 6) per domain
    CHECK(split.val_stream.size() == 6);

    // Odd domain size: 5 at fraction 0.5 splits 2/3.
    const DomainDataset five("five", 0, Matrix(5, 2),
                             std::vector<int>{0, 1, 0, 1, 0});
    const DomainDataset six("six", 1, Matrix(6, 2),
                            std::vector<int>{0, 1, 0, 1, 0, 1});
    const std::vector<DomainDataset> odd = {five, six};
    const DgSplit odd_split = dg_split(odd, 0.5, 7);
    CHECK(odd_split.train_stream.size() == 5);  // 2 + 3
    CHECK(odd_split.val_stream.size() == 6);    // 3 + 3

    // Sample conservation as a multiset of feature rows.
    std::multiset<std::string> original, recombined;
    auto row_key = [](const Matrix& f, std::size_t i) {
        std::string key;
        for (std::size_t d = 0; d < f.cols(); ++d) {
            const double v = f(i, d);
            key.append(reinterpret_cast<const char*>(&v), sizeof(double));
        }
        return key;
    };
    for (const auto& domain : domains) {
        const Matrix& f = domain.features();
        for (std::size_t i = 0; i < f.rows(); ++i) original.insert(row_key(f, i));
    }
    for (const DomainDataset* stream : {&split.train_stream, &split.val_stream}) {
        const Matrix& f = stream->features();
        for (std::size_t i = 0; i < f.rows(); ++i) recombined.insert(row_key(f, i));
    }
    CHECK(original == recombined);
}

TEST_CASE("dg_split determinism and error cases") {
    MixtureSpec spec = two_class_spec();
    spec.samples_per_class = 10;
    spec.domains = {{0.0, {}, 1.0}, {10.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 29);

    const DgSplit a = dg_split(domains, 0.7, 31);
    const DgSplit b = dg_split(domains, 0.7, 31);
    CHECK(std::memcmp(a.train_stream.features().values().data(),
                      b.train_stream.features().values().data(),
                      a.train_stream.size() * 2 * sizeof(double)) == 0);

    std::vector<DomainDataset> one = {domains[0]};
    CHECK_THROWS_AS(dg_split(one, 0.7, 1), ConfigError);
    CHECK_THROWS_AS(dg_split(domains, 0.0, 1), ConfigError);

    MixtureSpec tiny = two_class_spec();
    tiny.samples_per_class = 2;  // 4 per domain: 0.9 leaves a 1-sample side
    tiny.domains = {{0.0, {}, 1.0}, {10.0, {}, 1.0}};
    const auto tiny_domains = gen_gaussian_domains(tiny, 37);
    CHECK_THROWS_AS(dg_split(tiny_domains, 0.9, 1), DegenerateBatchError);
}

TEST_CASE("subsample_target keeps per-class floor counts") {
    MixtureSpec spec = two_class_spec();
    spec.samples_per_class = 10;
    spec.domains = {{0.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 41);
    const DomainDataset& target = domains[0];

    const DomainDataset full = subsample_target(target, 1.0, 43);
    CHECK(full.size() == target.size());

    const DomainDataset fifth = subsample_target(target, 0.2, 43);
    CHECK(fifth.size() == 4);  // 2 per class
    std::map<int, int> counts;
    for (int y : fifth.labels()) counts[y]++;
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 2);

    // Same counts, independent membership across seeds.
    const DomainDataset half_a = subsample_target(target, 0.5, 1);
    const DomainDataset half_b = subsample_target(target, 0.5, 2);
    CHECK(half_a.size() == half_b.size());

    CHECK_THROWS_AS(subsample_target(target, 0.1, 1), DegenerateBatchError);
    CHECK_THROWS_AS(subsample_target(target, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(subsample_target(target, 1.5, 1), ConfigError);
}

TEST_CASE("paired_batches counts and coverage") {
    const BatchPlan plan{4, 99};

    // Equal streams: two clean pairs.
    CHECK(paired_batches(8, 8, plan, 0).size() == 2);

    // 10 vs 4: three pairs, the short stream cycles.
    const auto pairs = paired_batches(10, 4, plan, 0);
    CHECK(pairs.size() == 3);
    std::vector<std::size_t> a_seen;
    for (const auto& pair : pairs) {
        CHECK(pair.a_rows.size() == pair.b_rows.size());
        CHECK(pair.a_rows.size() >= 2);
        for (std::size_t r : pair.b_rows) CHECK(r < 4);
        a_seen.insert(a_seen.end(), pair.a_rows.begin(), pair.a_rows.end());
    }
    std::vector<std::size_t> expected(10);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    CHECK(as_multiset(a_seen) == as_multiset(expected));

    // Trailing 1-row batch merges: 9 -> [4, 5].
    const auto merged = paired_batches(9, 9, plan, 0);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].a_rows.size() == 4);
    CHECK(merged[1].a_rows.size() == 5);

    CHECK_THROWS_AS(paired_batches(8, 8, BatchPlan{1, 0}, 0), ConfigError);
    CHECK_THROWS_AS(paired_batches(1, 8, plan, 0), DegenerateBatchError);
}

TEST_CASE("paired_batches is deterministic and epoch-varying") {
    const BatchPlan plan{4, 123};
    const auto a = paired_batches(12, 6, plan, 2);
    const auto b = paired_batches(12, 6, plan, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].a_rows == b[i].a_rows);
        CHECK(a[i].b_rows == b[i].b_rows);
    }
    const auto c = paired_batches(12, 6, plan, 3);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].a_rows != c[i].a_rows) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("access counters observe feature and label reads") {
    MixtureSpec spec = two_class_spec();
    spec.samples_per_class = 3;
    spec.domains = {{0.0, {}, 1.0}};
    const auto domains = gen_gaussian_domains(spec, 47);
    const DomainDataset& ds = domains[0];

    CHECK(ds.feature_reads() == 0);
    CHECK(ds.label_reads() == 0);
    ds.features();
    ds.features();
    ds.labels();
    CHECK(ds.feature_reads() == 2);
    CHECK(ds.label_reads() == 1);

    const DomainDataset copy = ds;  // copies start uninstrumented
    CHECK(copy.feature_reads() == 0);
    CHECK(copy.label_reads() == 0);
}
