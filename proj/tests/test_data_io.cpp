#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "spot/data_io.hpp"
#include "spot/errors.hpp"

using namespace spot;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() /
              ("spot_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(dir);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("make_benchmark shape, balance and seeded determinism") {
    BenchmarkSpec spec;
    spec.n_classes = 5;
    spec.samples_per_class = 7;
    spec.feature_dim = 6;
    spec.d_attr = 4;
    spec.seed = 42;
    const GzslDataset a = make_benchmark(spec);
    const GzslDataset b = make_benchmark(spec);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.size() == 35);

    std::vector<int> counts(5, 0);
    for (int l : a.labels) counts[static_cast<std::size_t>(l)] += 1;
    for (int c : counts) CHECK(c == 7);
    for (const auto& attr : a.attributes) validate_attribute(attr);
}

TEST_CASE("zero intra-class noise collapses every sample onto its class mean") {
    BenchmarkSpec spec;
    spec.n_classes = 4;
    spec.samples_per_class = 3;
    spec.feature_dim = 5;
    spec.d_attr = 4;
    spec.intra_class_noise = 0.0;
    const GzslDataset ds = make_benchmark(spec);
    for (std::size_t c = 0; c < 4; ++c) {
        const Matrix center = project_attribute(ds.attributes[c], ds.projection);
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t j = 0; j < 5; ++j)
                CHECK(ds.features(c * 3 + s, j) == center(0, j));
    }
}

TEST_CASE("well-separated benchmark supports a near-perfect linear classifier") {
    BenchmarkSpec spec;
    spec.n_classes = 6;
    spec.samples_per_class = 40;
    spec.feature_dim = 12;
    spec.d_attr = 6;
    spec.intra_class_noise = 0.1;
    spec.inter_class_separation = 3.0;
    spec.seed = 21;
    const GzslDataset ds = make_benchmark(spec);

    // Even/odd split into train and held-out halves.
    std::vector<std::size_t> train_idx, eval_idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (i % 2 == 0 ? train_idx : eval_idx).push_back(i);
    Rng rng(3);
    const TrainReport report = train_classifier(
        gather_rows(ds.features, train_idx), gather_labels(ds.labels, train_idx),
        gather_rows(ds.features, eval_idx), gather_labels(ds.labels, eval_idx), 60, 0.3, rng);
    CHECK(report.per_epoch_val_acc.back() > 0.95);
}

TEST_CASE("make_benchmark rejects invalid specs") {
    BenchmarkSpec spec;
    spec.n_classes = 1;
    CHECK_THROWS_AS(make_benchmark(spec), ConfigError);
    spec.n_classes = 4;
    spec.feature_dim = 2;
    spec.d_attr = 8;
    CHECK_THROWS_AS(make_benchmark(spec), ConfigError);
}

TEST_CASE("dataset round-trips bitwise through save and load") {
    TempDir tmp;
    BenchmarkSpec spec;
    spec.n_classes = 4;
    spec.samples_per_class = 5;
    spec.feature_dim = 7;
    spec.d_attr = 4;
    spec.seed = 9;
    const GzslDataset ds = make_benchmark(spec);
    const std::string path = tmp.path("data.tsv");
    save_dataset(ds, path);
    const GzslDataset back = load_dataset(path);
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.projection == ds.projection);
    REQUIRE(back.attributes.size() == ds.attributes.size());
    for (std::size_t c = 0; c < ds.attributes.size(); ++c) {
        CHECK(back.attributes[c].class_id == ds.attributes[c].class_id);
        CHECK(back.attributes[c].attributes == ds.attributes[c].attributes);
    }
}

TEST_CASE("dataset loader reports malformed input with line numbers") {
    TempDir tmp;
    const std::string path = tmp.path("broken.tsv");

    SUBCASE("wrong column count names the line") {
        std::ofstream out(path);
        out << "label\tf0\tf1\n";
        out << "0\t1.0\t2.0\n";
        out << "1\t3.0\n";  // short row
        out.close();
        CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("line 3"), ParseError);
    }
    SUBCASE("empty file is a parse error, not an empty dataset") {
        std::ofstream out(path);
        out.close();
        CHECK_THROWS_AS(load_dataset(path), ParseError);
    }
    SUBCASE("missing companion file is an input problem") {
        std::ofstream out(path);
        out << "label\tf0\n0\t1.0\n";
        out.close();
        CHECK_THROWS_AS(load_dataset(path), IoError);
    }
}

TEST_CASE("checkpoint round-trips bitwise") {
    TempDir tmp;
    Rng rng(3);
    Checkpoint ckpt;
    ckpt.selector_cfg.feature_dim = 5;
    ckpt.selector_cfg.d_model = 8;
    ckpt.selector_cfg.layers = 2;
    ckpt.selector_cfg.heads = 2;
    ckpt.selector_cfg.ff_hidden = 6;
    ckpt.selector_params.add("w", Matrix::uniform(5, 8, -1.0, 1.0, rng));
    ckpt.selector_params.add("b", Matrix::uniform(1, 8, -1.0, 1.0, rng));
    ckpt.alpha = 0.5;
    ckpt.ema_state = {0.5, 0.625, 0.69};
    ckpt.episodes_done = 3;
    ckpt.best_q_hat = 0.69;
    ckpt.stale_count = 1;
    ckpt.rng_state = Rng(77).serialize();
    ckpt.config_snapshot = "run.seed = 7\ntrain.max_episodes = 12\n";
    ckpt.has_classifier = true;
    ckpt.classifier.weight = Matrix::uniform(5, 3, -1.0, 1.0, rng);
    ckpt.classifier.bias = Matrix::uniform(1, 3, -1.0, 1.0, rng);
    ckpt.classifier.class_list = {2, 4, 9};

    const std::string path = tmp.path("run.ckpt");
    save_checkpoint(ckpt, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.format_version == kCheckpointVersion);
    CHECK(back.selector_params == ckpt.selector_params);
    CHECK(back.ema_state == ckpt.ema_state);
    CHECK(back.episodes_done == 3);
    CHECK(back.best_q_hat == ckpt.best_q_hat);
    CHECK(back.stale_count == 1);
    CHECK(back.rng_state == ckpt.rng_state);
    CHECK(back.config_snapshot == ckpt.config_snapshot);
    CHECK(back.has_classifier);
    CHECK(back.classifier == ckpt.classifier);

    // The restored rng continues exactly where the saved one would.
    Rng restored = Rng::deserialize(back.rng_state);
    Rng original(77);
    for (int i = 0; i < 10; ++i) CHECK(restored.next_u64() == original.next_u64());
}

TEST_CASE("checkpoint rejects future versions and corrupt payloads") {
    TempDir tmp;
    Checkpoint ckpt;
    ckpt.selector_params.add("w", Matrix(2, 2, 1.0));
    ckpt.rng_state = Rng(1).serialize();
    const std::string path = tmp.path("v.ckpt");

    SUBCASE("version bump is rejected") {
        ckpt.format_version = kCheckpointVersion + 1;
        save_checkpoint(ckpt, path);
        CHECK_THROWS_AS(load_checkpoint(path), VersionError);
    }
    SUBCASE("flipped payload byte fails the integrity check") {
        save_checkpoint(ckpt, path);
        std::ifstream in(path);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        in.close();
        content[content.size() - 2] = content[content.size() - 2] == '0' ? '1' : '0';
        std::ofstream out(path);
        out << content;
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), IntegrityError);
    }
}

TEST_CASE("report table renders S/U/H and flags inconsistent harmonic means") {
    MetricRow good{"WGAN", {{"S", 43.7}, {"U", 57.7}, {"H", 49.7}}, 1, "abc"};
    MetricRow bad{"broken", {{"S", 50.0}, {"U", 50.0}, {"H", 10.0}}, 1, "abc"};
    const std::string table = format_table({good, bad});
    CHECK(table.find("WGAN") != std::string::npos);
    CHECK(table.find("49.70") != std::string::npos);
    CHECK(table.find("10.00 !") != std::string::npos);
    CHECK(table.find("49.70 !") == std::string::npos);

    const std::string empty = format_table({});
    CHECK(empty.find("Model") != std::string::npos);
}

TEST_CASE("records round-trip through the parser") {
    TempDir tmp;
    std::vector<MetricRow> rows;
    rows.push_back({"SPOT", {{"S", 61.25}, {"U", 48.5}, {"H", 54.134}}, 11, "deadbeef"});
    rows.push_back({"baseline", {{"ZSL", 37.5}, {"ZSL_std", 1.25}}, 12, "deadbeef"});
    const std::string path = tmp.path("metrics.jsonl");
    write_report(rows, path, ReportFormat::records);
    const std::vector<MetricRow> back = parse_records(path);
    CHECK(back == rows);
}

TEST_CASE("unwritable report path raises an I/O error") {
    const std::vector<MetricRow> rows{{"m", {{"S", 1.0}}, 1, "x"}};
    CHECK_THROWS_AS(write_report(rows, "/nonexistent_dir_zz/report.txt", ReportFormat::table),
                    IoError);
}

TEST_CASE("format_double survives a round trip at full precision") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double x = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-12.0, 12.0));
        const double y = std::stod(format_double(x));
        CHECK(y == x);
    }
}
