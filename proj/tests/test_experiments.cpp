#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprs/error.hpp"
#include "sprs/experiments.hpp"
#include "sprs/idx.hpp"
#include "sprs/synth.hpp"

using namespace sprs;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
    fs::remove_all(name);
    return name;
}

std::vector<char> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

nlohmann::json load_report(const std::string& dir) {
    std::ifstream in(dir + "/report.json");
    REQUIRE(bool(in));
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("built-in configs validate and match their documented geometry") {
    const ModelConfig digits = default_digit_config();
    digits.validate();
    CHECK(digits.levels.size() == 1);
    // 17 x 9 sliding 8x8 windows over 24x16 at stride 1.
    CHECK(digits.levels[0].mac_count() == 153);
    CHECK(digits.levels[0].q >= 8);
    CHECK(digits.levels[0].k >= 8);

    const ModelConfig recall = default_recall_config();
    recall.validate();
    CHECK(recall.levels[0].mac_count() == 153);
    CHECK(recall.levels[0].q >= 8);
    CHECK(recall.levels[0].k >= 8);

    const ModelConfig video = default_video_config();
    video.validate();
    REQUIRE(video.levels.size() == 2);
    // top vector length 54 macs * 6 CMs * 6 units = 1,944.
    const LevelConfig& top = video.levels.back();
    CHECK(top.mac_count() * top.q * top.k == 1944);
}

TEST_CASE("fixed-time run keeps op counts exactly constant") {
    RunOptions opt;
    opt.items = 150;  // checkpoints clip to {10, 100}
    opt.timing_reps = 5;
    opt.seed = 9;
    opt.out_dir = fresh_dir("exp_ft_out");

    const FixedTimeResult res = run_fixed_time(opt);
    CHECK(res.ops_constant);
    // retrieve@0 + (store + retrieve) at each of the two checkpoints.
    REQUIRE(res.rows.size() == 5);
    CHECK(res.rows[0].phase == "retrieve");
    CHECK(res.rows[0].stored == 0);

    // ops for Q=8, K=8, nU=256, |active|=32: activations touch all
    // 64 unit rows once and update each unit twice (product pass + CM-max
    // pass); learning's selection updates 2*Q*K and the association reads Q
    // rows and writes Q*|active| slots; retrieval's argmax updates Q*K.
    for (const FixedTimeRow& row : res.rows) {
        if (row.phase == "store") {
            CHECK(row.ops.weight_row_reads == 64 + 8);
            CHECK(row.ops.unit_updates == 64 + 64 + 128);
            CHECK(row.ops.weight_writes == 8 * 32);
        } else {
            CHECK(row.ops.weight_row_reads == 64);
            CHECK(row.ops.unit_updates == 64 + 64 + 64);
            CHECK(row.ops.weight_writes == 0);
        }
    }

    CHECK(line_count(opt.out_dir + "/optime.csv") == 6);  // header + 5 rows
    const auto report = load_report(opt.out_dir);
    CHECK(report["metrics"]["ops_constant"] == true);
    CHECK(report["rows"].size() == 5);

    SUBCASE("zero items is a config error") {
        opt.items = 0;
        CHECK_THROWS_AS(run_fixed_time(opt), ConfigError);
    }
    SUBCASE("active bits must fit the input width") {
        opt.active_bits = 5000;
        CHECK_THROWS_AS(run_fixed_time(opt), ConfigError);
    }
}

TEST_CASE("mnist run on a small synthetic split is consistent and complete") {
    RunOptions opt;
    opt.seed = 4;
    opt.train_per_class = 8;
    opt.test_per_class = 4;
    opt.threads = 2;
    opt.out_dir = fresh_dir("exp_mnist_out");

    const MnistResult res = run_mnist(opt);
    CHECK(res.train_count == 80);
    CHECK(res.test_count == 40);
    REQUIRE(res.predictions.size() == 40);
    REQUIRE(res.per_class_accuracy.size() == 10);

    // Reported accuracy must equal a recount over the prediction log.
    std::uint32_t recount = 0;
    for (const auto& p : res.predictions) recount += p.predicted == p.label;
    CHECK(res.accuracy == doctest::Approx(static_cast<double>(recount) / 40));
    CHECK(res.correct == recount);

    CHECK(line_count(opt.out_dir + "/predictions.csv") == 41);
    CHECK(fs::exists(opt.out_dir + "/class_field.bin"));
    const Model reloaded = load_model(opt.out_dir + "/model.sprs");
    CHECK(reloaded.stats().macs == 153);
    const auto report = load_report(opt.out_dir);
    CHECK(report["metrics"]["accuracy"] == doctest::Approx(res.accuracy));
    CHECK(report["dataset"]["source"] == "synthetic");

    SUBCASE("identical options reproduce identical artifacts across threads") {
        RunOptions again = opt;
        again.threads = 5;
        again.out_dir = fresh_dir("exp_mnist_out2");
        const MnistResult res2 = run_mnist(again);
        CHECK(res2.accuracy == res.accuracy);
        CHECK(file_bytes(again.out_dir + "/predictions.csv") ==
              file_bytes(opt.out_dir + "/predictions.csv"));
        CHECK(file_bytes(again.out_dir + "/model.sprs") ==
              file_bytes(opt.out_dir + "/model.sprs"));
        CHECK(file_bytes(again.out_dir + "/class_field.bin") ==
              file_bytes(opt.out_dir + "/class_field.bin"));
    }
    SUBCASE("a different seed reshuffles the subsets") {
        RunOptions other = opt;
        other.seed = 5;
        other.out_dir = fresh_dir("exp_mnist_out3");
        const MnistResult res2 = run_mnist(other);
        bool same = res2.predictions.size() == res.predictions.size();
        if (same)
            for (std::size_t i = 0; i < res2.predictions.size(); ++i)
                same = same && res2.predictions[i].index == res.predictions[i].index;
        CHECK_FALSE(same);
    }
    SUBCASE("zero counts are config errors") {
        RunOptions bad = opt;
        bad.train_per_class = 0;
        CHECK_THROWS_AS(run_mnist(bad), ConfigError);
    }
    SUBCASE("an images path without labels is a config error") {
        RunOptions bad = opt;
        bad.images_path = "nonexistent.idx";
        CHECK_THROWS_AS(run_mnist(bad), ConfigError);
    }
    SUBCASE("a missing dataset file is a data error") {
        RunOptions bad = opt;
        bad.images_path = "nonexistent.idx";
        bad.labels_path = "also_nonexistent.idx";
        CHECK_THROWS_AS(run_mnist(bad), DataError);
    }
}

TEST_CASE("sanity run replays stored digits with bounded match scores") {
    RunOptions opt;
    opt.seed = 4;
    opt.store_per_class = 5;
    opt.threads = 2;
    opt.out_dir = fresh_dir("exp_sanity_out");

    const SanityResult res = run_sanity(opt);
    CHECK(res.item_count == 50);
    REQUIRE(res.replays.size() == 50);
    double sum = 0.0;
    std::uint32_t exact = 0;
    for (const auto& r : res.replays) {
        CHECK(r.match >= 0.0);
        CHECK(r.match <= 1.0);
        sum += r.match;
        exact += r.match == 1.0;
    }
    CHECK(res.mean_match == doctest::Approx(sum / 50));
    CHECK(res.exact_recall_rate == doctest::Approx(exact / 50.0));
    // 5/class is far under capacity; replay should be near-perfect.
    CHECK(res.mean_match > 0.9);
    CHECK(line_count(opt.out_dir + "/predictions.csv") == 51);
}

TEST_CASE("video run evaluates leave-one-actor-out on collected vectors") {
    RunOptions opt;
    opt.seed = 4;
    opt.variants = 1;  // halve the corpus to keep the test quick
    opt.threads = 2;
    opt.out_dir = fresh_dir("exp_video_out");

    const VideoResult res = run_video(opt);
    CHECK(res.originals == 90);
    CHECK(res.presentations == 180);
    CHECK(res.vector_length == 1944);
    REQUIRE(res.vectors.size() == 180);
    for (const auto& v : res.vectors) CHECK(v.size() == 1944);
    CHECK(res.loo.total == 90);
    CHECK(res.loo.folds.size() == 9);
    CHECK(res.loo.accuracy == doctest::Approx(static_cast<double>(res.loo.correct) / 90));

    CHECK(line_count(opt.out_dir + "/vectors.csv") == 180);
    CHECK(line_count(opt.out_dir + "/predictions.csv") == 91);
    CHECK(line_count(opt.out_dir + "/folds.csv") == 11);  // header + 9 + overall
    CHECK(fs::exists(opt.out_dir + "/model.sprs"));
    const auto report = load_report(opt.out_dir);
    CHECK(report["metrics"]["vector_length"] == 1944);

    SUBCASE("export-only variant writes vectors without evaluating") {
        RunOptions exp_opt = opt;
        exp_opt.out_dir = fresh_dir("exp_export_out");
        const VideoResult exported = run_export_vectors(exp_opt);
        CHECK(exported.loo.total == 0);
        CHECK(exported.vectors == res.vectors);
        CHECK(fs::exists(exp_opt.out_dir + "/vectors.jsonl"));
        CHECK_FALSE(fs::exists(exp_opt.out_dir + "/model.sprs"));
        std::ifstream in(exp_opt.out_dir + "/vectors.jsonl");
        const auto [vectors, meta] = import_vectors_jsonl(in);
        CHECK(vectors == res.vectors);
        REQUIRE(meta.size() == res.meta.size());
        for (std::size_t i = 0; i < meta.size(); ++i) {
            CHECK(meta[i].label == res.meta[i].label);
            CHECK(meta[i].actor == res.meta[i].actor);
        }
    }
}

TEST_CASE("generated datasets land on disk and read back") {
    SUBCASE("digits") {
        const std::string dir = fresh_dir("exp_gen_digits");
        gen_synth_digits(3, 11, dir);
        const auto images = read_idx_images(dir + "/images.idx");
        const auto labels = read_idx_labels(dir + "/labels.idx");
        REQUIRE(images.size() == 30);
        REQUIRE(labels.size() == 30);
        std::vector<std::uint32_t> per_class(10, 0);
        for (std::uint8_t l : labels) ++per_class.at(l);
        for (std::uint32_t n : per_class) CHECK(n == 3);

        const std::string dir2 = fresh_dir("exp_gen_digits2");
        gen_synth_digits(3, 11, dir2);
        CHECK(file_bytes(dir + "/images.idx") == file_bytes(dir2 + "/images.idx"));
    }
    SUBCASE("video snippets round-trip through a run") {
        const std::string dir = fresh_dir("exp_gen_video");
        SynthVideoParams params;
        params.classes = 3;
        params.actors = 4;
        gen_synth_video(params, 11, dir);
        const auto snippets = read_snippets(dir + "/snippets");
        CHECK(snippets.size() == 12);

        RunOptions opt;
        opt.seed = 4;
        opt.snippets_dir = dir + "/snippets";
        opt.variants = 1;
        opt.out_dir = fresh_dir("exp_video_disk_out");
        const VideoResult res = run_video(opt);
        CHECK(res.originals == 12);
        CHECK(res.loo.total == 12);  // 4 folds, 3 held-out originals each
    }
}
