#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprs/classify.hpp"
#include "sprs/mac.hpp"
#include "sprs/model.hpp"
#include "sprs/synth.hpp"

namespace sprs {

// A run-level assertion failed (fixed-time op drift, geometry contract, ...).
// The CLI maps this to exit code 3.
struct AssertionFailure : std::runtime_error {
    explicit AssertionFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// Everything an experiment run needs. Paths left empty fall back to the
// built-in synthetic generators / built-in model configs, keeping every verb
// runnable out of the box; explicit paths override.
struct RunOptions {
    std::string config_path;              // model config JSON; "" = built-in default
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::uint32_t threads = 1;

    // digit runs
    std::string images_path;              // IDX u8 image stack; "" = synthesize
    std::string labels_path;              // IDX u8 labels
    std::uint32_t train_per_class = 200;
    std::uint32_t test_per_class = 100;
    std::uint32_t store_per_class = 50;   // sanity: items stored per class

    // video runs
    std::string snippets_dir;             // "" = synthesize the default corpus
    std::uint32_t variants = 5;           // noisy copies per original
    double noise_fraction = 0.2;

    // fixed-time run
    std::uint32_t items = 10000;          // stores driven into the single mac
    std::uint32_t active_bits = 32;       // fixed |active| per random input
    std::uint32_t timing_reps = 64;       // reps behind each median timing
};

// Built-in model configs (also available via the `dump-config` CLI verb and
// shipped under configs/). The digit config is tuned for single-trial
// classification, the recall config for exact episodic replay; the two
// objectives want opposite expansivity schedules, so each experiment
// defaults to its own.
ModelConfig default_digit_config();
ModelConfig default_recall_config();
ModelConfig default_video_config();

// --- mnist ---------------------------------------------------------------

struct MnistResult {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::uint32_t threads = 0;
    std::uint32_t train_count = 0;
    std::uint32_t test_count = 0;
    std::uint32_t train_empty = 0;   // train digits blank after preprocessing
    std::uint32_t no_evidence = 0;   // test digits that lit no class row
    std::uint32_t correct = 0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;  // indexed by label
    double train_seconds = 0.0;
    double test_seconds = 0.0;
    ModelStats stats;
    std::uint64_t stored_events = 0;  // sum of per-mac stored counts
    std::uint64_t weights_set = 0;    // set bits across all weight matrices

    struct Prediction {
        std::uint32_t index = 0;  // position in the source dataset
        std::uint32_t label = 0;
        std::uint32_t predicted = 0;
        bool no_evidence = false;
    };
    std::vector<Prediction> predictions;  // test items, class-major order
};

// Single learning pass over train_per_class digits per class (one trial per
// sample, class-field supervision on the top-level code), then retrieval-mode
// classification of test_per_class held-out digits per class. Writes
// report.json, predictions.csv, model.sprs, and class_field.bin to out_dir.
MnistResult run_mnist(const RunOptions& opt);

// --- video ---------------------------------------------------------------

struct VideoResult {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::uint32_t originals = 0;
    std::uint32_t presentations = 0;   // originals * (1 + variants)
    std::uint32_t vector_length = 0;   // top-level mac count * Q * K
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    ModelStats stats;
    std::uint64_t stored_events = 0;
    std::uint64_t weights_set = 0;
    LooResult loo;
    std::vector<VectorMeta> meta;                    // per presentation
    std::vector<std::vector<std::uint8_t>> vectors;  // per presentation
};

// Unsupervised single pass over the augmented snippet corpus, collecting one
// top-level code vector per presentation, then leave-one-actor-out linear
// evaluation. Writes report.json, predictions.csv, folds.csv, vectors.csv,
// vectors.jsonl, and model.sprs to out_dir.
VideoResult run_video(const RunOptions& opt);

// Same pipeline as run_video, stopped after vector collection: writes
// vectors.csv, vectors.jsonl, and report.json only.
VideoResult run_export_vectors(const RunOptions& opt);

// --- sanity --------------------------------------------------------------

struct SanityResult {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::uint32_t item_count = 0;
    double mean_match = 0.0;        // mean recognition_match, replay vs learn
    double exact_recall_rate = 0.0; // fraction of items with match == 1.0
    double store_seconds = 0.0;
    double replay_seconds = 0.0;
    ModelStats stats;
    std::uint64_t stored_events = 0;
    std::uint64_t weights_set = 0;

    struct Replay {
        std::uint32_t index = 0;
        std::uint32_t label = 0;
        double match = 0.0;
    };
    std::vector<Replay> replays;
};

// Stores store_per_class digits per class once each, then replays every
// stored item in retrieval mode and scores recognition_match against its
// learning trace. Writes report.json, predictions.csv, and model.sprs.
SanityResult run_sanity(const RunOptions& opt);

// --- fixed-time ----------------------------------------------------------

struct FixedTimeRow {
    std::uint64_t stored = 0;       // items in the mac when sampled
    std::string phase;              // "store" | "retrieve"
    OpCounters ops;
    std::uint64_t median_ns = 0;
};

struct FixedTimeResult {
    MacConfig mac;
    std::uint64_t seed = 0;
    std::uint32_t items = 0;
    std::uint32_t active_bits = 0;
    std::vector<FixedTimeRow> rows;   // retrieve@0, then store/retrieve per checkpoint
    bool ops_constant = false;        // per-phase exact op equality
    double store_time_ratio = 0.0;    // last/first checkpoint median
    double retrieve_time_ratio = 0.0;
};

// Drives `items` random fixed-density inputs into one mac, sampling op counts
// and median wall time per store and per retrieve at checkpoints
// {10, 100, 1000, 10000} (clipped to `items`), plus a retrieve at zero items
// stored. Throws AssertionFailure if any phase's op counts drift. Writes
// optime.csv and report.json.
FixedTimeResult run_fixed_time(const RunOptions& opt);

// --- synthetic data generation -------------------------------------------

// Balanced digit IDX pair (images.idx, labels.idx) under out_dir.
void gen_synth_digits(std::uint32_t per_class, std::uint64_t seed, const std::string& out_dir);

// Snippet corpus under out_dir/snippets plus a manifest report.json.
void gen_synth_video(const SynthVideoParams& params, std::uint64_t seed,
                     const std::string& out_dir);

}  // namespace sprs
