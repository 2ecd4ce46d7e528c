// Command-line front end: dataset generation, training/testing runs, the
// replay sanity check, and the fixed-time benchmark.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 run-level
// assertion failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sprs/error.hpp"
#include "sprs/experiments.hpp"
#include "sprs/synth.hpp"

namespace {

void add_common(CLI::App* sub, sprs::RunOptions& opt) {
    sub->add_option("--config", opt.config_path, "Model config JSON (default: built-in)");
    sub->add_option("--seed", opt.seed, "Run seed")->capture_default_str();
    sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--threads", opt.threads, "Worker threads for preprocessing and testing")
        ->capture_default_str();
}

void add_digit_inputs(CLI::App* sub, sprs::RunOptions& opt) {
    sub->add_option("--images", opt.images_path, "IDX image stack (default: synthesize)");
    sub->add_option("--labels", opt.labels_path, "IDX label file");
}

int run(int argc, char** argv) {
    CLI::App app{"Sparse distributed memory benchmarks"};
    app.require_subcommand(1);

    sprs::RunOptions opt;
    std::string kind;
    std::uint32_t per_class = 350;
    sprs::SynthVideoParams video_params;

    CLI::App* mnist = app.add_subcommand(
        "mnist", "Single-trial supervised digit run: learn train set, classify test set");
    add_common(mnist, opt);
    add_digit_inputs(mnist, opt);
    mnist->add_option("--train-per-class", opt.train_per_class, "Training digits per class")
        ->capture_default_str();
    mnist->add_option("--test-per-class", opt.test_per_class, "Test digits per class")
        ->capture_default_str();
    mnist->callback([&] {
        const sprs::MnistResult r = sprs::run_mnist(opt);
        std::printf("accuracy %.4f (%u/%u), no-evidence %u, train %.1f s, test %.1f s -> %s\n",
                    r.accuracy, r.correct, r.test_count, r.no_evidence, r.train_seconds,
                    r.test_seconds, opt.out_dir.c_str());
    });

    CLI::App* video = app.add_subcommand(
        "video", "Unsupervised snippet run: learn corpus, leave-one-actor-out evaluation");
    add_common(video, opt);
    video->add_option("--snippets", opt.snippets_dir, "Snippet corpus dir (default: synthesize)");
    video->add_option("--variants", opt.variants, "Noisy copies per original")
        ->capture_default_str();
    video->add_option("--noise", opt.noise_fraction, "Moved-pixel fraction per noisy copy")
        ->capture_default_str();
    video->callback([&] {
        const sprs::VideoResult r = sprs::run_video(opt);
        std::printf("loo accuracy %.4f (%u/%u), vectors %u x %u, train %.1f s -> %s\n",
                    r.loo.accuracy, r.loo.correct, r.loo.total, r.presentations, r.vector_length,
                    r.train_seconds, opt.out_dir.c_str());
    });

    CLI::App* sanity = app.add_subcommand(
        "sanity", "Store a digit set once, replay it in retrieval mode, score the match");
    add_common(sanity, opt);
    add_digit_inputs(sanity, opt);
    sanity->add_option("--store-per-class", opt.store_per_class, "Digits stored per class")
        ->capture_default_str();
    sanity->callback([&] {
        const sprs::SanityResult r = sprs::run_sanity(opt);
        std::printf("mean recognition match %.4f, exact recall %.4f over %u items -> %s\n",
                    r.mean_match, r.exact_recall_rate, r.item_count, opt.out_dir.c_str());
    });

    CLI::App* fixed = app.add_subcommand(
        "fixed-time", "Store a stream into one mac and sample op counts at checkpoints");
    add_common(fixed, opt);
    fixed->add_option("--items", opt.items, "Items stored")->capture_default_str();
    fixed->add_option("--active-bits", opt.active_bits, "Active inputs per item")
        ->capture_default_str();
    fixed->add_option("--reps", opt.timing_reps, "Reps behind each median timing")
        ->capture_default_str();
    fixed->callback([&] {
        const sprs::FixedTimeResult r = sprs::run_fixed_time(opt);
        std::printf("ops constant: %s, store ratio %.3f, retrieve ratio %.3f -> %s\n",
                    r.ops_constant ? "yes" : "no", r.store_time_ratio, r.retrieve_time_ratio,
                    opt.out_dir.c_str());
    });

    CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset on disk");
    gen->add_option("--kind", kind, "digits | video")->required();
    gen->add_option("--seed", opt.seed, "Generation seed")->capture_default_str();
    gen->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    gen->add_option("--per-class", per_class, "Digits per class (kind=digits)")
        ->capture_default_str();
    gen->add_option("--classes", video_params.classes, "Classes (kind=video)")
        ->capture_default_str();
    gen->add_option("--actors", video_params.actors, "Actors per class (kind=video)")
        ->capture_default_str();
    gen->add_option("--frames", video_params.frames, "Frames per snippet (kind=video)")
        ->capture_default_str();
    gen->callback([&] {
        if (kind == "digits") {
            sprs::gen_synth_digits(per_class, opt.seed, opt.out_dir);
            std::printf("wrote %u digits per class -> %s\n", per_class, opt.out_dir.c_str());
        } else if (kind == "video") {
            sprs::gen_synth_video(video_params, opt.seed, opt.out_dir);
            std::printf("wrote %u snippets -> %s/snippets\n",
                        video_params.classes * video_params.actors, opt.out_dir.c_str());
        } else {
            throw sprs::ConfigError("unknown dataset kind: " + kind);
        }
    });

    CLI::App* exp = app.add_subcommand(
        "export-vectors", "Learn a snippet corpus and export its code vectors");
    add_common(exp, opt);
    exp->add_option("--snippets", opt.snippets_dir, "Snippet corpus dir (default: synthesize)");
    exp->add_option("--variants", opt.variants, "Noisy copies per original")
        ->capture_default_str();
    exp->add_option("--noise", opt.noise_fraction, "Moved-pixel fraction per noisy copy")
        ->capture_default_str();
    exp->callback([&] {
        const sprs::VideoResult r = sprs::run_export_vectors(opt);
        std::printf("wrote %u vectors of length %u -> %s\n", r.presentations, r.vector_length,
                    opt.out_dir.c_str());
    });

    CLI::App* dump = app.add_subcommand("dump-config", "Print a built-in model config as JSON");
    dump->add_option("--kind", kind, "digits | recall | video")->required();
    dump->callback([&] {
        if (kind == "digits")
            std::cout << sprs::model_config_to_json(sprs::default_digit_config());
        else if (kind == "recall")
            std::cout << sprs::model_config_to_json(sprs::default_recall_config());
        else if (kind == "video")
            std::cout << sprs::model_config_to_json(sprs::default_video_config());
        else
            throw sprs::ConfigError("unknown config kind: " + kind);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const sprs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const sprs::ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const sprs::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const sprs::EmptyInputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const sprs::AssertionFailure& e) {
        std::cerr << "assertion failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
