#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sprs/bitmatrix.hpp"
#include "sprs/rng.hpp"

namespace sprs {

// Localist class readout: one binary row per class over all top-level units.
// Training unions the active unit set into the label's row; classification
// sums row hits and takes the argmax (ties -> lowest class index).
class ClassField {
  public:
    ClassField(std::uint32_t classes, std::uint32_t units);

    std::uint32_t classes() const { return classes_; }
    std::uint32_t units() const { return units_; }
    const BitMatrix& weights() const { return weights_; }

    // Returns the number of 0 -> 1 transitions (idempotent on repeats).
    std::uint32_t train(const std::vector<std::uint32_t>& active_units, std::uint32_t label);

    struct Decision {
        std::uint32_t label = 0;
        bool no_evidence = false;          // every class summed to zero
        std::vector<std::uint32_t> scores;  // per-class sums
    };
    Decision classify(const std::vector<std::uint32_t>& active_units) const;

  private:
    std::uint32_t classes_;
    std::uint32_t units_;
    BitMatrix weights_;
};

struct LinearHyperparams {
    std::uint32_t epochs = 50;
    double step = 0.1;      // learning rate eta_t = step / sqrt(t)
    double reg = 1e-4;      // L2 coefficient (bias unregularized)
    std::uint64_t seed = 0;  // shuffling seed
};

// One-vs-rest linear hinge-loss models over binary vectors.
struct LinearModel {
    std::uint32_t classes = 0;
    std::uint32_t dim = 0;
    std::vector<double> weights;  // classes x dim, row-major
    std::vector<double> bias;     // per class

    double score(std::uint32_t cls, const std::vector<std::uint8_t>& x) const;
    std::uint32_t predict(const std::vector<std::uint8_t>& x) const;  // ties -> lowest
};

// Deterministic SGD on the hinge loss, one model per class present. Label
// space is 0..max(labels); errors unless >= 2 distinct labels occur.
LinearModel train_linear(const std::vector<std::vector<std::uint8_t>>& vectors,
                         const std::vector<std::uint32_t>& labels,
                         const LinearHyperparams& hp = {});

// Leave-one-actor-out fold: train on every other actor's originals and noisy
// variants, test on the held-out actor's originals.
struct FoldSpec {
    std::uint32_t held_out_actor = 0;
    std::vector<std::uint32_t> train;  // indices into the dataset
    std::vector<std::uint32_t> test;
};

struct VectorMeta {
    std::uint32_t label = 0;
    std::uint32_t actor = 0;
    std::uint32_t variant = 0;  // 0 = original
};

std::vector<FoldSpec> make_loo_folds(const std::vector<VectorMeta>& meta);

struct FoldResult {
    std::uint32_t actor = 0;
    std::uint32_t correct = 0;
    std::uint32_t total = 0;
};

struct LooResult {
    std::vector<FoldResult> folds;
    std::vector<std::uint32_t> test_indices;    // dataset index per prediction
    std::vector<std::uint32_t> predictions;     // parallel to test_indices
    std::uint32_t correct = 0;
    std::uint32_t total = 0;
    double accuracy = 0.0;
};

LooResult loo_evaluate(const std::vector<std::vector<std::uint8_t>>& vectors,
                       const std::vector<VectorMeta>& meta, const LinearHyperparams& hp = {});

// CSV rows: actor, correct, total, accuracy.
void write_fold_report(const LooResult& result, std::ostream& out);

// Dense CSV: label, actor, then one 0/1 column per dimension.
void export_vectors_csv(const std::vector<std::vector<std::uint8_t>>& vectors,
                        const std::vector<VectorMeta>& meta, std::ostream& out);
// Sparse JSONL: {"label":..,"actor":..,"variant":..,"dim":D,"on":[indices]}.
void export_vectors_jsonl(const std::vector<std::vector<std::uint8_t>>& vectors,
                          const std::vector<VectorMeta>& meta, std::ostream& out);
std::pair<std::vector<std::vector<std::uint8_t>>, std::vector<VectorMeta>>
import_vectors_jsonl(std::istream& in);

}  // namespace sprs
