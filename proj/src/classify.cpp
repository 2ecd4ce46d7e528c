#include "sprs/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "sprs/error.hpp"

namespace sprs {

ClassField::ClassField(std::uint32_t classes, std::uint32_t units)
    : classes_(classes), units_(units), weights_(classes, units) {
    if (classes == 0) throw ConfigError("class field: class count must be positive");
    if (units == 0) throw ConfigError("class field: unit count must be positive");
}

std::uint32_t ClassField::train(const std::vector<std::uint32_t>& active_units,
                                std::uint32_t label) {
    if (label >= classes_)
        throw ConfigError("class field: label out of range: " + std::to_string(label));
    std::uint32_t fresh = 0;
    for (std::uint32_t u : active_units) {
        if (u >= units_) throw ShapeError("class field: unit index out of range");
        fresh += weights_.set(label, u) ? 1 : 0;
    }
    return fresh;
}

ClassField::Decision ClassField::classify(const std::vector<std::uint32_t>& active_units) const {
    for (std::uint32_t u : active_units)
        if (u >= units_) throw ShapeError("class field: unit index out of range");
    Decision d;
    d.scores.resize(classes_, 0);
    for (std::uint32_t c = 0; c < classes_; ++c)
        d.scores[c] = weights_.count_matches(c, active_units);
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < classes_; ++c)
        if (d.scores[c] > d.scores[best]) best = c;
    d.label = best;
    d.no_evidence = d.scores[best] == 0;
    if (d.no_evidence) d.label = 0;
    return d;
}

double LinearModel::score(std::uint32_t cls, const std::vector<std::uint8_t>& x) const {
    const double* w = weights.data() + static_cast<std::size_t>(cls) * dim;
    double s = bias[cls];
    for (std::uint32_t i = 0; i < dim; ++i)
        if (x[i]) s += w[i];
    return s;
}

std::uint32_t LinearModel::predict(const std::vector<std::uint8_t>& x) const {
    if (x.size() != dim) throw ShapeError("linear model: wrong vector dimension");
    std::uint32_t best = 0;
    double best_score = score(0, x);
    for (std::uint32_t c = 1; c < classes; ++c) {
        const double s = score(c, x);
        if (s > best_score) {
            best = c;
            best_score = s;
        }
    }
    return best;
}

LinearModel train_linear(const std::vector<std::vector<std::uint8_t>>& vectors,
                         const std::vector<std::uint32_t>& labels,
                         const LinearHyperparams& hp) {
    if (vectors.empty()) throw EmptyInputError("train_linear: no vectors");
    if (vectors.size() != labels.size())
        throw ShapeError("train_linear: vectors and labels differ in length");
    const auto dim = static_cast<std::uint32_t>(vectors[0].size());
    if (dim == 0) throw ShapeError("train_linear: zero-dimensional vectors");
    for (const auto& v : vectors)
        if (v.size() != dim) throw ShapeError("train_linear: vectors differ in dimension");
    const std::set<std::uint32_t> present(labels.begin(), labels.end());
    if (present.size() < 2) throw ConfigError("train_linear: need at least 2 classes");
    if (hp.epochs == 0) throw ConfigError("train_linear: epochs must be positive");

    LinearModel model;
    model.classes = *present.rbegin() + 1;
    model.dim = dim;
    model.weights.assign(static_cast<std::size_t>(model.classes) * dim, 0.0);
    model.bias.assign(model.classes, 0.0);

    const auto n = static_cast<std::uint32_t>(vectors.size());
    for (std::uint32_t cls = 0; cls < model.classes; ++cls) {
        double* w = model.weights.data() + static_cast<std::size_t>(cls) * dim;
        double& b = model.bias[cls];
        Rng rng = Rng(hp.seed).derive({0x5047u, cls});
        std::vector<std::uint32_t> order(n);
        for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
        std::uint64_t t = 0;
        for (std::uint32_t epoch = 0; epoch < hp.epochs; ++epoch) {
            for (std::uint32_t i = n - 1; i > 0; --i)
                std::swap(order[i], order[rng.below(i + 1)]);
            for (std::uint32_t idx : order) {
                const std::vector<std::uint8_t>& x = vectors[idx];
                const double y = labels[idx] == cls ? 1.0 : -1.0;
                const double eta = hp.step / std::sqrt(static_cast<double>(++t));
                double margin = b;
                for (std::uint32_t d = 0; d < dim; ++d)
                    if (x[d]) margin += w[d];
                margin *= y;
                const double shrink = 1.0 - eta * hp.reg;
                for (std::uint32_t d = 0; d < dim; ++d) w[d] *= shrink;
                if (margin < 1.0) {
                    for (std::uint32_t d = 0; d < dim; ++d)
                        if (x[d]) w[d] += eta * y;
                    b += eta * y;
                }
            }
        }
    }
    return model;
}

std::vector<FoldSpec> make_loo_folds(const std::vector<VectorMeta>& meta) {
    if (meta.empty()) throw EmptyInputError("loo: no snippets");
    std::set<std::uint32_t> actors;
    for (const VectorMeta& m : meta) actors.insert(m.actor);
    if (actors.size() < 2) throw ConfigError("loo: need at least 2 actors to hold one out");

    std::vector<FoldSpec> folds;
    for (std::uint32_t actor : actors) {
        FoldSpec fold;
        fold.held_out_actor = actor;
        for (std::uint32_t i = 0; i < meta.size(); ++i) {
            if (meta[i].actor == actor) {
                if (meta[i].variant == 0) fold.test.push_back(i);
            } else {
                fold.train.push_back(i);
            }
        }
        if (fold.test.empty())
            throw ConfigError("loo: actor " + std::to_string(actor) + " has no original snippets");
        folds.push_back(std::move(fold));
    }
    return folds;
}

LooResult loo_evaluate(const std::vector<std::vector<std::uint8_t>>& vectors,
                       const std::vector<VectorMeta>& meta, const LinearHyperparams& hp) {
    if (vectors.size() != meta.size())
        throw ShapeError("loo: vectors and metadata differ in length");
    const std::vector<FoldSpec> folds = make_loo_folds(meta);

    LooResult result;
    for (const FoldSpec& fold : folds) {
        std::vector<std::vector<std::uint8_t>> train_vecs;
        std::vector<std::uint32_t> train_labels;
        train_vecs.reserve(fold.train.size());
        for (std::uint32_t i : fold.train) {
            train_vecs.push_back(vectors[i]);
            train_labels.push_back(meta[i].label);
        }
        const LinearModel model = train_linear(train_vecs, train_labels, hp);

        FoldResult fr;
        fr.actor = fold.held_out_actor;
        for (std::uint32_t i : fold.test) {
            const std::uint32_t pred = model.predict(vectors[i]);
            result.test_indices.push_back(i);
            result.predictions.push_back(pred);
            fr.total += 1;
            fr.correct += pred == meta[i].label ? 1 : 0;
        }
        result.correct += fr.correct;
        result.total += fr.total;
        result.folds.push_back(fr);
    }
    result.accuracy = result.total == 0 ? 0.0
                                        : static_cast<double>(result.correct) / result.total;
    return result;
}

namespace {

std::string format_fraction(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_fold_report(const LooResult& result, std::ostream& out) {
    out << "actor,correct,total,accuracy\n";
    for (const FoldResult& fr : result.folds) {
        const double acc = fr.total == 0 ? 0.0 : static_cast<double>(fr.correct) / fr.total;
        out << fr.actor << "," << fr.correct << "," << fr.total << "," << format_fraction(acc)
            << "\n";
    }
    out << "overall," << result.correct << "," << result.total << ","
        << format_fraction(result.accuracy) << "\n";
}

void export_vectors_csv(const std::vector<std::vector<std::uint8_t>>& vectors,
                        const std::vector<VectorMeta>& meta, std::ostream& out) {
    if (vectors.size() != meta.size())
        throw ShapeError("export: vectors and metadata differ in length");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        out << meta[i].label << "," << meta[i].actor;
        for (std::uint8_t bit : vectors[i]) out << "," << static_cast<int>(bit);
        out << "\n";
    }
}

void export_vectors_jsonl(const std::vector<std::vector<std::uint8_t>>& vectors,
                          const std::vector<VectorMeta>& meta, std::ostream& out) {
    if (vectors.size() != meta.size())
        throw ShapeError("export: vectors and metadata differ in length");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        nlohmann::json j;
        j["label"] = meta[i].label;
        j["actor"] = meta[i].actor;
        j["variant"] = meta[i].variant;
        j["dim"] = vectors[i].size();
        std::vector<std::uint32_t> on;
        for (std::uint32_t d = 0; d < vectors[i].size(); ++d)
            if (vectors[i][d]) on.push_back(d);
        j["on"] = on;
        out << j.dump() << "\n";
    }
}

std::pair<std::vector<std::vector<std::uint8_t>>, std::vector<VectorMeta>>
import_vectors_jsonl(std::istream& in) {
    std::vector<std::vector<std::uint8_t>> vectors;
    std::vector<VectorMeta> meta;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            VectorMeta m;
            m.label = j.at("label").get<std::uint32_t>();
            m.actor = j.at("actor").get<std::uint32_t>();
            m.variant = j.value("variant", 0u);
            std::vector<std::uint8_t> vec(j.at("dim").get<std::uint32_t>(), 0);
            for (const auto& d : j.at("on")) {
                const auto idx = d.get<std::uint32_t>();
                if (idx >= vec.size()) throw DataError("vector index out of range");
                vec[idx] = 1;
            }
            vectors.push_back(std::move(vec));
            meta.push_back(m);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("import: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return {std::move(vectors), std::move(meta)};
}

}  // namespace sprs
