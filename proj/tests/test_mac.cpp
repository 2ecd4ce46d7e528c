#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "sprs/error.hpp"
#include "sprs/mac.hpp"
#include "sprs/rng.hpp"

using namespace sprs;

namespace {

MacConfig small_cfg(std::uint32_t Q, std::uint32_t K, std::uint32_t nU,
                    std::uint32_t nH = 0) {
    MacConfig cfg;
    cfg.Q = Q;
    cfg.K = K;
    cfg.nU = nU;
    cfg.nH = nH;
    return cfg;
}

InputVector u_input(std::vector<std::uint32_t> idx) {
    InputVector in;
    in.active_u = std::move(idx);
    return in;
}

Code make_code(std::vector<std::uint16_t> winners) {
    return Code{std::move(winners)};
}

std::vector<std::uint32_t> random_subset(Rng& rng, std::uint32_t n, std::uint32_t count) {
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t j = i + rng.below(n - i);
        std::swap(all[i], all[j]);
    }
    all.resize(count);
    return all;
}

}  // namespace

TEST_CASE("activations: zero weights give zero everywhere") {
    Mac mac(small_cfg(7, 7, 20));
    auto acts = compute_activations(mac, u_input({0, 1, 2, 3, 4}));
    for (double v : acts.v) CHECK(v == 0.0);
    for (double m : acts.cm_max) CHECK(m == 0.0);
    CHECK(compute_familiarity(acts) == 0.0);
}

TEST_CASE("activations: exact replay of a single stored input hits 1 on its code") {
    Mac mac(small_cfg(7, 7, 20));
    const auto input = u_input({2, 5, 9, 13, 17});
    const auto code = make_code({0, 3, 6, 1, 4, 2, 5});
    learn(mac, input, code);

    auto acts = compute_activations(mac, input);
    for (std::uint32_t q = 0; q < 7; ++q)
        CHECK(acts.v[mac.winner_unit(code, q)] == 1.0);
    CHECK(compute_familiarity(acts) == 1.0);
}

TEST_CASE("activations: half-overlapping probe scores 0.5 on the stored code") {
    // Oracle: one stored association, so each winner's row holds exactly the
    // stored indices; a probe sharing 5 of 10 must count 5 matches / 10 active.
    Mac mac(small_cfg(7, 7, 40));
    std::vector<std::uint32_t> stored(10), probe(10);
    std::iota(stored.begin(), stored.end(), 0u);    // 0..9
    std::iota(probe.begin(), probe.end(), 5u);      // 5..14, shares 5..9
    const auto code = make_code({1, 1, 2, 3, 4, 5, 6});
    learn(mac, u_input(stored), code);

    auto acts = compute_activations(mac, u_input(probe));
    for (std::uint32_t q = 0; q < 7; ++q)
        CHECK(acts.v[mac.winner_unit(code, q)] == doctest::Approx(0.5));
    // Non-winners saw no learning at all.
    for (std::uint32_t q = 0; q < 7; ++q)
        for (std::uint32_t k = 0; k < 7; ++k)
            if (k != code.winners[q]) CHECK(acts.v[q * 7 + k] == 0.0);
    CHECK(compute_familiarity(acts) == doctest::Approx(0.5));
}

TEST_CASE("activations: index range and empty-input errors") {
    Mac mac(small_cfg(2, 3, 10));
    CHECK_THROWS_AS(compute_activations(mac, u_input({10})), ShapeError);
    CHECK_THROWS_AS(compute_activations(mac, InputVector{}), EmptyInputError);
    InputVector bad_h;
    bad_h.active_u = {1};
    bad_h.active_h = {0};  // nH = 0
    CHECK_THROWS_AS(compute_activations(mac, bad_h), ShapeError);
}

TEST_CASE("multi-source combination is multiplicative, silent sources contribute 1") {
    MacConfig cfg = small_cfg(2, 4, 12, 8);
    Mac mac(cfg);
    InputVector in;
    in.active_u = {0, 1, 2, 3};
    in.active_h = {1, 5};
    const auto code = make_code({2, 0});
    learn(mac, in, code);

    // U-only probe: H silent, so V = U fraction alone.
    auto acts_u = compute_activations(mac, u_input({0, 1}));
    CHECK(acts_u.v[mac.winner_unit(code, 0)] == 1.0);

    // Both sources, U at half overlap: V = 0.5 * 1.0.
    InputVector both;
    both.active_u = {0, 1, 8, 9};
    both.active_h = {1, 5};
    auto acts_b = compute_activations(mac, both);
    CHECK(acts_b.v[mac.winner_unit(code, 0)] == doctest::Approx(0.5));
}

TEST_CASE("select_code: retrieval argmax returns the stored code exactly at G=1") {
    Rng rng(7);
    Mac mac(small_cfg(7, 7, 25));
    const auto input = u_input({1, 4, 7, 11, 19, 22});
    Rng pick(99);
    Code stored;
    for (std::uint32_t q = 0; q < 7; ++q)
        stored.winners.push_back(static_cast<std::uint16_t>(pick.below(7)));
    learn(mac, input, stored);

    auto acts = compute_activations(mac, input);
    const double g = compute_familiarity(acts);
    CHECK(g == 1.0);
    CHECK(select_code(mac, acts, g, Mode::retrieval, rng) == stored);
}

TEST_CASE("select_code: argmax ties break to the lowest unit index") {
    Mac mac(small_cfg(3, 5, 10));
    UnitActivations acts;
    acts.v.assign(15, 0.25);  // all equal within every CM
    acts.cm_max.assign(3, 0.25);
    Rng rng(1);
    const Code code = select_code(mac, acts, 0.25, Mode::retrieval, rng);
    for (std::uint16_t w : code.winners) CHECK(w == 0);
}

TEST_CASE("select_code: G=0 sampling is uniform; intersection with a stored code sits at Q/K") {
    // Fig 1a geometry. Monte-Carlo oracle: uniform per-CM choice agrees with a
    // fixed code with probability 1/K, so the mean intersection is Q/K = 1.
    const std::uint32_t Q = 7, K = 7;
    Mac mac(small_cfg(Q, K, 16));
    UnitActivations acts;
    acts.v.assign(Q * K, 0.0);
    acts.cm_max.assign(Q, 0.0);
    const auto stored = make_code({3, 1, 4, 1, 5, 2, 6});

    Rng rng(2024);
    const int trials = 10000;
    double total = 0.0;
    std::vector<std::vector<int>> histogram(Q, std::vector<int>(K, 0));
    for (int t = 0; t < trials; ++t) {
        const Code c = select_code(mac, acts, 0.0, Mode::learning, rng);
        total += code_intersection(c, stored);
        for (std::uint32_t q = 0; q < Q; ++q) histogram[q][c.winners[q]] += 1;
    }
    const double mean = total / trials;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.03));

    // Chi-square uniformity per CM, df = 6, alpha = 0.001 -> 22.458.
    const double expected = static_cast<double>(trials) / K;
    for (std::uint32_t q = 0; q < Q; ++q) {
        double chi2 = 0.0;
        for (std::uint32_t k = 0; k < K; ++k) {
            const double d = histogram[q][k] - expected;
            chi2 += d * d / expected;
        }
        CHECK(chi2 < 22.458);
    }
}

TEST_CASE("select_code: intermediate familiarity lands between chance and full reuse") {
    const std::uint32_t Q = 7, K = 7;
    Mac mac(small_cfg(Q, K, 40));
    std::vector<std::uint32_t> stored_in(10);
    std::iota(stored_in.begin(), stored_in.end(), 0u);
    const auto code = make_code({0, 1, 2, 3, 4, 5, 6});
    learn(mac, u_input(stored_in), code);

    std::vector<std::uint32_t> probe(10);
    std::iota(probe.begin(), probe.end(), 5u);  // 50% overlap
    auto acts = compute_activations(mac, u_input(probe));
    const double g = compute_familiarity(acts);
    CHECK(g == doctest::Approx(0.5));

    Rng rng(5);
    double total = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t)
        total += code_intersection(select_code(mac, acts, g, Mode::learning, rng), code);
    const double mean = total / trials;
    CHECK(mean > static_cast<double>(Q) / K + 0.3);
    CHECK(mean < Q - 0.1);
}

TEST_CASE("learn: counts pairs, idempotent on repeat") {
    Mac mac(small_cfg(7, 7, 30));
    const auto input = u_input({0, 6, 12, 18, 24});
    const auto code = make_code({0, 1, 2, 3, 4, 5, 6});
    CHECK(learn(mac, input, code) == 35);  // 5 pixels x 7 winners
    CHECK(learn(mac, input, code) == 0);
    CHECK(mac.stored_count() == 2);
    CHECK(mac.weight_count() == 35);
}

TEST_CASE("learn: shape errors") {
    Mac mac(small_cfg(3, 4, 10));
    CHECK_THROWS_AS(learn(mac, u_input({0}), make_code({0, 1})), ShapeError);
    CHECK_THROWS_AS(learn(mac, u_input({0}), make_code({0, 1, 4})), ShapeError);
    CHECK_THROWS_AS(learn(mac, u_input({11}), make_code({0, 1, 2})), ShapeError);
}

TEST_CASE("code_intersection basics and chance level") {
    const auto a = make_code({1, 2, 3, 4, 5, 6, 0});
    CHECK(code_intersection(a, a) == 7);
    const auto b = make_code({2, 3, 4, 5, 6, 0, 1});
    CHECK(code_intersection(a, b) == 0);
    CHECK_THROWS_AS(code_intersection(a, make_code({1, 2})), ShapeError);

    Rng rng(11);
    double total = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        Code x, y;
        for (int q = 0; q < 7; ++q) {
            x.winners.push_back(static_cast<std::uint16_t>(rng.below(7)));
            y.winners.push_back(static_cast<std::uint16_t>(rng.below(7)));
        }
        total += code_intersection(x, y);
    }
    CHECK(total / trials == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("property: structural sparsity for every G, mode, and geometry") {
    Rng meta(42);
    for (int round = 0; round < 200; ++round) {
        const std::uint32_t Q = 1 + meta.below(12);
        const std::uint32_t K = 2 + meta.below(14);
        Mac mac(small_cfg(Q, K, 24));
        UnitActivations acts;
        acts.v.resize(Q * K);
        for (auto& v : acts.v) v = meta.real();
        acts.cm_max.assign(Q, 0.0);
        for (std::uint32_t q = 0; q < Q; ++q)
            for (std::uint32_t k = 0; k < K; ++k)
                acts.cm_max[q] = std::max(acts.cm_max[q], acts.v[q * K + k]);
        const double g = meta.real();
        Rng rng(round);
        for (Mode mode : {Mode::learning, Mode::retrieval}) {
            const Code c = select_code(mac, acts, g, mode, rng);
            REQUIRE(c.winners.size() == Q);
            for (std::uint16_t w : c.winners) REQUIRE(w < K);
        }
    }
}

TEST_CASE("property: weights are binary and monotone under any operation sequence") {
    Rng rng(314);
    Mac mac(small_cfg(4, 5, 32, 20));
    std::uint64_t prev_weights = 0;
    for (int step = 0; step < 300; ++step) {
        InputVector in;
        in.active_u = random_subset(rng, 32, 1 + rng.below(16));
        if (rng.below(2)) in.active_h = random_subset(rng, 20, 1 + rng.below(10));
        auto acts = compute_activations(mac, in);
        const double g = compute_familiarity(acts);
        Rng draw = rng.derive({static_cast<std::uint64_t>(step)});
        const Code c = select_code(mac, acts, g, Mode::learning, draw);
        learn(mac, in, c);
        const std::uint64_t now = mac.weight_count();
        REQUIRE(now >= prev_weights);
        prev_weights = now;
    }
}

TEST_CASE("property: identical state, input, mode, and seed give identical codes") {
    Rng setup(9);
    Mac mac(small_cfg(5, 6, 40));
    for (int i = 0; i < 20; ++i) {
        InputVector in = u_input(random_subset(setup, 40, 8));
        auto acts = compute_activations(mac, in);
        Rng seed_a(1000 + i), seed_b(1000 + i);
        const double g = compute_familiarity(acts);
        CHECK(select_code(mac, acts, g, Mode::learning, seed_a) ==
              select_code(mac, acts, g, Mode::learning, seed_b));
        Rng lr = setup.derive({static_cast<std::uint64_t>(i)});
        learn(mac, in, select_code(mac, acts, g, Mode::learning, lr));
    }
}

TEST_CASE("property: exact recall after one store into an empty mac, small sizes exhaustive") {
    Rng rng(77);
    for (std::uint32_t Q = 1; Q <= 4; ++Q) {
        for (std::uint32_t K = 2; K <= 5; ++K) {
            for (std::uint32_t m = 1; m <= 6; ++m) {
                Mac mac(small_cfg(Q, K, 12));
                InputVector in = u_input(random_subset(rng, 12, m));
                Code stored;
                for (std::uint32_t q = 0; q < Q; ++q)
                    stored.winners.push_back(static_cast<std::uint16_t>(rng.below(K)));
                learn(mac, in, stored);

                auto acts = compute_activations(mac, in);
                const double g = compute_familiarity(acts);
                REQUIRE(g == 1.0);
                Rng r(0);
                REQUIRE(select_code(mac, acts, g, Mode::retrieval, r) == stored);
            }
        }
    }
}

TEST_CASE("property: similarity-preserving selection orders probe overlaps") {
    const std::uint32_t Q = 10, K = 10, n = 100, m = 20;
    MacConfig cfg = small_cfg(Q, K, n);
    Mac mac(cfg);
    std::vector<std::uint32_t> base(m);
    std::iota(base.begin(), base.end(), 0u);
    Code stored;
    Rng pick(3);
    for (std::uint32_t q = 0; q < Q; ++q)
        stored.winners.push_back(static_cast<std::uint16_t>(pick.below(K)));
    learn(mac, u_input(base), stored);

    auto mean_intersection = [&](double overlap, std::uint64_t seed) {
        const auto shared = static_cast<std::uint32_t>(overlap * m);
        std::vector<std::uint32_t> probe;
        for (std::uint32_t i = 0; i < shared; ++i) probe.push_back(i);
        for (std::uint32_t i = 0; probe.size() < m; ++i) probe.push_back(m + i);
        auto acts = compute_activations(mac, u_input(probe));
        const double g = compute_familiarity(acts);
        Rng rng(seed);
        double total = 0;
        for (int t = 0; t < 1000; ++t)
            total += code_intersection(select_code(mac, acts, g, Mode::learning, rng), stored);
        return total / 1000.0;
    };

    const double hi = mean_intersection(0.7, 10);
    const double lo = mean_intersection(0.3, 11);
    CHECK(hi >= lo);
    CHECK(hi > lo + 0.5);
}

TEST_CASE("property: op counts depend on geometry and input size, not stored count") {
    const std::uint32_t n = 64;
    Mac mac(small_cfg(6, 8, n));
    Rng rng(123);

    auto store_one = [&](OpCounters* ops) {
        InputVector in = u_input(random_subset(rng, n, 12));
        auto acts = compute_activations(mac, in, ops);
        const double g = compute_familiarity(acts);
        const Code c = select_code(mac, acts, g, Mode::learning, rng, ops);
        learn(mac, in, c, ops);
    };
    auto retrieve_one = [&](OpCounters* ops) {
        InputVector in = u_input(random_subset(rng, n, 12));
        auto acts = compute_activations(mac, in, ops);
        const double g = compute_familiarity(acts);
        Rng r(0);
        (void)select_code(mac, acts, g, Mode::retrieval, r, ops);
    };

    for (int i = 0; i < 10; ++i) store_one(nullptr);
    OpCounters store_early, retrieve_early;
    store_one(&store_early);
    retrieve_one(&retrieve_early);

    while (mac.stored_count() < 10000) store_one(nullptr);
    OpCounters store_late, retrieve_late;
    store_one(&store_late);
    retrieve_one(&retrieve_late);

    CHECK(store_early.fixed_time_equal(store_late));
    CHECK(retrieve_early.fixed_time_equal(retrieve_late));
    CHECK(store_early.weight_row_reads > 0);
    CHECK(store_early.weight_writes > 0);
}

TEST_CASE("serialization: golden bytes for a tiny mac") {
    MacConfig cfg = small_cfg(2, 2, 9);
    Mac mac(cfg);
    // Winners are unit 1 of CM 0 (flat 1) and unit 0 of CM 1 (flat 2).
    learn(mac, u_input({0, 3, 8}), make_code({1, 0}));

    std::vector<std::uint8_t> bytes;
    mac.serialize(bytes);

    const std::vector<std::uint8_t> expected = {
        'S', 'P', 'R', 'S',
        1, 0,                    // version u16 LE
        2, 0, 0, 0,              // Q
        2, 0, 0, 0,              // K
        9, 0, 0, 0,              // nU
        0, 0, 0, 0,              // nH
        0, 0, 0, 0,              // nD
        // W_U, 4 rows x 2 bytes (9 columns): bits 0, 3, 8 set on rows 1 and 2.
        0x00, 0x00,
        0x09, 0x01,
        0x09, 0x01,
        0x00, 0x00,
    };
    CHECK(bytes == expected);

    std::size_t pos = 0;
    Mac back = Mac::deserialize(bytes.data(), bytes.size(), pos);
    CHECK(pos == bytes.size());
    CHECK(back.weights(Source::U) == mac.weights(Source::U));
    CHECK(back.config().Q == 2);
    CHECK(back.config().nU == 9);
}

TEST_CASE("serialization: round-trip preserves recall") {
    Rng rng(55);
    Mac mac(small_cfg(5, 5, 48, 25));
    std::vector<InputVector> inputs;
    std::vector<Code> codes;
    for (int i = 0; i < 12; ++i) {
        InputVector in;
        in.active_u = random_subset(rng, 48, 10);
        auto acts = compute_activations(mac, in);
        const double g = compute_familiarity(acts);
        Rng draw = rng.derive({static_cast<std::uint64_t>(i)});
        Code c = select_code(mac, acts, g, Mode::learning, draw);
        learn(mac, in, c);
        inputs.push_back(in);
        codes.push_back(c);
    }

    std::vector<std::uint8_t> bytes;
    mac.serialize(bytes);
    std::size_t pos = 0;
    Mac back = Mac::deserialize(bytes.data(), bytes.size(), pos);

    CHECK(back.weights(Source::U) == mac.weights(Source::U));
    CHECK(back.weights(Source::H) == mac.weights(Source::H));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto acts_orig = compute_activations(mac, inputs[i]);
        auto acts_back = compute_activations(back, inputs[i]);
        CHECK(acts_orig.v == acts_back.v);
        Rng r(0);
        CHECK(select_code(back, acts_back, compute_familiarity(acts_back),
                          Mode::retrieval, r) ==
              select_code(mac, acts_orig, compute_familiarity(acts_orig),
                          Mode::retrieval, r));
    }
    (void)codes;
}
