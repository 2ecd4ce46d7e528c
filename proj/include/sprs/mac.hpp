#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sprs/bitmatrix.hpp"
#include "sprs/rng.hpp"

namespace sprs {

// Input sources feeding a mac: bottom-up, horizontal (recurrent), top-down.
enum class Source : std::size_t { U = 0, H = 1, D = 2 };
inline constexpr std::size_t kSourceCount = 3;

enum class Mode { learning, retrieval };

// Code selection parameters. The expansivity schedule beta(G) =
// beta_max * G^g_exponent controls how strongly selection concentrates on
// the best-matching units as familiarity grows; at or below g_uniform_floor
// selection is uniform.
struct CSAParams {
    double beta_max = 40.0;
    double g_exponent = 2.0;
    double g_uniform_floor = 0.02;
    std::array<double, kSourceCount> source_weights{1.0, 1.0, 1.0};
    bool retrieval_argmax = true;

    void validate() const;
};

struct MacConfig {
    std::uint32_t Q = 0;   // competitive modules
    std::uint32_t K = 0;   // units per module
    std::uint32_t nU = 0;  // presynaptic counts per source
    std::uint32_t nH = 0;
    std::uint32_t nD = 0;
    CSAParams csa;

    std::uint32_t units() const { return Q * K; }
    std::uint32_t source_size(Source s) const {
        return s == Source::U ? nU : (s == Source::H ? nH : nD);
    }
    void validate() const;
};

// Active presynaptic indices per source. Indices are unique and in range;
// an empty set means the source is silent this step.
struct InputVector {
    std::vector<std::uint32_t> active_u;
    std::vector<std::uint32_t> active_h;
    std::vector<std::uint32_t> active_d;

    const std::vector<std::uint32_t>& active(Source s) const {
        return s == Source::U ? active_u : (s == Source::H ? active_h : active_d);
    }
    bool all_empty() const {
        return active_u.empty() && active_h.empty() && active_d.empty();
    }
};

// An SDR code: one winning unit per competitive module.
struct Code {
    std::vector<std::uint16_t> winners;  // winners[q] in [0, K)

    bool operator==(const Code&) const = default;
};

// Normalized combined input per unit, plus the per-CM maxima the
// familiarity measure is built from.
struct UnitActivations {
    std::vector<double> v;       // Q*K values in [0, 1]
    std::vector<double> cm_max;  // Q values
};

// Primitive-operation counters for the fixed-time claims. The first three
// depend only on (Q, K, active-set sizes); weights_set saturates over a
// mac's lifetime and is reported but never asserted constant.
struct OpCounters {
    std::uint64_t weight_row_reads = 0;
    std::uint64_t unit_updates = 0;
    std::uint64_t weight_writes = 0;
    std::uint64_t weights_set = 0;

    OpCounters& operator+=(const OpCounters& o) {
        weight_row_reads += o.weight_row_reads;
        unit_updates += o.unit_updates;
        weight_writes += o.weight_writes;
        weights_set += o.weights_set;
        return *this;
    }
    bool fixed_time_equal(const OpCounters& o) const {
        return weight_row_reads == o.weight_row_reads &&
               unit_updates == o.unit_updates &&
               weight_writes == o.weight_writes;
    }
};

// One SDR coding field: Q winner-take-all modules of K units with binary
// U/H/D weight matrices. Weights only ever go 0 -> 1.
class Mac {
public:
    Mac() = default;
    explicit Mac(MacConfig cfg);

    const MacConfig& config() const { return cfg_; }
    const BitMatrix& weights(Source s) const { return w_[static_cast<std::size_t>(s)]; }
    std::uint64_t stored_count() const { return stored_count_; }
    std::uint64_t weight_count() const;

    // CSA parameters and the stored-event diagnostic live outside the pinned
    // weight wire format; the model container restores them after load.
    void set_csa(const CSAParams& csa) { cfg_.csa = csa; }
    void set_stored_count(std::uint64_t n) { stored_count_ = n; }

    // Flat unit index of a code's winner in module q.
    std::uint32_t winner_unit(const Code& code, std::uint32_t q) const {
        return q * cfg_.K + code.winners[q];
    }

    friend UnitActivations compute_activations(const Mac&, const InputVector&, OpCounters*);
    friend std::uint32_t learn(Mac&, const InputVector&, const Code&, OpCounters*);

    void serialize(std::vector<std::uint8_t>& out) const;
    static Mac deserialize(const std::uint8_t* data, std::size_t size, std::size_t& pos);

private:
    MacConfig cfg_;
    std::array<BitMatrix, kSourceCount> w_;
    std::uint64_t stored_count_ = 0;
};

// Normalized per-source match fractions combined multiplicatively:
// X(u) = |{j active in X : W_X[u][j] = 1}| / |active_X| for each non-empty
// source, V(u) = prod X(u)^w_X. Throws ShapeError on out-of-range indices
// and EmptyInputError when every source is silent.
UnitActivations compute_activations(const Mac& mac, const InputVector& input,
                                    OpCounters* ops = nullptr);

// G = mean over modules of the per-CM max activation.
double compute_familiarity(const UnitActivations& acts);

// Picks one winner per CM. Retrieval mode with retrieval_argmax set is a
// deterministic argmax (ties -> lowest index); otherwise winners are sampled
// per CM with probability proportional to exp(beta(G) * V(u)), where
// beta(G) = beta_max * G^g_exponent and beta = 0 at or below the uniform
// floor. Every CM draws independently from `rng`.
Code select_code(const Mac& mac, const UnitActivations& acts, double familiarity,
                 Mode mode, Rng& rng, OpCounters* ops = nullptr);

// Single-trial Hebbian association: sets W_X[u][j] = 1 for every active j
// and every winner u. Returns the number of 0 -> 1 transitions.
std::uint32_t learn(Mac& mac, const InputVector& input, const Code& code,
                    OpCounters* ops = nullptr);

// Number of modules whose winners agree.
std::uint32_t code_intersection(const Code& a, const Code& b);

}  // namespace sprs
