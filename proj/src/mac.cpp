#include "sprs/mac.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "sprs/error.hpp"

namespace sprs {

void CSAParams::validate() const {
    if (beta_max <= 0.0) throw ConfigError("beta_max must be > 0");
    if (g_exponent < 1.0) throw ConfigError("g_exponent must be >= 1");
    if (g_uniform_floor < 0.0 || g_uniform_floor >= 1.0)
        throw ConfigError("g_uniform_floor must be in [0, 1)");
    for (double w : source_weights)
        if (w < 0.0) throw ConfigError("source weights must be >= 0");
    if (source_weights[0] <= 0.0) throw ConfigError("w_U must be > 0");
}

void MacConfig::validate() const {
    if (Q < 1) throw ConfigError("Q must be >= 1");
    if (K < 2) throw ConfigError("K must be >= 2");
    if (nU < 1) throw ConfigError("nU must be >= 1");
    csa.validate();
}

Mac::Mac(MacConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (std::size_t s = 0; s < kSourceCount; ++s) {
        const std::uint32_t n = cfg_.source_size(static_cast<Source>(s));
        if (n > 0) w_[s] = BitMatrix(cfg_.units(), n);
    }
}

std::uint64_t Mac::weight_count() const {
    std::uint64_t n = 0;
    for (const auto& m : w_) n += m.count_ones();
    return n;
}

namespace {

void check_indices(const MacConfig& cfg, const InputVector& input) {
    for (std::size_t s = 0; s < kSourceCount; ++s) {
        const auto& active = input.active(static_cast<Source>(s));
        const std::uint32_t limit = cfg.source_size(static_cast<Source>(s));
        for (std::uint32_t idx : active)
            if (idx >= limit)
                throw ShapeError("active index " + std::to_string(idx) +
                                 " out of range for source of size " + std::to_string(limit));
    }
}

}  // namespace

UnitActivations compute_activations(const Mac& mac, const InputVector& input, OpCounters* ops) {
    const MacConfig& cfg = mac.cfg_;
    check_indices(cfg, input);
    if (input.all_empty()) throw EmptyInputError("no active input on any source");

    const std::uint32_t n = cfg.units();
    UnitActivations acts;
    acts.v.assign(n, 1.0);

    for (std::size_t s = 0; s < kSourceCount; ++s) {
        const auto& active = input.active(static_cast<Source>(s));
        if (active.empty()) continue;
        const BitMatrix& w = mac.w_[s];
        const double denom = static_cast<double>(active.size());
        const double exponent = cfg.csa.source_weights[s];
        for (std::uint32_t u = 0; u < n; ++u) {
            const double frac = w.count_matches(u, active) / denom;
            acts.v[u] *= exponent == 1.0 ? frac : std::pow(frac, exponent);
        }
        if (ops) {
            ops->weight_row_reads += n;
            ops->unit_updates += n;
        }
    }

    acts.cm_max.assign(cfg.Q, 0.0);
    for (std::uint32_t q = 0; q < cfg.Q; ++q) {
        double best = 0.0;
        for (std::uint32_t k = 0; k < cfg.K; ++k)
            best = std::max(best, acts.v[q * cfg.K + k]);
        acts.cm_max[q] = best;
    }
    if (ops) ops->unit_updates += n;
    return acts;
}

double compute_familiarity(const UnitActivations& acts) {
    if (acts.cm_max.empty()) throw ShapeError("activations carry no modules");
    double sum = 0.0;
    for (double m : acts.cm_max) sum += m;
    return sum / static_cast<double>(acts.cm_max.size());
}

Code select_code(const Mac& mac, const UnitActivations& acts, double familiarity,
                 Mode mode, Rng& rng, OpCounters* ops) {
    const std::uint32_t Q = mac.config().Q;
    const std::uint32_t K = mac.config().K;
    if (acts.v.size() != static_cast<std::size_t>(Q) * K)
        throw ShapeError("activation vector does not match mac geometry");
    const CSAParams& csa = mac.config().csa;

    Code code;
    code.winners.resize(Q);

    if (mode == Mode::retrieval && csa.retrieval_argmax) {
        for (std::uint32_t q = 0; q < Q; ++q) {
            std::uint32_t best = 0;
            double best_v = acts.v[q * K];
            for (std::uint32_t k = 1; k < K; ++k) {
                const double v = acts.v[q * K + k];
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            code.winners[q] = static_cast<std::uint16_t>(best);
        }
        if (ops) ops->unit_updates += static_cast<std::uint64_t>(Q) * K;
        return code;
    }

    const double beta = familiarity <= csa.g_uniform_floor
                            ? 0.0
                            : csa.beta_max * std::pow(familiarity, csa.g_exponent);

    std::vector<double> cumulative(K);
    for (std::uint32_t q = 0; q < Q; ++q) {
        // exp is shifted by the CM max so weights stay in (0, 1]; at beta = 0
        // every weight is exactly 1 and the draw is uniform.
        const double v_max = acts.cm_max.empty() ? 1.0 : acts.cm_max[q];
        double total = 0.0;
        for (std::uint32_t k = 0; k < K; ++k) {
            total += std::exp(beta * (acts.v[q * K + k] - v_max));
            cumulative[k] = total;
        }
        const double threshold = rng.real() * total;
        std::uint32_t idx = 0;
        for (std::uint32_t k = 0; k < K; ++k) idx += cumulative[k] <= threshold;
        code.winners[q] = static_cast<std::uint16_t>(std::min(idx, K - 1));
    }
    if (ops) ops->unit_updates += 2ull * Q * K;
    return code;
}

std::uint32_t learn(Mac& mac, const InputVector& input, const Code& code, OpCounters* ops) {
    const MacConfig& cfg = mac.cfg_;
    check_indices(cfg, input);
    if (code.winners.size() != cfg.Q) throw ShapeError("code length does not match Q");
    for (std::uint16_t w : code.winners)
        if (w >= cfg.K) throw ShapeError("code winner out of range");

    std::uint32_t newly_set = 0;
    for (std::size_t s = 0; s < kSourceCount; ++s) {
        const auto& active = input.active(static_cast<Source>(s));
        if (active.empty()) continue;
        BitMatrix& w = mac.w_[s];
        for (std::uint32_t q = 0; q < cfg.Q; ++q) {
            const std::uint32_t unit = q * cfg.K + code.winners[q];
            for (std::uint32_t j : active) newly_set += w.set(unit, j);
        }
        if (ops) {
            ops->weight_row_reads += cfg.Q;
            ops->weight_writes += static_cast<std::uint64_t>(cfg.Q) * active.size();
        }
    }
    if (ops) ops->weights_set += newly_set;
    mac.stored_count_ += 1;
    return newly_set;
}

std::uint32_t code_intersection(const Code& a, const Code& b) {
    if (a.winners.size() != b.winners.size())
        throw ShapeError("codes come from different geometries");
    std::uint32_t n = 0;
    for (std::size_t q = 0; q < a.winners.size(); ++q) n += a.winners[q] == b.winners[q];
    return n;
}

namespace {

constexpr std::uint16_t kMacFormatVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* data, std::size_t& pos) {
    const std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return v;
}

std::uint32_t get_u32(const std::uint8_t* data, std::size_t& pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

void Mac::serialize(std::vector<std::uint8_t>& out) const {
    out.push_back('S');
    out.push_back('P');
    out.push_back('R');
    out.push_back('S');
    put_u16(out, kMacFormatVersion);
    put_u32(out, cfg_.Q);
    put_u32(out, cfg_.K);
    put_u32(out, cfg_.nU);
    put_u32(out, cfg_.nH);
    put_u32(out, cfg_.nD);
    for (const auto& m : w_) m.append_bytes(out);
}

Mac Mac::deserialize(const std::uint8_t* data, std::size_t size, std::size_t& pos) {
    if (pos + 26 > size || data[pos] != 'S' || data[pos + 1] != 'P' ||
        data[pos + 2] != 'R' || data[pos + 3] != 'S')
        throw DataError("bad mac header");
    pos += 4;
    const std::uint16_t version = get_u16(data, pos);
    if (version != kMacFormatVersion)
        throw DataError("unsupported mac format version " + std::to_string(version));

    MacConfig cfg;
    cfg.Q = get_u32(data, pos);
    cfg.K = get_u32(data, pos);
    cfg.nU = get_u32(data, pos);
    cfg.nH = get_u32(data, pos);
    cfg.nD = get_u32(data, pos);

    Mac mac(cfg);
    for (auto& m : mac.w_) {
        const std::size_t len = static_cast<std::size_t>(m.rows()) * m.bytes_per_row();
        if (pos + len > size) throw DataError("truncated mac weight block");
        m.load_bytes({data + pos, len});
        pos += len;
    }
    return mac;
}

}  // namespace sprs
