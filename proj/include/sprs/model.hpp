#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sprs/image.hpp"
#include "sprs/mac.hpp"
#include "sprs/rng.hpp"

namespace sprs {

// One level of the hierarchy: a grid of macs, each watching a rectangular
// receptive field of the level below (pixels for level 1, macs above that).
struct LevelConfig {
    std::uint32_t grid_rows = 0;
    std::uint32_t grid_cols = 0;
    std::uint32_t rf_rows = 0;   // receptive-field height, in lower-level elements
    std::uint32_t rf_cols = 0;   // receptive-field width
    std::uint32_t stride_rows = 1;
    std::uint32_t stride_cols = 1;
    std::uint32_t pi_min = 2;    // gate: minimum active RF elements
    std::uint32_t pi_max = 0;    // gate: maximum active RF elements (0 = rf area / 2)
    std::uint32_t persistence = 1;  // frames a fresh code is held before re-eligibility
    std::uint32_t q = 1;
    std::uint32_t k = 2;
    bool recurrent = false;  // wire each mac's own previous code as its H source
    CSAParams csa;

    std::uint32_t mac_count() const { return grid_rows * grid_cols; }
    std::uint32_t rf_area() const { return rf_rows * rf_cols; }
    std::uint32_t effective_pi_max() const { return pi_max == 0 ? rf_area() / 2 : pi_max; }
};

struct ModelConfig {
    std::uint32_t input_rows = 0;  // level-0 frame height
    std::uint32_t input_cols = 0;  // level-0 frame width
    bool topdown = false;          // enable decode_topdown
    std::vector<LevelConfig> levels;

    void validate() const;  // throws ConfigError
};

// JSON round-trip for configs (exact field names documented in README).
ModelConfig parse_model_config(const std::string& json_text);
ModelConfig load_model_config(const std::string& path);
std::string model_config_to_json(const ModelConfig& cfg);

// The per-step activity of one mac, as recorded in a trace.
struct TraceEntry {
    std::uint32_t level = 0;  // 1-based
    std::uint32_t mac = 0;    // row-major index within the level
    Code code;

    bool operator==(const TraceEntry&) const = default;
};

struct TraceStep {
    std::int64_t t = 0;
    std::uint32_t input_ones = 0;           // active pixels in the level-0 frame
    std::vector<TraceEntry> active;         // ordered by (level, mac)

    bool operator==(const TraceStep&) const = default;
};

// The full activation record of one sequence, plus the model geometry it was
// produced under so that traces from different models cannot be compared.
struct Trace {
    std::vector<std::uint32_t> level_macs;  // macs per level
    std::vector<std::uint32_t> level_q;     // Q per level
    std::vector<std::uint32_t> level_k;     // K per level
    std::vector<TraceStep> steps;

    bool same_geometry(const Trace& other) const {
        return level_macs == other.level_macs && level_q == other.level_q &&
               level_k == other.level_k;
    }
};

void write_trace_jsonl(const Trace& trace, std::ostream& out);

struct ModelStats {
    std::uint64_t macs = 0;
    std::uint64_t units = 0;
    std::uint64_t weight_slots = 0;  // total binary weights across U/H matrices
};

class Model {
  public:
    explicit Model(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    std::uint32_t level_count() const { return static_cast<std::uint32_t>(levels_.size()); }
    std::uint32_t mac_count(std::uint32_t level) const;  // level is 1-based
    const Mac& mac_at(std::uint32_t level, std::uint32_t index) const;
    Mac& mac_at(std::uint32_t level, std::uint32_t index);
    // Lower-level element ids covered by a mac's receptive field (pixel flat
    // indices for level 1, lower-mac indices for level >= 2), ascending.
    const std::vector<std::uint32_t>& rf_elements(std::uint32_t level, std::uint32_t index) const;
    ModelStats stats() const;

    // Clears persistence timers and previous-step codes between sequences.
    void reset_sequence();

    bool operator==(const Model& other) const;

    // --- runtime state, managed by process_frame ---
    struct MacState {
        std::int64_t win_time = -1;  // t of the last freshly computed code
        bool active = false;         // holds or computed a code this step
        bool prev_active = false;    // had a code at t-1
        Code code;
        Code prev_code;
    };
    MacState& state(std::uint32_t level, std::uint32_t index);
    const MacState& state(std::uint32_t level, std::uint32_t index) const;

  private:
    struct Node {
        Mac mac;
        std::vector<std::uint32_t> rf;
        MacState st;
    };

    void check_level(std::uint32_t level) const;

    ModelConfig cfg_;
    std::vector<std::vector<Node>> levels_;

    friend Model load_model(const std::string& path);
};

Model build_model(const ModelConfig& cfg);

// Indices of the macs at `level` (1-based) whose receptive fields contain a
// within-bounds count of active lower elements: pi_min <= count <= pi_max.
std::vector<std::uint32_t> gate_macs(const Model& model, std::uint32_t level,
                                     const std::vector<std::uint32_t>& lower_active);

// Runs one frame through every level, bottom-up, at time t. Persisting macs
// hold their code; gated-in macs compute one (and learn it when mode is
// learning). Randomness is drawn from streams derived from `base` by
// (level, mac, t), so results are independent of evaluation order.
TraceStep process_frame(Model& model, const BinaryFrame& frame, std::int64_t t, Mode mode,
                        const Rng& base);

// reset_sequence + process_frame for t = 0..n-1. Errors on an empty sequence.
Trace process_sequence(Model& model, const std::vector<BinaryFrame>& frames, Mode mode,
                       const Rng& base);

// Fraction of unit activations in `a` (tuples of step, level, mac, CM, winner)
// that also occur in `b`. Errors when the traces' geometries differ.
double recognition_match(const Trace& a, const Trace& b);

// Flat binary vector over the top level's units at the final step of the
// trace: length = top mac count * Q * K, with the winners' bits set.
std::vector<std::uint8_t> top_code_vector(const Model& model, const Trace& trace);

// Reconstructs a level-0 frame from codes active at `level` by walking the
// learned bottom-up weights downward (a set unit lights every lower element
// its U row links to). Requires cfg.topdown; errors otherwise.
BinaryFrame decode_topdown(const Model& model, std::uint32_t level,
                           const std::vector<std::pair<std::uint32_t, Code>>& active);

// Model container on disk: magic, format version, config echo as JSON, then
// each mac's serialized matrices. save_model writes atomically (temp+rename).
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace sprs
