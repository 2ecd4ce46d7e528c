#include "sprs/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "sprs/error.hpp"

namespace sprs {

using nlohmann::json;

void ModelConfig::validate() const {
    if (input_rows == 0 || input_cols == 0) throw ConfigError("model: input dims must be positive");
    if (levels.empty()) throw ConfigError("model: at least one level required");

    std::uint32_t lower_rows = input_rows;
    std::uint32_t lower_cols = input_cols;
    std::uint32_t prev_persistence = 0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const LevelConfig& lv = levels[i];
        const std::string where = "level " + std::to_string(i + 1) + ": ";
        if (lv.grid_rows == 0 || lv.grid_cols == 0) throw ConfigError(where + "grid must be positive");
        if (lv.rf_rows == 0 || lv.rf_cols == 0) throw ConfigError(where + "rf_shape must be positive");
        if (lv.stride_rows == 0 || lv.stride_cols == 0) throw ConfigError(where + "rf_stride must be positive");
        if (lv.rf_rows > lower_rows || lv.rf_cols > lower_cols)
            throw ConfigError(where + "rf_shape exceeds the lower level's extent");
        // Every mac keeps at least one in-bounds element after border truncation.
        const std::uint32_t last_start_r = (lv.grid_rows - 1) * lv.stride_rows;
        const std::uint32_t last_start_c = (lv.grid_cols - 1) * lv.stride_cols;
        if (last_start_r >= lower_rows || last_start_c >= lower_cols)
            throw ConfigError(where + "grid extends past the lower level");
        if (lv.q == 0) throw ConfigError(where + "Q must be positive");
        if (lv.k < 2) throw ConfigError(where + "K must be at least 2");
        if (lv.effective_pi_max() > lv.rf_area())
            throw ConfigError(where + "pi_max exceeds the receptive-field size");
        if (lv.pi_min > lv.effective_pi_max())
            throw ConfigError(where + "pi_min exceeds pi_max");
        if (lv.persistence == 0) throw ConfigError(where + "persistence must be at least 1");
        if (lv.persistence < prev_persistence)
            throw ConfigError(where + "persistence must be non-decreasing with level");
        lv.csa.validate();
        prev_persistence = lv.persistence;
        lower_rows = lv.grid_rows;
        lower_cols = lv.grid_cols;
    }
}

namespace {

std::pair<std::uint32_t, std::uint32_t> pair_field(const json& j, const char* name) {
    const json& v = j.at(name);
    if (!v.is_array() || v.size() != 2)
        throw ConfigError(std::string("config: ") + name + " must be a [rows, cols] pair");
    return {v[0].get<std::uint32_t>(), v[1].get<std::uint32_t>()};
}

CSAParams csa_from_json(const json& j) {
    CSAParams csa;
    csa.beta_max = j.value("beta_max", csa.beta_max);
    csa.g_exponent = j.value("g_exponent", csa.g_exponent);
    csa.g_uniform_floor = j.value("g_uniform_floor", csa.g_uniform_floor);
    if (j.contains("source_weights")) {
        const json& w = j.at("source_weights");
        if (!w.is_array() || w.size() != 3)
            throw ConfigError("config: source_weights must be a [U, H, D] triple");
        for (int i = 0; i < 3; ++i) csa.source_weights[i] = w[i].get<double>();
    }
    csa.retrieval_argmax = j.value("retrieval_argmax", csa.retrieval_argmax);
    return csa;
}

json csa_to_json(const CSAParams& csa) {
    return json{{"beta_max", csa.beta_max},
                {"g_exponent", csa.g_exponent},
                {"g_uniform_floor", csa.g_uniform_floor},
                {"source_weights", {csa.source_weights[0], csa.source_weights[1], csa.source_weights[2]}},
                {"retrieval_argmax", csa.retrieval_argmax}};
}

}  // namespace

ModelConfig parse_model_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    try {
        ModelConfig cfg;
        std::tie(cfg.input_rows, cfg.input_cols) = pair_field(j, "input_dims");
        cfg.topdown = j.value("topdown", false);
        for (const json& lj : j.at("levels")) {
            LevelConfig lv;
            std::tie(lv.grid_rows, lv.grid_cols) = pair_field(lj, "grid");
            std::tie(lv.rf_rows, lv.rf_cols) = pair_field(lj, "rf_shape");
            if (lj.contains("rf_stride"))
                std::tie(lv.stride_rows, lv.stride_cols) = pair_field(lj, "rf_stride");
            lv.pi_min = lj.value("pi_min", lv.pi_min);
            lv.pi_max = lj.value("pi_max", lv.pi_max);
            lv.persistence = lj.value("persistence", lv.persistence);
            lv.q = lj.at("Q").get<std::uint32_t>();
            lv.k = lj.at("K").get<std::uint32_t>();
            lv.recurrent = lj.value("recurrent", false);
            if (lj.contains("csa")) lv.csa = csa_from_json(lj.at("csa"));
            cfg.levels.push_back(lv);
        }
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_config(buf.str());
}

std::string model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["input_dims"] = {cfg.input_rows, cfg.input_cols};
    j["topdown"] = cfg.topdown;
    j["levels"] = json::array();
    for (const LevelConfig& lv : cfg.levels) {
        json lj;
        lj["grid"] = {lv.grid_rows, lv.grid_cols};
        lj["rf_shape"] = {lv.rf_rows, lv.rf_cols};
        lj["rf_stride"] = {lv.stride_rows, lv.stride_cols};
        lj["pi_min"] = lv.pi_min;
        lj["pi_max"] = lv.pi_max;
        lj["persistence"] = lv.persistence;
        lj["Q"] = lv.q;
        lj["K"] = lv.k;
        lj["recurrent"] = lv.recurrent;
        lj["csa"] = csa_to_json(lv.csa);
        j["levels"].push_back(lj);
    }
    return j.dump(2) + "\n";
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::uint32_t lower_rows = cfg_.input_rows;
    std::uint32_t lower_cols = cfg_.input_cols;
    std::uint32_t lower_units = 0;  // Q*K of the level below (0 for pixels)
    for (const LevelConfig& lv : cfg_.levels) {
        std::vector<Node> nodes;
        nodes.reserve(lv.mac_count());
        for (std::uint32_t gr = 0; gr < lv.grid_rows; ++gr) {
            for (std::uint32_t gc = 0; gc < lv.grid_cols; ++gc) {
                Node node;
                const std::uint32_t r0 = gr * lv.stride_rows;
                const std::uint32_t c0 = gc * lv.stride_cols;
                const std::uint32_t r1 = std::min(r0 + lv.rf_rows, lower_rows);
                const std::uint32_t c1 = std::min(c0 + lv.rf_cols, lower_cols);
                for (std::uint32_t r = r0; r < r1; ++r)
                    for (std::uint32_t c = c0; c < c1; ++c)
                        node.rf.push_back(r * lower_cols + c);
                const auto rf_count = static_cast<std::uint32_t>(node.rf.size());
                MacConfig mc;
                mc.Q = lv.q;
                mc.K = lv.k;
                mc.nU = lower_units == 0 ? rf_count : rf_count * lower_units;
                mc.nH = lv.recurrent ? lv.q * lv.k : 0;
                mc.nD = 0;
                mc.csa = lv.csa;
                node.mac = Mac(mc);
                nodes.push_back(std::move(node));
            }
        }
        levels_.push_back(std::move(nodes));
        lower_rows = lv.grid_rows;
        lower_cols = lv.grid_cols;
        lower_units = lv.q * lv.k;
    }
}

void Model::check_level(std::uint32_t level) const {
    if (level == 0 || level > levels_.size())
        throw ShapeError("model: level index out of range: " + std::to_string(level));
}

std::uint32_t Model::mac_count(std::uint32_t level) const {
    check_level(level);
    return static_cast<std::uint32_t>(levels_[level - 1].size());
}

const Mac& Model::mac_at(std::uint32_t level, std::uint32_t index) const {
    check_level(level);
    return levels_[level - 1].at(index).mac;
}

Mac& Model::mac_at(std::uint32_t level, std::uint32_t index) {
    check_level(level);
    return levels_[level - 1].at(index).mac;
}

const std::vector<std::uint32_t>& Model::rf_elements(std::uint32_t level, std::uint32_t index) const {
    check_level(level);
    return levels_[level - 1].at(index).rf;
}

ModelStats Model::stats() const {
    ModelStats s;
    for (const auto& nodes : levels_) {
        for (const Node& node : nodes) {
            const MacConfig& mc = node.mac.config();
            s.macs += 1;
            s.units += mc.units();
            s.weight_slots += static_cast<std::uint64_t>(mc.units()) * (mc.nU + mc.nH + mc.nD);
        }
    }
    return s;
}

void Model::reset_sequence() {
    for (auto& nodes : levels_)
        for (Node& node : nodes) node.st = MacState{};
}

Model::MacState& Model::state(std::uint32_t level, std::uint32_t index) {
    check_level(level);
    return levels_[level - 1].at(index).st;
}

const Model::MacState& Model::state(std::uint32_t level, std::uint32_t index) const {
    check_level(level);
    return levels_[level - 1].at(index).st;
}

bool Model::operator==(const Model& other) const {
    if (model_config_to_json(cfg_) != model_config_to_json(other.cfg_)) return false;
    for (std::size_t l = 0; l < levels_.size(); ++l) {
        for (std::size_t m = 0; m < levels_[l].size(); ++m) {
            const Mac& a = levels_[l][m].mac;
            const Mac& b = other.levels_[l][m].mac;
            if (a.stored_count() != b.stored_count()) return false;
            for (Source src : {Source::U, Source::H, Source::D})
                if (!(a.weights(src) == b.weights(src))) return false;
        }
    }
    return true;
}

Model build_model(const ModelConfig& cfg) { return Model(cfg); }

namespace {

// Membership bitmap over the lower level's element space.
std::vector<std::uint8_t> lower_bitmap(const Model& model, std::uint32_t level,
                                       const std::vector<std::uint32_t>& lower_active) {
    const ModelConfig& cfg = model.config();
    const std::uint32_t space = level == 1
                                    ? cfg.input_rows * cfg.input_cols
                                    : cfg.levels[level - 2].mac_count();
    std::vector<std::uint8_t> bitmap(space, 0);
    for (std::uint32_t id : lower_active) {
        if (id >= space)
            throw ShapeError("gate: lower element id out of range: " + std::to_string(id));
        bitmap[id] = 1;
    }
    return bitmap;
}

std::uint32_t rf_active_count(const std::vector<std::uint32_t>& rf,
                              const std::vector<std::uint8_t>& bitmap) {
    std::uint32_t n = 0;
    for (std::uint32_t id : rf) n += bitmap[id];
    return n;
}

}  // namespace

std::vector<std::uint32_t> gate_macs(const Model& model, std::uint32_t level,
                                     const std::vector<std::uint32_t>& lower_active) {
    if (level == 0 || level > model.level_count())
        throw ShapeError("gate: level index out of range: " + std::to_string(level));
    const LevelConfig& lv = model.config().levels[level - 1];
    const std::vector<std::uint8_t> bitmap = lower_bitmap(model, level, lower_active);
    std::vector<std::uint32_t> gated;
    for (std::uint32_t m = 0; m < model.mac_count(level); ++m) {
        const std::uint32_t n = rf_active_count(model.rf_elements(level, m), bitmap);
        if (n >= lv.pi_min && n <= lv.effective_pi_max()) gated.push_back(m);
    }
    return gated;
}

TraceStep process_frame(Model& model, const BinaryFrame& frame, std::int64_t t, Mode mode,
                        const Rng& base) {
    const ModelConfig& cfg = model.config();
    if (frame.height != cfg.input_rows || frame.width != cfg.input_cols)
        throw ShapeError("process_frame: frame is " + std::to_string(frame.height) + "x" +
                         std::to_string(frame.width) + ", model expects " +
                         std::to_string(cfg.input_rows) + "x" + std::to_string(cfg.input_cols));

    TraceStep step;
    step.t = t;
    step.input_ones = frame.count_ones();

    std::vector<std::uint32_t> lower_active = frame.active_indices();
    for (std::uint32_t level = 1; level <= model.level_count(); ++level) {
        const LevelConfig& lv = cfg.levels[level - 1];
        const std::uint32_t lower_units =
            level == 1 ? 0 : cfg.levels[level - 2].q * cfg.levels[level - 2].k;
        const std::vector<std::uint8_t> bitmap = lower_bitmap(model, level, lower_active);

        std::vector<std::uint32_t> this_active;
        for (std::uint32_t m = 0; m < model.mac_count(level); ++m) {
            Model::MacState& st = model.state(level, m);
            const bool held =
                st.win_time >= 0 && t > st.win_time && t < st.win_time + lv.persistence;
            bool active = false;
            if (held) {
                active = true;
            } else {
                const std::vector<std::uint32_t>& rf = model.rf_elements(level, m);
                const std::uint32_t n = rf_active_count(rf, bitmap);
                if (n >= lv.pi_min && n <= lv.effective_pi_max()) {
                    InputVector input;
                    for (std::uint32_t p = 0; p < rf.size(); ++p) {
                        if (!bitmap[rf[p]]) continue;
                        if (level == 1) {
                            input.active_u.push_back(p);
                        } else {
                            const Code& low = model.state(level - 1, rf[p]).code;
                            const std::uint32_t k_low = cfg.levels[level - 2].k;
                            for (std::uint32_t q = 0; q < low.winners.size(); ++q)
                                input.active_u.push_back(p * lower_units + q * k_low +
                                                         low.winners[q]);
                        }
                    }
                    if (lv.recurrent && st.prev_active)
                        for (std::uint32_t q = 0; q < st.prev_code.winners.size(); ++q)
                            input.active_h.push_back(q * lv.k + st.prev_code.winners[q]);
                    if (!input.all_empty()) {
                        Mac& mac = model.mac_at(level, m);
                        Rng rng = base.derive({level, m, static_cast<std::uint64_t>(t)});
                        const UnitActivations acts = compute_activations(mac, input);
                        const double g = compute_familiarity(acts);
                        const Code code = select_code(mac, acts, g, mode, rng);
                        if (mode == Mode::learning) learn(mac, input, code);
                        st.win_time = t;
                        st.code = code;
                        active = true;
                    }
                }
            }
            st.active = active;
            if (active) {
                this_active.push_back(m);
                step.active.push_back(TraceEntry{level, m, st.code});
            }
        }
        lower_active = std::move(this_active);
    }

    for (std::uint32_t level = 1; level <= model.level_count(); ++level) {
        for (std::uint32_t m = 0; m < model.mac_count(level); ++m) {
            Model::MacState& st = model.state(level, m);
            st.prev_active = st.active;
            st.prev_code = st.code;
        }
    }
    return step;
}

Trace process_sequence(Model& model, const std::vector<BinaryFrame>& frames, Mode mode,
                       const Rng& base) {
    if (frames.empty()) throw EmptyInputError("process_sequence: no frames");
    model.reset_sequence();
    Trace trace;
    for (std::uint32_t level = 1; level <= model.level_count(); ++level) {
        const LevelConfig& lv = model.config().levels[level - 1];
        trace.level_macs.push_back(model.mac_count(level));
        trace.level_q.push_back(lv.q);
        trace.level_k.push_back(lv.k);
    }
    for (std::size_t t = 0; t < frames.size(); ++t)
        trace.steps.push_back(process_frame(model, frames[t], static_cast<std::int64_t>(t), mode, base));
    return trace;
}

double recognition_match(const Trace& a, const Trace& b) {
    if (!a.same_geometry(b))
        throw ShapeError("recognition_match: traces come from different model geometries");
    std::uint64_t total = 0;
    std::uint64_t matched = 0;
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const TraceStep& sa = a.steps[i];
        const TraceStep* sb = i < b.steps.size() ? &b.steps[i] : nullptr;
        for (const TraceEntry& ea : sa.active) {
            total += ea.code.winners.size();
            if (!sb) continue;
            const auto it = std::find_if(sb->active.begin(), sb->active.end(),
                                         [&](const TraceEntry& eb) {
                                             return eb.level == ea.level && eb.mac == ea.mac;
                                         });
            if (it == sb->active.end()) continue;
            matched += code_intersection(ea.code, it->code);
        }
    }
    if (total == 0) return 1.0;  // two silent traces agree vacuously
    return static_cast<double>(matched) / static_cast<double>(total);
}

std::vector<std::uint8_t> top_code_vector(const Model& model, const Trace& trace) {
    const std::uint32_t top = model.level_count();
    const LevelConfig& lv = model.config().levels[top - 1];
    if (trace.level_macs.size() != model.level_count() ||
        trace.level_macs[top - 1] != model.mac_count(top) || trace.level_q[top - 1] != lv.q ||
        trace.level_k[top - 1] != lv.k)
        throw ShapeError("top_code_vector: trace does not match the model's geometry");
    if (trace.steps.empty()) throw EmptyInputError("top_code_vector: empty trace");

    const std::uint32_t units = lv.q * lv.k;
    std::vector<std::uint8_t> vec(static_cast<std::size_t>(model.mac_count(top)) * units, 0);
    for (const TraceEntry& e : trace.steps.back().active) {
        if (e.level != top) continue;
        for (std::uint32_t q = 0; q < e.code.winners.size(); ++q)
            vec[static_cast<std::size_t>(e.mac) * units + q * lv.k + e.code.winners[q]] = 1;
    }
    return vec;
}

BinaryFrame decode_topdown(const Model& model, std::uint32_t level,
                           const std::vector<std::pair<std::uint32_t, Code>>& active) {
    const ModelConfig& cfg = model.config();
    if (!cfg.topdown) throw ConfigError("decode_topdown: model built without topdown=true");
    if (level == 0 || level > model.level_count())
        throw ShapeError("decode_topdown: level index out of range: " + std::to_string(level));

    // Active unit sets per mac at the current level of the walk.
    std::vector<std::vector<std::uint32_t>> units(model.mac_count(level));
    for (const auto& [m, code] : active) {
        const LevelConfig& lv = cfg.levels[level - 1];
        if (m >= model.mac_count(level))
            throw ShapeError("decode_topdown: mac index out of range: " + std::to_string(m));
        if (code.winners.size() != lv.q)
            throw ShapeError("decode_topdown: code has wrong number of winners");
        for (std::uint32_t q = 0; q < lv.q; ++q) {
            if (code.winners[q] >= lv.k) throw ShapeError("decode_topdown: winner out of range");
            units[m].push_back(q * lv.k + code.winners[q]);
        }
    }

    for (std::uint32_t l = level; l >= 2; --l) {
        const std::uint32_t lower_units = cfg.levels[l - 2].q * cfg.levels[l - 2].k;
        std::vector<std::vector<std::uint32_t>> below(model.mac_count(l - 1));
        for (std::uint32_t m = 0; m < units.size(); ++m) {
            if (units[m].empty()) continue;
            const Mac& mac = model.mac_at(l, m);
            const std::vector<std::uint32_t>& rf = model.rf_elements(l, m);
            for (std::uint32_t u : units[m]) {
                for (std::uint32_t j : mac.weights(Source::U).row_indices(u)) {
                    const std::uint32_t p = j / lower_units;
                    below[rf[p]].push_back(j % lower_units);
                }
            }
        }
        for (auto& set : below) {
            std::sort(set.begin(), set.end());
            set.erase(std::unique(set.begin(), set.end()), set.end());
        }
        units = std::move(below);
    }

    BinaryFrame out(cfg.input_cols, cfg.input_rows);
    for (std::uint32_t m = 0; m < units.size(); ++m) {
        if (units[m].empty()) continue;
        const Mac& mac = model.mac_at(1, m);
        const std::vector<std::uint32_t>& rf = model.rf_elements(1, m);
        std::vector<std::uint8_t> seen(mac.config().units(), 0);
        for (std::uint32_t u : units[m]) {
            if (seen[u]) continue;
            seen[u] = 1;
            for (std::uint32_t j : mac.weights(Source::U).row_indices(u)) out.bits[rf[j]] = 1;
        }
    }
    return out;
}

namespace {

constexpr char kModelMagic[4] = {'S', 'P', 'R', 'M'};
constexpr std::uint16_t kModelFormatVersion = 1;

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* data, std::size_t size, std::size_t& pos) {
    if (pos + 2 > size) throw DataError("model file: truncated");
    std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return v;
}

std::uint32_t get_u32(const std::uint8_t* data, std::size_t size, std::size_t& pos) {
    if (pos + 4 > size) throw DataError("model file: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t get_u64(const std::uint8_t* data, std::size_t size, std::size_t& pos) {
    if (pos + 8 > size) throw DataError("model file: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kModelMagic, kModelMagic + 4);
    put_u16(buf, kModelFormatVersion);
    const std::string cfg_json = model_config_to_json(model.config());
    put_u32(buf, static_cast<std::uint32_t>(cfg_json.size()));
    buf.insert(buf.end(), cfg_json.begin(), cfg_json.end());
    std::uint32_t total = 0;
    for (std::uint32_t level = 1; level <= model.level_count(); ++level)
        total += model.mac_count(level);
    put_u32(buf, total);
    for (std::uint32_t level = 1; level <= model.level_count(); ++level) {
        for (std::uint32_t m = 0; m < model.mac_count(level); ++m) {
            const Mac& mac = model.mac_at(level, m);
            put_u64(buf, mac.stored_count());
            mac.serialize(buf);
        }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("save_model: cannot open " + tmp);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) throw DataError("save_model: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw DataError("save_model: cannot rename " + tmp + " to " + path);
    }
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_model: cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    if (buf.size() < 4 || !std::equal(kModelMagic, kModelMagic + 4, buf.begin()))
        throw DataError("load_model: bad magic in " + path);
    pos = 4;
    const std::uint16_t version = get_u16(buf.data(), buf.size(), pos);
    if (version != kModelFormatVersion)
        throw DataError("load_model: unsupported format version " + std::to_string(version));
    const std::uint32_t json_len = get_u32(buf.data(), buf.size(), pos);
    if (pos + json_len > buf.size()) throw DataError("model file: truncated");
    const std::string cfg_json(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                               buf.begin() + static_cast<std::ptrdiff_t>(pos + json_len));
    pos += json_len;

    Model model(parse_model_config(cfg_json));
    const std::uint32_t total = get_u32(buf.data(), buf.size(), pos);
    std::uint32_t expected = 0;
    for (std::uint32_t level = 1; level <= model.level_count(); ++level)
        expected += model.mac_count(level);
    if (total != expected) throw DataError("load_model: mac count does not match the config");

    for (std::uint32_t level = 1; level <= model.level_count(); ++level) {
        for (std::uint32_t m = 0; m < model.mac_count(level); ++m) {
            const std::uint64_t stored = get_u64(buf.data(), buf.size(), pos);
            Mac loaded = Mac::deserialize(buf.data(), buf.size(), pos);
            Mac& dst = model.mac_at(level, m);
            const MacConfig& want = dst.config();
            const MacConfig& got = loaded.config();
            if (got.Q != want.Q || got.K != want.K || got.nU != want.nU || got.nH != want.nH ||
                got.nD != want.nD)
                throw DataError("load_model: mac geometry does not match the config");
            loaded.set_csa(want.csa);
            loaded.set_stored_count(stored);
            dst = std::move(loaded);
        }
    }
    if (pos != buf.size()) throw DataError("load_model: trailing bytes in " + path);
    return model;
}

void write_trace_jsonl(const Trace& trace, std::ostream& out) {
    for (const TraceStep& step : trace.steps) {
        json j;
        j["t"] = step.t;
        j["input_ones"] = step.input_ones;
        j["active"] = json::array();
        for (const TraceEntry& e : step.active) {
            json ej;
            ej["level"] = e.level;
            ej["mac"] = e.mac;
            ej["code"] = e.code.winners;
            j["active"].push_back(ej);
        }
        out << j.dump() << "\n";
    }
}

}  // namespace sprs
