#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmpm/dataset.hpp"
#include "lmpm/error.hpp"
#include "lmpm/memory.hpp"
#include "lmpm/model.hpp"
#include "lmpm/rng.hpp"
#include "lmpm/vocab.hpp"

namespace lmpm::train {

enum class Phase { pretrain, finetune };

inline const char* phase_name(Phase p) {
    return p == Phase::pretrain ? "pretrain" : "finetune";
}

// Run-wide knobs for one optimization phase. `no_abstraction` lives here so a
// whole run is described by one record, but only the data layer reads it.
struct TrainConfig {
    Phase phase = Phase::pretrain;
    int epochs = 1;
    int batch_size = 4;
    double lr = 1e-3;
    double temperature_start = 1.0;  // selection temperature, linear schedule
    double temperature_end = 1.0;
    std::uint64_t seed = 0;
    bool no_lpp = false;           // skip the pattern pre-training phase
    bool no_memory = false;        // bypass selection; pure seq2seq
    bool no_abstraction = false;   // feed raw instead of abstracted triples
    bool freeze_memory = false;    // M, address head and proj stay fixed
    bool bow_in_finetune = false;  // keep the bag loss during fine-tuning
    double pretrain_fraction = 1.0;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be positive");
        if (batch_size < 1) throw ConfigError("batch_size must be positive");
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
        if (!(temperature_start > 0.0) || !(temperature_end > 0.0)) {
            throw ConfigError("temperature schedule must stay positive");
        }
        if (!(pretrain_fraction > 0.0) || pretrain_fraction > 1.0) {
            throw ConfigError("pretrain_fraction must lie in (0, 1]");
        }
    }
};

// Every random draw in a run derives from one user seed; distinct purposes
// get decorrelated substreams so adding draws to one never shifts another.
enum : std::uint64_t {
    kInitStream = 0,
    kDataStream = 1,
    kNoiseStream = 2,
    kFractionStream = 3,
};

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Transformer + pattern memory + bag-of-words head as one trainable unit.
// The transformer is drawn first so a bare seq2seq initialized from the same
// stream starts bit-identical regardless of the memory's extra draws.
struct LmpmModel {
    ModelConfig cfg;
    TransformerSeq2Seq net;
    PatternMemory mem;
    BowHead bow;
    bool use_memory = true;

    static LmpmModel init(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        LmpmModel m;
        m.cfg = cfg;
        m.net = TransformerSeq2Seq::init(rng, cfg);
        m.mem = PatternMemory::init(rng, cfg.slots, cfg.d_m, cfg.d_model, cfg.d_model);
        m.bow = BowHead::init(rng, cfg);
        return m;
    }

    static LmpmModel init(const ModelConfig& cfg, std::uint64_t seed) {
        Rng rng(derive_stream(seed, kInitStream));
        return init(cfg, rng);
    }

    // Complete parameter list in checkpoint order.
    std::vector<std::pair<std::string, ad::TensorPtr>> params() const {
        auto out = net.params("net");
        for (auto& p : mem.params("mem")) out.push_back(p);
        for (auto& p : bow.params("bow")) out.push_back(p);
        return out;
    }
};

// --- optimizer ----------------------------------------------------------

inline double global_grad_norm(const std::vector<ad::TensorPtr>& params) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p->grad) sq += g * g;
    return std::sqrt(sq);
}

inline void scale_grads(const std::vector<ad::TensorPtr>& params, double s) {
    for (const auto& p : params)
        for (double& g : p->grad) g *= s;
}

inline void clip_global_norm(const std::vector<ad::TensorPtr>& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm > max_norm && norm > 0.0) scale_grads(params, max_norm / norm);
}

// Adaptive-moment optimizer with bias correction.
class Adam {
public:
    Adam(std::vector<ad::TensorPtr> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (!(lr > 0.0)) throw ConfigError("Adam lr must be positive");
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p->data.size(), 0.0);
            v_.emplace_back(p->data.size(), 0.0);
        }
    }

    void zero_grad() {
        for (const auto& p : params_) {
            p->ensure_grad();
            p->zero_grad();
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            p.ensure_grad();
            for (std::size_t k = 0; k < p.data.size(); ++k) {
                const double g = p.grad[k];
                m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
                v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
                p.data[k] -= lr_ * (m_[i][k] / bc1) / (std::sqrt(v_[i][k] / bc2) + eps_);
            }
        }
    }

    const std::vector<ad::TensorPtr>& params() const { return params_; }
    int steps_taken() const { return t_; }

private:
    std::vector<ad::TensorPtr> params_;
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// --- loss bookkeeping ----------------------------------------------------

struct LossRow {
    long step;  // 1-based optimizer step
    double lm, bow, total;
};

struct LossCurve {
    std::vector<LossRow> rows;

    double initial_total() const { return rows.empty() ? 0.0 : rows.front().total; }
    double final_total() const { return rows.empty() ? 0.0 : rows.back().total; }

    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write loss curve " + path);
        out << "step,lm_loss,bow_loss,total\n";
        char buf[128];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g\n", r.step, r.lm, r.bow,
                          r.total);
            out << buf;
        }
        if (!out) throw IoError("failed writing loss curve " + path);
    }
};

// --- example preparation --------------------------------------------------

// One training triple, tokenized and id-mapped once up front.
struct EncodedExample {
    EncodedInput input;      // [<z>, <s>, p1, </s>, p2, </s>]
    std::vector<int> prefix;  // <s> + conclusion ids (teacher forcing)
    std::vector<int> target;  // conclusion ids + </s>
    std::vector<int> bag;     // conclusion content ids for the bag loss
};

inline EncodedExample encode_example(const TripleRecord& r, const Vocabulary& vocab) {
    EncodedExample ex;
    ex.input = encode_pair(tokenize(r.p1), tokenize(r.p2), vocab);
    auto c_toks = tokenize(r.c);
    if (c_toks.empty()) throw InputError("training example has an empty conclusion");
    ex.prefix = {kBosId};
    for (const auto& t : c_toks) {
        const int id = vocab.id(t);
        ex.prefix.push_back(id);
        ex.target.push_back(id);
        ex.bag.push_back(id);
    }
    ex.target.push_back(kEosId);
    return ex;
}

// --- the optimization loop -------------------------------------------------

namespace detail {

inline double temperature_at(const TrainConfig& cfg, long step, long total_steps) {
    if (total_steps <= 1) return cfg.temperature_start;
    const double f = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return cfg.temperature_start + (cfg.temperature_end - cfg.temperature_start) * f;
}

// Shared batch loop for both phases. Per example: encode the premise pair,
// address the memory, select a pattern (Gumbel sample while pre-training,
// softmax mixture while fine-tuning), decode teacher-forced, and accumulate
// gradients; per batch: average, clip at global norm 1, one Adam step.
inline LossCurve run_phase(LmpmModel& model, const std::vector<TripleRecord>& data,
                           const TrainConfig& cfg, const Vocabulary& vocab) {
    std::vector<ad::TensorPtr> trainable;
    for (auto& [name, p] : model.net.params("net")) trainable.push_back(p);
    const bool bow_active =
        model.use_memory && (cfg.phase == Phase::pretrain || cfg.bow_in_finetune);
    if (model.use_memory && !cfg.freeze_memory) {
        for (auto& [name, p] : model.mem.params("mem")) trainable.push_back(p);
    }
    if (bow_active) {
        for (auto& [name, p] : model.bow.params("bow")) trainable.push_back(p);
    }

    auto all_params = model.params();

    std::vector<EncodedExample> examples;
    examples.reserve(data.size());
    for (const auto& r : data) examples.push_back(encode_example(r, vocab));

    Rng rng_data(derive_stream(cfg.seed, kDataStream));
    Rng rng_noise(derive_stream(cfg.seed, kNoiseStream));

    Adam opt(trainable, cfg.lr);
    const long n = static_cast<long>(examples.size());
    const long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

    std::vector<long> order(examples.size());
    std::iota(order.begin(), order.end(), 0L);

    LossCurve curve;
    curve.rows.reserve(static_cast<std::size_t>(total_steps));
    ad::Tape tape;
    long gstep = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng_data.shuffle(order);
        for (long start = 0; start < n; start += cfg.batch_size) {
            const long bn = std::min<long>(cfg.batch_size, n - start);
            const double temp = temperature_at(cfg, gstep, total_steps);
            opt.zero_grad();
            for (auto& [name, p] : all_params) p->zero_grad();
            double lm_sum = 0.0, bow_sum = 0.0;
            for (long k = 0; k < bn; ++k) {
                const auto& ex = examples[static_cast<std::size_t>(order[start + k])];
                tape.clear();
                auto enc = model.net.encode(&tape, ex.input.ids);
                ad::TensorPtr f_z;
                if (model.use_memory) {
                    auto gamma = address(&tape, enc.h_z, model.mem);
                    Selection sel = cfg.phase == Phase::pretrain
                                        ? select_gumbel(&tape, gamma, temp, rng_noise)
                                        : select_softmax(&tape, gamma);
                    f_z = lookup(&tape, sel, model.mem);
                }
                auto logits = model.net.decode_logits(&tape, enc.hidden, ex.prefix, f_z,
                                                      model.use_memory ? &model.mem : nullptr);
                auto lm = lm_loss(&tape, logits, ex.target);
                auto total = lm;
                if (bow_active) {
                    auto bow = bow_loss(&tape, f_z, enc.h_z, ex.bag, model.bow);
                    bow_sum += bow->data[0];
                    total = total_pretrain_loss(&tape, lm, bow);
                }
                lm_sum += lm->data[0];
                tape.backward(total);
            }
            scale_grads(trainable, 1.0 / static_cast<double>(bn));
            clip_global_norm(trainable, 1.0);
            opt.step();
            ++gstep;
            curve.rows.push_back({gstep, lm_sum / static_cast<double>(bn),
                                  bow_sum / static_cast<double>(bn),
                                  (lm_sum + bow_sum) / static_cast<double>(bn)});
        }
    }
    return curve;
}

}  // namespace detail

// Phase 1: learn pattern representations on the abstract corpus. `no_lpp`
// turns the whole phase into a no-op; `pretrain_fraction` takes a seeded
// subset first.
inline LossCurve pretrain(LmpmModel& model, const std::vector<TripleRecord>& data,
                          const TrainConfig& cfg, const Vocabulary& vocab) {
    cfg.validate();
    if (cfg.phase != Phase::pretrain) throw ConfigError("pretrain needs phase=pretrain");
    if (cfg.no_lpp) return {};
    if (data.empty()) throw ConfigError("pretrain: dataset is empty");
    model.use_memory = !cfg.no_memory;
    auto idx =
        select_fraction(data.size(), cfg.pretrain_fraction, derive_stream(cfg.seed, kFractionStream));
    std::vector<TripleRecord> subset;
    subset.reserve(idx.size());
    for (auto i : idx) subset.push_back(data[i]);
    return detail::run_phase(model, subset, cfg, vocab);
}

// Phase 2: adapt to real conclusion texts with softmax pattern mixing.
inline LossCurve finetune(LmpmModel& model, const std::vector<TripleRecord>& pairs,
                          const TrainConfig& cfg, const Vocabulary& vocab) {
    cfg.validate();
    if (cfg.phase != Phase::finetune) throw ConfigError("finetune needs phase=finetune");
    if (pairs.empty()) throw ConfigError("finetune: dataset is empty");
    model.use_memory = !cfg.no_memory;
    return detail::run_phase(model, pairs, cfg, vocab);
}

// --- inference helpers ------------------------------------------------------

// Pattern mixture weights for one premise pair (inference mode, no noise).
inline std::vector<double> selection_probs(const LmpmModel& m, const TripleRecord& r,
                                           const Vocabulary& vocab) {
    auto input = encode_pair(tokenize(r.p1), tokenize(r.p2), vocab);
    auto enc = m.net.encode(nullptr, input.ids);
    auto gamma = address(nullptr, enc.h_z, m.mem);
    return select_softmax(nullptr, gamma).alpha->data;
}

// Greedy conclusion for one premise pair, using softmax mixing when the
// memory is active.
inline std::vector<int> generate_conclusion(const LmpmModel& m, const EncodedInput& input,
                                            int max_steps) {
    auto enc = m.net.encode(nullptr, input.ids);
    ad::TensorPtr f_z;
    if (m.use_memory) {
        auto gamma = address(nullptr, enc.h_z, m.mem);
        f_z = lookup(nullptr, select_softmax(nullptr, gamma), m.mem);
    }
    return m.net.greedy_decode(enc.hidden, f_z, m.use_memory ? &m.mem : nullptr, max_steps);
}

// --- config (de)serialization -----------------------------------------------

namespace detail {

inline void config_get(const nlohmann::json& j, const char* key, int& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) {
        throw ConfigError(std::string("config field '") + key + "' must be an integer");
    }
    out = j[key].get<int>();
}

inline void config_get(const nlohmann::json& j, const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) {
        throw ConfigError(std::string("config field '") + key + "' must be a number");
    }
    out = j[key].get<double>();
}

inline void config_get(const nlohmann::json& j, const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) {
        throw ConfigError(std::string("config field '") + key + "' must be a boolean");
    }
    out = j[key].get<bool>();
}

inline void config_get(const nlohmann::json& j, const char* key, std::uint64_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned() && !j[key].is_number_integer()) {
        throw ConfigError(std::string("config field '") + key + "' must be an integer");
    }
    out = j[key].get<std::uint64_t>();
}

}  // namespace detail

// Overlays the keys present in `j` onto `base`; unknown keys are left to the
// caller's document (model fields, paths) and ignored here.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
    if (j.contains("phase")) {
        if (!j["phase"].is_string()) throw ConfigError("config field 'phase' must be a string");
        const auto p = j["phase"].get<std::string>();
        if (p == "pretrain") {
            base.phase = Phase::pretrain;
        } else if (p == "finetune") {
            base.phase = Phase::finetune;
        } else {
            throw ConfigError("config field 'phase' must be 'pretrain' or 'finetune'");
        }
    }
    detail::config_get(j, "epochs", base.epochs);
    detail::config_get(j, "batch_size", base.batch_size);
    detail::config_get(j, "lr", base.lr);
    detail::config_get(j, "temperature_start", base.temperature_start);
    detail::config_get(j, "temperature_end", base.temperature_end);
    detail::config_get(j, "seed", base.seed);
    detail::config_get(j, "no_lpp", base.no_lpp);
    detail::config_get(j, "no_memory", base.no_memory);
    detail::config_get(j, "no_abstraction", base.no_abstraction);
    detail::config_get(j, "freeze_memory", base.freeze_memory);
    detail::config_get(j, "bow_in_finetune", base.bow_in_finetune);
    detail::config_get(j, "pretrain_fraction", base.pretrain_fraction);
    return base;
}

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
    return {{"phase", phase_name(c.phase)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"temperature_start", c.temperature_start},
            {"temperature_end", c.temperature_end},
            {"seed", c.seed},
            {"no_lpp", c.no_lpp},
            {"no_memory", c.no_memory},
            {"no_abstraction", c.no_abstraction},
            {"freeze_memory", c.freeze_memory},
            {"bow_in_finetune", c.bow_in_finetune},
            {"pretrain_fraction", c.pretrain_fraction}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {}) {
    detail::config_get(j, "d_model", base.d_model);
    detail::config_get(j, "n_layers", base.n_layers);
    detail::config_get(j, "n_heads", base.n_heads);
    detail::config_get(j, "d_ff", base.d_ff);
    detail::config_get(j, "max_len", base.max_len);
    detail::config_get(j, "vocab_size", base.vocab_size);
    detail::config_get(j, "d_m", base.d_m);
    detail::config_get(j, "slots", base.slots);
    return base;
}

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
            {"d_ff", c.d_ff},       {"max_len", c.max_len},   {"vocab_size", c.vocab_size},
            {"d_m", c.d_m},         {"slots", c.slots}};
}

// --- checkpoints -------------------------------------------------------------

// Layout: 8-byte magic, little-endian u64 manifest length, manifest JSON
// {config, vocab_hash, params:[{name, shape}]}, then every parameter's
// doubles raw little-endian in manifest order. Round trips are bitwise.
namespace detail {

constexpr char kCkptMagic[8] = {'L', 'M', 'P', 'M', 'C', 'K', 'P', 'T'};

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t take_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IntegrityError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const LmpmModel& model,
                            std::uint64_t vocab_hash) {
    auto params = model.params();
    nlohmann::ordered_json manifest;
    auto cfg_json = model_config_to_json(model.cfg);
    cfg_json["use_memory"] = model.use_memory;
    manifest["config"] = cfg_json;
    manifest["vocab_hash"] = vocab_hash;
    auto plist = nlohmann::ordered_json::array();
    for (const auto& [name, p] : params) {
        plist.push_back({{"name", name}, {"shape", p->shape}});
    }
    manifest["params"] = plist;
    const std::string mjson = manifest.dump();

    std::string blob;
    blob.reserve(16 + mjson.size());
    blob.append(detail::kCkptMagic, 8);
    detail::put_u64_le(blob, mjson.size());
    blob += mjson;
    for (const auto& [name, p] : params) {
        for (double d : p->data) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            detail::put_u64_le(blob, bits);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("failed writing checkpoint " + path);
}

inline LmpmModel load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, detail::kCkptMagic, 8) != 0) {
        throw IntegrityError(path + " is not a checkpoint file");
    }
    const std::uint64_t mlen = detail::take_u64_le(in);
    if (mlen == 0 || mlen > (1ULL << 30)) {
        throw IntegrityError("checkpoint manifest length is implausible");
    }
    std::string mjson(mlen, '\0');
    in.read(mjson.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IntegrityError("checkpoint truncated inside the manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mjson);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.contains("config") || !manifest.contains("vocab_hash") ||
        !manifest.contains("params")) {
        throw IntegrityError("checkpoint manifest is missing a required field");
    }
    LmpmModel model;
    std::vector<std::pair<std::string, ad::TensorPtr>> params;
    try {
        const auto vocab_hash = manifest["vocab_hash"].get<std::uint64_t>();
        if (vocab_hash != expected_vocab_hash) {
            throw CompatibilityError("checkpoint was trained with a different vocabulary (hash " +
                                     std::to_string(vocab_hash) + " vs " +
                                     std::to_string(expected_vocab_hash) + ")");
        }
        ModelConfig cfg = model_config_from_json(manifest["config"]);
        model = LmpmModel::init(cfg, std::uint64_t{0});
        if (manifest["config"].contains("use_memory")) {
            model.use_memory = manifest["config"]["use_memory"].get<bool>();
        }
        params = model.params();
        const auto& plist = manifest["params"];
        if (plist.size() != params.size()) {
            throw IntegrityError("checkpoint lists " + std::to_string(plist.size()) +
                                 " parameters, model has " + std::to_string(params.size()));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& [name, p] = params[i];
            if (plist[i]["name"].get<std::string>() != name ||
                plist[i]["shape"].get<std::vector<int>>() != p->shape) {
                throw IntegrityError("checkpoint parameter mismatch at '" + name + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("checkpoint manifest is malformed: ") + e.what());
    }
    for (auto& [name, p] : params) {
        for (double& d : p->data) {
            const std::uint64_t bits = detail::take_u64_le(in);
            std::memcpy(&d, &bits, 8);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw IntegrityError("checkpoint has trailing bytes after the payload");
    }
    return model;
}

}  // namespace lmpm::train
