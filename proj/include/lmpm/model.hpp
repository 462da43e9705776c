#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lmpm/autodiff.hpp"
#include "lmpm/memory.hpp"
#include "lmpm/rng.hpp"
#include "lmpm/vocab.hpp"

namespace lmpm {

struct ModelConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 2;
    int d_ff = 128;
    int max_len = 64;
    int vocab_size = 0;
    int d_m = 64;
    int slots = 7;

    void validate() const {
        auto positive = [](int v, const char* name) {
            if (v < 1) throw ConfigError(std::string(name) + " must be positive");
        };
        positive(d_model, "d_model");
        positive(n_layers, "n_layers");
        positive(n_heads, "n_heads");
        positive(d_ff, "d_ff");
        positive(max_len, "max_len");
        positive(vocab_size, "vocab_size");
        positive(d_m, "d_m");
        positive(slots, "slots");
        if (d_model % n_heads != 0) {
            throw ConfigError("d_model " + std::to_string(d_model) +
                              " not divisible by n_heads " + std::to_string(n_heads));
        }
    }

    int head_dim() const { return d_model / n_heads; }
};

namespace nn {

struct Attention {
    // one weight set per head; outputs are summed back into model width
    std::vector<ad::TensorPtr> wq, bq, wk, bk, wv, bv, wo;
    ad::TensorPtr wo_b;

    static Attention init(Rng& rng, int d_model, int n_heads) {
        const int dh = d_model / n_heads;
        Attention a;
        for (int h = 0; h < n_heads; ++h) {
            a.wq.push_back(ad::Tensor::param({d_model, dh}, rng));
            a.bq.push_back(ad::Tensor::param_const({dh}, 0.0));
            a.wk.push_back(ad::Tensor::param({d_model, dh}, rng));
            a.bk.push_back(ad::Tensor::param_const({dh}, 0.0));
            a.wv.push_back(ad::Tensor::param({d_model, dh}, rng));
            a.bv.push_back(ad::Tensor::param_const({dh}, 0.0));
            a.wo.push_back(ad::Tensor::param({dh, d_model}, rng));
        }
        a.wo_b = ad::Tensor::param_const({d_model}, 0.0);
        return a;
    }

    // queries from x, keys/values from ctx; mask is additive or null
    ad::TensorPtr run(ad::Tape* tape, const ad::TensorPtr& x, const ad::TensorPtr& ctx,
                      const ad::TensorPtr& mask) const {
        const int dh = wq[0]->shape[1];
        const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
        ad::TensorPtr out;
        for (std::size_t h = 0; h < wq.size(); ++h) {
            auto q = ad::add_bias(tape, ad::matmul(tape, x, wq[h]), bq[h]);
            auto k = ad::add_bias(tape, ad::matmul(tape, ctx, wk[h]), bk[h]);
            auto v = ad::add_bias(tape, ad::matmul(tape, ctx, wv[h]), bv[h]);
            auto scores = ad::scale(tape, ad::matmul(tape, q, ad::transpose(tape, k)), inv_sqrt_dh);
            if (mask) scores = ad::add(tape, scores, mask);
            auto mixed = ad::matmul(tape, ad::softmax(tape, scores), v);
            auto proj = ad::matmul(tape, mixed, wo[h]);
            out = out ? ad::add(tape, out, proj) : proj;
        }
        return ad::add_bias(tape, out, wo_b);
    }

    void collect(std::vector<std::pair<std::string, ad::TensorPtr>>& out,
                 const std::string& prefix) const {
        for (std::size_t h = 0; h < wq.size(); ++h) {
            const std::string p = prefix + ".h" + std::to_string(h);
            out.emplace_back(p + ".wq", wq[h]);
            out.emplace_back(p + ".bq", bq[h]);
            out.emplace_back(p + ".wk", wk[h]);
            out.emplace_back(p + ".bk", bk[h]);
            out.emplace_back(p + ".wv", wv[h]);
            out.emplace_back(p + ".bv", bv[h]);
            out.emplace_back(p + ".wo", wo[h]);
        }
        out.emplace_back(prefix + ".wo_b", wo_b);
    }
};

struct LayerNormParams {
    ad::TensorPtr gain, bias;

    static LayerNormParams init(int width) {
        return {ad::Tensor::param_const({width}, 1.0), ad::Tensor::param_const({width}, 0.0)};
    }

    ad::TensorPtr run(ad::Tape* tape, const ad::TensorPtr& x) const {
        return ad::layer_norm(tape, x, gain, bias);
    }

    void collect(std::vector<std::pair<std::string, ad::TensorPtr>>& out,
                 const std::string& prefix) const {
        out.emplace_back(prefix + ".g", gain);
        out.emplace_back(prefix + ".b", bias);
    }
};

struct FeedForward {
    ad::TensorPtr w1, b1, w2, b2;

    static FeedForward init(Rng& rng, int d_model, int d_ff) {
        return {ad::Tensor::param({d_model, d_ff}, rng), ad::Tensor::param_const({d_ff}, 0.0),
                ad::Tensor::param({d_ff, d_model}, rng), ad::Tensor::param_const({d_model}, 0.0)};
    }

    ad::TensorPtr run(ad::Tape* tape, const ad::TensorPtr& x) const {
        auto h = ad::gelu(tape, ad::add_bias(tape, ad::matmul(tape, x, w1), b1));
        return ad::add_bias(tape, ad::matmul(tape, h, w2), b2);
    }

    void collect(std::vector<std::pair<std::string, ad::TensorPtr>>& out,
                 const std::string& prefix) const {
        out.emplace_back(prefix + ".w1", w1);
        out.emplace_back(prefix + ".b1", b1);
        out.emplace_back(prefix + ".w2", w2);
        out.emplace_back(prefix + ".b2", b2);
    }
};

struct EncoderLayer {
    LayerNormParams ln1, ln2;
    Attention attn;
    FeedForward ff;

    static EncoderLayer init(Rng& rng, const ModelConfig& cfg) {
        EncoderLayer l;
        l.ln1 = LayerNormParams::init(cfg.d_model);
        l.attn = Attention::init(rng, cfg.d_model, cfg.n_heads);
        l.ln2 = LayerNormParams::init(cfg.d_model);
        l.ff = FeedForward::init(rng, cfg.d_model, cfg.d_ff);
        return l;
    }

    ad::TensorPtr run(ad::Tape* tape, ad::TensorPtr x) const {
        auto n1 = ln1.run(tape, x);
        x = ad::add(tape, x, attn.run(tape, n1, n1, nullptr));
        x = ad::add(tape, x, ff.run(tape, ln2.run(tape, x)));
        return x;
    }

    void collect(std::vector<std::pair<std::string, ad::TensorPtr>>& out,
                 const std::string& prefix) const {
        ln1.collect(out, prefix + ".ln1");
        attn.collect(out, prefix + ".attn");
        ln2.collect(out, prefix + ".ln2");
        ff.collect(out, prefix + ".ff");
    }
};

struct DecoderLayer {
    LayerNormParams ln1, lnx, ln2;
    Attention self_attn, cross_attn;
    FeedForward ff;

    static DecoderLayer init(Rng& rng, const ModelConfig& cfg) {
        DecoderLayer l;
        l.ln1 = LayerNormParams::init(cfg.d_model);
        l.self_attn = Attention::init(rng, cfg.d_model, cfg.n_heads);
        l.lnx = LayerNormParams::init(cfg.d_model);
        l.cross_attn = Attention::init(rng, cfg.d_model, cfg.n_heads);
        l.ln2 = LayerNormParams::init(cfg.d_model);
        l.ff = FeedForward::init(rng, cfg.d_model, cfg.d_ff);
        return l;
    }

    ad::TensorPtr run(ad::Tape* tape, ad::TensorPtr x, const ad::TensorPtr& enc_hidden,
                      const ad::TensorPtr& mask) const {
        auto n1 = ln1.run(tape, x);
        x = ad::add(tape, x, self_attn.run(tape, n1, n1, mask));
        x = ad::add(tape, x, cross_attn.run(tape, lnx.run(tape, x), enc_hidden, nullptr));
        x = ad::add(tape, x, ff.run(tape, ln2.run(tape, x)));
        return x;
    }

    void collect(std::vector<std::pair<std::string, ad::TensorPtr>>& out,
                 const std::string& prefix) const {
        ln1.collect(out, prefix + ".ln1");
        self_attn.collect(out, prefix + ".self");
        lnx.collect(out, prefix + ".lnx");
        cross_attn.collect(out, prefix + ".cross");
        ln2.collect(out, prefix + ".ln2");
        ff.collect(out, prefix + ".ff");
    }
};

}  // namespace nn

struct EncoderOutput {
    ad::TensorPtr hidden;  // [T, d_model]
    ad::TensorPtr h_z;     // hidden row at the <z> position (0)
};

struct TransformerSeq2Seq {
    ModelConfig cfg;
    ad::TensorPtr tok_emb;           // [V, d_model], shared by both stacks
    ad::TensorPtr pos_enc, pos_dec;  // [max_len, d_model]
    std::vector<nn::EncoderLayer> enc_layers;
    std::vector<nn::DecoderLayer> dec_layers;
    nn::LayerNormParams enc_ln, dec_ln;
    ad::TensorPtr out_w, out_b;  // [d_model, V], [V]

    static TransformerSeq2Seq init(Rng& rng, const ModelConfig& cfg) {
        cfg.validate();
        TransformerSeq2Seq m;
        m.cfg = cfg;
        m.tok_emb = ad::Tensor::param({cfg.vocab_size, cfg.d_model}, rng);
        m.pos_enc = ad::Tensor::param({cfg.max_len, cfg.d_model}, rng);
        m.pos_dec = ad::Tensor::param({cfg.max_len, cfg.d_model}, rng);
        for (int i = 0; i < cfg.n_layers; ++i) m.enc_layers.push_back(nn::EncoderLayer::init(rng, cfg));
        m.enc_ln = nn::LayerNormParams::init(cfg.d_model);
        for (int i = 0; i < cfg.n_layers; ++i) m.dec_layers.push_back(nn::DecoderLayer::init(rng, cfg));
        m.dec_ln = nn::LayerNormParams::init(cfg.d_model);
        m.out_w = ad::Tensor::param({cfg.d_model, cfg.vocab_size}, rng);
        m.out_b = ad::Tensor::param_const({cfg.vocab_size}, 0.0);
        return m;
    }

    std::vector<std::pair<std::string, ad::TensorPtr>> params(const std::string& prefix) const {
        std::vector<std::pair<std::string, ad::TensorPtr>> out;
        out.emplace_back(prefix + ".tok_emb", tok_emb);
        out.emplace_back(prefix + ".pos_enc", pos_enc);
        out.emplace_back(prefix + ".pos_dec", pos_dec);
        for (std::size_t i = 0; i < enc_layers.size(); ++i)
            enc_layers[i].collect(out, prefix + ".enc" + std::to_string(i));
        enc_ln.collect(out, prefix + ".enc_ln");
        for (std::size_t i = 0; i < dec_layers.size(); ++i)
            dec_layers[i].collect(out, prefix + ".dec" + std::to_string(i));
        dec_ln.collect(out, prefix + ".dec_ln");
        out.emplace_back(prefix + ".out_w", out_w);
        out.emplace_back(prefix + ".out_b", out_b);
        return out;
    }

    EncoderOutput encode(ad::Tape* tape, const std::vector<int>& ids) const {
        if (ids.empty()) throw InputError("encode: empty input");
        if (static_cast<int>(ids.size()) > cfg.max_len) {
            throw InputError("input length " + std::to_string(ids.size()) + " exceeds max_len " +
                             std::to_string(cfg.max_len));
        }
        const int t = static_cast<int>(ids.size());
        auto x = ad::add(tape, ad::embedding_lookup(tape, tok_emb, ids),
                         ad::slice_rows(tape, pos_enc, 0, t));
        for (const auto& layer : enc_layers) x = layer.run(tape, x);
        x = enc_ln.run(tape, x);
        return {x, ad::row(tape, x, 0)};
    }

    // Causal decoder over the prefix with cross-attention to the encoder
    // states. A non-null f_z is added into the start-token embedding before
    // positions; mem supplies the width adapter when needed.
    ad::TensorPtr decode_logits(ad::Tape* tape, const ad::TensorPtr& enc_hidden,
                                const std::vector<int>& prefix, const ad::TensorPtr& f_z,
                                const PatternMemory* mem) const {
        if (prefix.empty()) throw InputError("decode: empty prefix");
        if (prefix[0] != kBosId) throw InputError("decode: prefix must begin with <s>");
        if (static_cast<int>(prefix.size()) > cfg.max_len) {
            throw InputError("prefix length " + std::to_string(prefix.size()) +
                             " exceeds max_len " + std::to_string(cfg.max_len));
        }
        const int t = static_cast<int>(prefix.size());
        auto emb = ad::embedding_lookup(tape, tok_emb, prefix);
        if (f_z) {
            if (!mem) throw ConfigError("decode: f_z given without a pattern memory");
            auto e0 = inject(tape, f_z, ad::row(tape, emb, 0), *mem);
            emb = t > 1 ? ad::concat_rows(tape, {e0, ad::slice_rows(tape, emb, 1, t)})
                        : ad::concat_rows(tape, {e0});
        }
        auto x = ad::add(tape, emb, ad::slice_rows(tape, pos_dec, 0, t));
        auto mask = ad::causal_mask(t);
        for (const auto& layer : dec_layers) x = layer.run(tape, x, enc_hidden, mask);
        x = dec_ln.run(tape, x);
        return ad::add_bias(tape, ad::matmul(tape, x, out_w), out_b);
    }

    // Argmax decoding from <s>; returns generated ids without <s>/</s>.
    std::vector<int> greedy_decode(const ad::TensorPtr& enc_hidden, const ad::TensorPtr& f_z,
                                   const PatternMemory* mem, int max_steps) const {
        if (max_steps < 1) throw ConfigError("greedy_decode: max_steps must be >= 1");
        std::vector<int> prefix = {kBosId};
        std::vector<int> out;
        for (int step = 0; step < max_steps; ++step) {
            if (static_cast<int>(prefix.size()) >= cfg.max_len) break;
            auto logits = decode_logits(nullptr, enc_hidden, prefix, f_z, mem);
            const int last = logits->rows() - 1;
            const int v = logits->cols();
            int best = 0;
            double best_val = logits->at(last, 0);
            for (int j = 1; j < v; ++j) {
                if (logits->at(last, j) > best_val) {
                    best_val = logits->at(last, j);
                    best = j;
                }
            }
            if (best == kEosId) break;
            out.push_back(best);
            prefix.push_back(best);
        }
        return out;
    }
};

struct BowHead {
    ad::TensorPtr weight;  // [(d_model + d_m), V]
    ad::TensorPtr bias;    // [V]

    static BowHead init(Rng& rng, const ModelConfig& cfg) {
        return {ad::Tensor::param({cfg.d_model + cfg.d_m, cfg.vocab_size}, rng),
                ad::Tensor::param_const({cfg.vocab_size}, 0.0)};
    }

    std::vector<std::pair<std::string, ad::TensorPtr>> params(const std::string& prefix) const {
        return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
    }
};

// Teacher-forced negative log-likelihood, summed over positions.
inline ad::TensorPtr lm_loss(ad::Tape* tape, const ad::TensorPtr& logits,
                             const std::vector<int>& target) {
    return ad::cross_entropy(tape, logits, target);
}

// Order-free conclusion-token prediction from the premises' summary and the
// looked-up pattern.
inline ad::TensorPtr bow_loss(ad::Tape* tape, const ad::TensorPtr& f_z, const ad::TensorPtr& h_z,
                              const std::vector<int>& target, const BowHead& head) {
    if (target.empty()) throw InputError("bow_loss: empty target");
    auto logits = ad::add(tape, ad::vecmat(tape, ad::concat(tape, h_z, f_z), head.weight),
                          head.bias);
    return ad::nll_bag(tape, logits, target);
}

inline ad::TensorPtr total_pretrain_loss(ad::Tape* tape, const ad::TensorPtr& lm,
                                         const ad::TensorPtr& bow) {
    return ad::add(tape, lm, bow);
}

}  // namespace lmpm
