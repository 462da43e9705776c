#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lmpm/autodiff.hpp"
#include "lmpm/rng.hpp"

namespace lmpm {

enum class SelectMode { gumbel_hard, softmax_soft, bypass };

inline const char* select_mode_name(SelectMode m) {
    switch (m) {
        case SelectMode::gumbel_hard: return "gumbel_hard";
        case SelectMode::softmax_soft: return "softmax_soft";
        default: return "bypass";
    }
}

struct Selection {
    ad::TensorPtr gamma;  // slot logits
    ad::TensorPtr alpha;  // selection weights (all zero in bypass mode)
    SelectMode mode = SelectMode::bypass;
};

// External pattern store: `slots` rows of width d_m, plus the address head
// mapping the premises' summary state (width d_enc) to slot logits, and an
// optional adapter used when patterns and decoder embeddings differ in width.
struct PatternMemory {
    int slots = 0;
    int d_m = 0;
    int d_enc = 0;
    int d_model = 0;
    double temperature = 1.0;

    ad::TensorPtr m;                     // [slots, d_m]
    std::vector<ad::TensorPtr> addr_w;   // optional hidden layers, each [d_enc, d_enc]
    std::vector<ad::TensorPtr> addr_b;   // matching biases [d_enc]
    ad::TensorPtr w_z;                   // [d_enc, slots]
    ad::TensorPtr b_z;                   // [slots]
    ad::TensorPtr proj;                  // [d_m, d_model], present iff d_m != d_model

    static PatternMemory init(Rng& rng, int slots, int d_m, int d_enc, int d_model,
                              int hidden_layers = 0) {
        if (slots < 1 || d_m < 1 || d_enc < 1 || d_model < 1) {
            throw ConfigError("pattern memory dimensions must be positive");
        }
        if (hidden_layers < 0) throw ConfigError("hidden_layers must be >= 0");
        PatternMemory pm;
        pm.slots = slots;
        pm.d_m = d_m;
        pm.d_enc = d_enc;
        pm.d_model = d_model;
        pm.m = ad::Tensor::param({slots, d_m}, rng);
        for (int i = 0; i < hidden_layers; ++i) {
            pm.addr_w.push_back(ad::Tensor::param({d_enc, d_enc}, rng));
            pm.addr_b.push_back(ad::Tensor::param_const({d_enc}, 0.0));
        }
        pm.w_z = ad::Tensor::param({d_enc, slots}, rng);
        pm.b_z = ad::Tensor::param_const({slots}, 0.0);
        if (d_m != d_model) {
            pm.proj = ad::Tensor::param_const({d_m, d_model}, 0.0);
            for (int i = 0; i < std::min(d_m, d_model); ++i) pm.proj->at(i, i) = 1.0;
        }
        return pm;
    }

    std::vector<std::pair<std::string, ad::TensorPtr>> params(const std::string& prefix) const {
        std::vector<std::pair<std::string, ad::TensorPtr>> out;
        out.emplace_back(prefix + ".M", m);
        for (std::size_t i = 0; i < addr_w.size(); ++i) {
            out.emplace_back(prefix + ".addr_w" + std::to_string(i), addr_w[i]);
            out.emplace_back(prefix + ".addr_b" + std::to_string(i), addr_b[i]);
        }
        out.emplace_back(prefix + ".w_z", w_z);
        out.emplace_back(prefix + ".b_z", b_z);
        if (proj) out.emplace_back(prefix + ".proj", proj);
        return out;
    }
};

// Slot logits for one example: gamma = head(H_z), affine by default with
// optional gelu hidden layers in between.
inline ad::TensorPtr address(ad::Tape* tape, const ad::TensorPtr& h_z, const PatternMemory& mem) {
    if (h_z->ndim() != 1 || h_z->shape[0] != mem.d_enc) {
        throw ShapeError("address expects H_z of shape [" + std::to_string(mem.d_enc) +
                         "], got " + ad::shape_str(h_z->shape));
    }
    auto h = h_z;
    for (std::size_t i = 0; i < mem.addr_w.size(); ++i) {
        h = ad::gelu(tape, ad::add(tape, ad::vecmat(tape, h, mem.addr_w[i]), mem.addr_b[i]));
    }
    return ad::add(tape, ad::vecmat(tape, h, mem.w_z), mem.b_z);
}

inline Selection select_gumbel(ad::Tape* tape, const ad::TensorPtr& gamma, double temperature,
                               Rng& rng) {
    if (temperature <= 0.0) {
        throw ConfigError("gumbel temperature must be positive, got " +
                          std::to_string(temperature));
    }
    const int n = gamma->numel();
    auto noise = ad::Tensor::zeros({n});
    for (int i = 0; i < n; ++i) noise->data[i] = gumbel_noise(rng);
    Selection sel;
    sel.gamma = gamma;
    sel.alpha = ad::softmax(tape, ad::scale(tape, ad::add(tape, gamma, noise), 1.0 / temperature));
    sel.mode = SelectMode::gumbel_hard;
    return sel;
}

inline Selection select_softmax(ad::Tape* tape, const ad::TensorPtr& gamma) {
    Selection sel;
    sel.gamma = gamma;
    sel.alpha = ad::softmax(tape, gamma);
    sel.mode = SelectMode::softmax_soft;
    return sel;
}

inline Selection select_bypass(int slots) {
    Selection sel;
    sel.gamma = ad::Tensor::zeros({slots});
    sel.alpha = ad::Tensor::zeros({slots});
    sel.mode = SelectMode::bypass;
    return sel;
}

// f_z = sum_i alpha_i * M_i; bypass short-circuits to the zero pattern.
inline ad::TensorPtr lookup(ad::Tape* tape, const Selection& sel, const PatternMemory& mem) {
    if (sel.mode == SelectMode::bypass) return ad::Tensor::zeros({mem.d_m});
    if (sel.alpha->numel() != mem.slots) {
        throw ShapeError("selection has " + std::to_string(sel.alpha->numel()) +
                         " weights for " + std::to_string(mem.slots) + " slots");
    }
    return ad::vecmat(tape, sel.alpha, mem.m);
}

// Start-token embedding enrichment: E' = f_z + E, via the adapter when widths differ.
inline ad::TensorPtr inject(ad::Tape* tape, const ad::TensorPtr& f_z,
                            const ad::TensorPtr& start_embedding, const PatternMemory& mem) {
    if (f_z->ndim() != 1 || f_z->shape[0] != mem.d_m) {
        throw ShapeError("inject expects f_z of shape [" + std::to_string(mem.d_m) + "], got " +
                         ad::shape_str(f_z->shape));
    }
    if (start_embedding->ndim() != 1 || start_embedding->shape[0] != mem.d_model) {
        throw ShapeError("inject expects start embedding of shape [" +
                         std::to_string(mem.d_model) + "], got " +
                         ad::shape_str(start_embedding->shape));
    }
    if (mem.d_m == mem.d_model) {
        return ad::add(tape, f_z, start_embedding);
    }
    if (!mem.proj) {
        throw ConfigError("pattern width " + std::to_string(mem.d_m) +
                          " differs from embedding width " + std::to_string(mem.d_model) +
                          " but no adapter is present");
    }
    return ad::add(tape, ad::vecmat(tape, f_z, mem.proj), start_embedding);
}

}  // namespace lmpm
