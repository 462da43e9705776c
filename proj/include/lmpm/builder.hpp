#pragma once

#include <algorithm>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lmpm/error.hpp"
#include "lmpm/evaluator.hpp"
#include "lmpm/trainer.hpp"
#include "lmpm/treebank.hpp"
#include "lmpm/vocab.hpp"

namespace lmpm::build {

struct BuildConfig {
    double w1 = 0.3;             // weight of pair-internal token overlap
    double w2 = 0.7;             // weight of pair-vs-hypothesis token overlap
    double stop_threshold = 0.75;  // token-F1 to the hypothesis that ends the search
    long step_cap = 0;           // 0 means 2x the sentence count
    int max_decode_steps = 64;
    std::string tree_id = "pred";
};

namespace detail {

// Greedy conclusion text for one premise pair; never empty so the result can
// feed later steps and pass tree validation. Long premises (e.g. regenerated
// intermediates) are trimmed from the back so the pair plus the four marker
// tokens fits the encoder window.
inline std::string generate_text(const train::LmpmModel& model, const Vocabulary& vocab,
                                 const std::string& p1, const std::string& p2, int max_steps) {
    auto t1 = tokenize(p1);
    auto t2 = tokenize(p2);
    const std::size_t budget = static_cast<std::size_t>(std::max(2, model.cfg.max_len - 4));
    while (t1.size() + t2.size() > budget) (t1.size() >= t2.size() ? t1 : t2).pop_back();
    const auto input = encode_pair(t1, t2, vocab);
    const std::string text = vocab.decode_text(train::generate_conclusion(model, input, max_steps));
    return text.empty() ? "<unk>" : text;
}

inline long int_suffix(const std::string& id) {
    if (!tree::is_intermediate_id(id)) return -1;
    long v = 0;
    for (std::size_t i = 3; i < id.size(); ++i) v = v * 10 + (id[i] - '0');
    return v;
}

}  // namespace detail

// Copies the gold step structure (binarized first) and regenerates every
// conclusion text with the model, feeding generated intermediates into later
// steps.
inline tree::EntailmentTree oracle_build(const tree::EntailmentTree& gold,
                                         const train::LmpmModel& model, const Vocabulary& vocab,
                                         const BuildConfig& cfg = {}) {
    tree::EntailmentTree out = tree::binarize_tree(gold);

    std::map<std::string, std::string> text;
    for (const auto& [sid, s] : out.sentences) text[sid] = s;

    for (auto& st : out.steps) {
        const std::string gen =
            detail::generate_text(model, vocab, text.at(st.premises[0]),
                                  text.at(st.premises[1]), cfg.max_decode_steps);
        text[st.conclusion_id] = gen;
        if (st.conclusion_id == "hypothesis") {
            out.hypothesis = gen;
            st.conclusion_text.clear();
        } else {
            st.conclusion_text = gen;
        }
    }

    tree::validate(out);
    return out;
}

// Iterative construction: repeatedly merge the best-scoring available pair
// until the generated conclusion is close enough to the hypothesis, one node
// remains, or the step cap is hit. The last step concludes the hypothesis;
// side branches that never fed it are pruned.
inline tree::EntailmentTree heuristic_build(const std::string& hypothesis,
                                            const std::vector<std::pair<std::string, std::string>>& sentences,
                                            const train::LmpmModel& model, const Vocabulary& vocab,
                                            const BuildConfig& cfg = {}) {
    if (sentences.size() < 2)
        throw InputError("tree construction needs at least 2 sentences, got " +
                         std::to_string(sentences.size()));
    if (hypothesis.empty()) throw InputError("tree construction needs a non-empty hypothesis");

    std::map<std::string, std::string> available;
    long next_int = 1;
    for (const auto& [sid, s] : sentences) {
        if (!available.emplace(sid, s).second)
            throw InputError("duplicate sentence id '" + sid + "'");
        next_int = std::max(next_int, detail::int_suffix(sid) + 1);
    }

    const long cap = cfg.step_cap > 0 ? cfg.step_cap : 2 * static_cast<long>(sentences.size());
    std::vector<tree::Step> steps;
    std::string final_text;

    while (true) {
        // Best unordered pair; map order makes ties fall to the
        // lexicographically smallest id pair.
        double best = -1.0;
        std::pair<std::string, std::string> pick;
        for (auto a = available.begin(); a != available.end(); ++a) {
            for (auto b = std::next(a); b != available.end(); ++b) {
                const double s = cfg.w1 * eval::token_f1(a->second, b->second) +
                                 cfg.w2 * eval::token_f1(a->second + " " + b->second, hypothesis);
                if (s > best) {
                    best = s;
                    pick = {a->first, b->first};
                }
            }
        }

        const std::string gen = detail::generate_text(model, vocab, available.at(pick.first),
                                                      available.at(pick.second), cfg.max_decode_steps);
        tree::Step st;
        st.premises = {pick.first, pick.second};
        st.conclusion_id = "int" + std::to_string(next_int++);
        st.conclusion_text = gen;
        steps.push_back(st);
        available.erase(pick.first);
        available.erase(pick.second);
        available.emplace(st.conclusion_id, gen);

        if (eval::token_f1(gen, hypothesis) >= cfg.stop_threshold || available.size() < 2 ||
            static_cast<long>(steps.size()) >= cap) {
            final_text = gen;
            break;
        }
    }

    // The last step concludes the hypothesis; drop steps outside its ancestry.
    steps.back().conclusion_id = "hypothesis";
    steps.back().conclusion_text.clear();
    std::set<std::string> needed(steps.back().premises.begin(), steps.back().premises.end());
    std::vector<tree::Step> kept;
    kept.push_back(steps.back());
    for (auto it = std::next(steps.rbegin()); it != steps.rend(); ++it) {
        if (!needed.count(it->conclusion_id)) continue;
        needed.insert(it->premises.begin(), it->premises.end());
        kept.push_back(*it);
    }
    std::reverse(kept.begin(), kept.end());

    tree::EntailmentTree out;
    out.id = cfg.tree_id;
    out.hypothesis = final_text;
    out.sentences = sentences;
    out.steps = std::move(kept);
    tree::validate(out);
    return out;
}

}  // namespace lmpm::build
