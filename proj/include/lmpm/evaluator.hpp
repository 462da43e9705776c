#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmpm/error.hpp"
#include "lmpm/treebank.hpp"

namespace lmpm::eval {

// ---------------------------------------------------------------------------
// Text similarity scorers.

using Scorer = std::function<double(const std::string&, const std::string&)>;

namespace detail {

// Lowercase and strip a trailing plural "s" from words longer than three
// characters, so "Animals" and "animal" compare equal.
inline std::string normalize_token(std::string tok) {
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (tok.size() > 3 && tok.back() == 's') tok.pop_back();
    return tok;
}

inline std::vector<std::string> normalized_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(normalize_token(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(normalize_token(cur));
    return out;
}

inline std::map<std::string, int> token_counts(const std::vector<std::string>& toks) {
    std::map<std::string, int> out;
    for (const auto& t : toks) ++out[t];
    return out;
}

}  // namespace detail

// Bag-of-tokens F1 over normalized tokens; two empty texts count as equal.
inline double token_f1(const std::string& a, const std::string& b) {
    const auto ta = detail::normalized_tokens(a);
    const auto tb = detail::normalized_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;
    const auto ca = detail::token_counts(ta);
    const auto cb = detail::token_counts(tb);
    long common = 0;
    for (const auto& [tok, n] : ca) {
        auto it = cb.find(tok);
        if (it != cb.end()) common += std::min(n, it->second);
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(ta.size());
    const double r = static_cast<double>(common) / static_cast<double>(tb.size());
    return 2.0 * p * r / (p + r);
}

inline double exact_match(const std::string& a, const std::string& b) {
    return detail::normalized_tokens(a) == detail::normalized_tokens(b) ? 1.0 : 0.0;
}

inline Scorer scorer_by_name(const std::string& name) {
    if (name == "token-f1") return [](const std::string& a, const std::string& b) { return token_f1(a, b); };
    if (name == "exact") return [](const std::string& a, const std::string& b) { return exact_match(a, b); };
    throw ConfigError("unknown scorer '" + name + "' (available: token-f1, exact)");
}

// ---------------------------------------------------------------------------
// Intermediate-node alignment between a predicted and a gold tree.

struct Alignment {
    std::map<std::string, std::string> pred_to_gold;  // injective, partial
    std::map<std::string, double> jaccard;            // keyed by predicted id
};

namespace detail {

// Orders intermediate ids numerically ("int2" < "int10"), hypothesis last.
inline bool id_before(const std::string& a, const std::string& b) {
    const bool ha = a == "hypothesis", hb = b == "hypothesis";
    if (ha != hb) return hb;
    auto num = [](const std::string& id) -> long {
        if (id.size() > 3 && id.compare(0, 3, "int") == 0) {
            long v = 0;
            for (std::size_t i = 3; i < id.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(id[i]))) return -1;
                v = v * 10 + (id[i] - '0');
            }
            return v;
        }
        return -1;
    };
    const long na = num(a), nb = num(b);
    if (na >= 0 && nb >= 0 && na != nb) return na < nb;
    return a < b;
}

// Descendant leaf-sentence ids of every step conclusion.
inline std::map<std::string, std::set<std::string>> leaf_sets(const tree::EntailmentTree& t) {
    std::map<std::string, const tree::Step*> producer;
    for (const auto& st : t.steps) producer[st.conclusion_id] = &st;
    std::map<std::string, std::set<std::string>> memo;
    std::function<const std::set<std::string>&(const std::string&)> descend =
        [&](const std::string& id) -> const std::set<std::string>& {
        auto it = memo.find(id);
        if (it != memo.end()) return it->second;
        std::set<std::string> acc;
        const auto* st = producer.at(id);
        for (const auto& p : st->premises) {
            if (tree::is_sentence_id(p)) {
                acc.insert(p);
            } else {
                const auto& sub = descend(p);
                acc.insert(sub.begin(), sub.end());
            }
        }
        return memo.emplace(id, std::move(acc)).first->second;
    };
    for (const auto& st : t.steps) descend(st.conclusion_id);
    return memo;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    long inter = 0;
    for (const auto& x : a) inter += b.count(x) ? 1 : 0;
    const long uni = static_cast<long>(a.size() + b.size()) - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace detail

// Greedy injective matching of predicted to gold intermediates by descending
// descendant-leaf Jaccard; ties prefer the smallest gold then predicted id.
// Zero-overlap pairs stay unmatched; the hypothesis roots always match.
inline Alignment align(const tree::EntailmentTree& pred, const tree::EntailmentTree& gold) {
    const auto pred_sets = detail::leaf_sets(pred);
    const auto gold_sets = detail::leaf_sets(gold);

    Alignment out;
    out.pred_to_gold["hypothesis"] = "hypothesis";
    out.jaccard["hypothesis"] = detail::jaccard(pred_sets.at("hypothesis"), gold_sets.at("hypothesis"));

    struct Cand {
        double j;
        std::string pid, gid;
    };
    std::vector<Cand> cands;
    for (const auto& [pid, pset] : pred_sets) {
        if (pid == "hypothesis") continue;
        for (const auto& [gid, gset] : gold_sets) {
            if (gid == "hypothesis") continue;
            const double j = detail::jaccard(pset, gset);
            if (j > 0.0) cands.push_back({j, pid, gid});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.j != b.j) return a.j > b.j;
        if (a.gid != b.gid) return detail::id_before(a.gid, b.gid);
        return detail::id_before(a.pid, b.pid);
    });
    std::set<std::string> used_pred, used_gold;
    for (const auto& c : cands) {
        if (used_pred.count(c.pid) || used_gold.count(c.gid)) continue;
        used_pred.insert(c.pid);
        used_gold.insert(c.gid);
        out.pred_to_gold[c.pid] = c.gid;
        out.jaccard[c.pid] = c.j;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-dimension scores. Each returns (F1, all_correct).

namespace detail {

inline std::pair<double, bool> prf(long correct, long n_pred, long n_gold) {
    const bool all = correct == n_pred && correct == n_gold;
    if (correct == 0) return {0.0, all};
    const double p = static_cast<double>(correct) / static_cast<double>(n_pred);
    const double r = static_cast<double>(correct) / static_cast<double>(n_gold);
    return {2.0 * p * r / (p + r), all};
}

}  // namespace detail

// F1 over the sets of leaf sentence ids used by each tree.
inline std::pair<double, bool> leaves_score(const tree::EntailmentTree& pred,
                                            const tree::EntailmentTree& gold) {
    const auto pl = pred.leaves_used();
    const auto gl = gold.leaves_used();
    const std::set<std::string> ps(pl.begin(), pl.end());
    const std::set<std::string> gs(gl.begin(), gl.end());
    long correct = 0;
    for (const auto& s : ps) correct += gs.count(s) ? 1 : 0;
    return detail::prf(correct, static_cast<long>(ps.size()), static_cast<long>(gs.size()));
}

// A predicted step is correct when its premise multiset, with intermediate ids
// mapped through the alignment, equals a gold step's premise multiset; each
// gold step gives credit once.
inline std::pair<double, bool> steps_score(const tree::EntailmentTree& pred,
                                           const tree::EntailmentTree& gold,
                                           const Alignment& alignment) {
    auto key = [](std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    std::vector<std::vector<std::string>> gold_keys;
    for (const auto& st : gold.steps) gold_keys.push_back(key(st.premises));
    std::vector<bool> taken(gold_keys.size(), false);

    long correct = 0;
    for (const auto& st : pred.steps) {
        std::vector<std::string> mapped;
        for (const auto& p : st.premises) {
            if (tree::is_sentence_id(p)) {
                mapped.push_back(p);
            } else {
                auto it = alignment.pred_to_gold.find(p);
                // Unaligned intermediates can never equal a gold premise.
                mapped.push_back(it != alignment.pred_to_gold.end() ? it->second : "?" + p);
            }
        }
        const auto k = key(std::move(mapped));
        for (std::size_t i = 0; i < gold_keys.size(); ++i) {
            if (!taken[i] && gold_keys[i] == k) {
                taken[i] = true;
                ++correct;
                break;
            }
        }
    }
    return detail::prf(correct, static_cast<long>(pred.steps.size()),
                       static_cast<long>(gold.steps.size()));
}

// An aligned predicted intermediate is correct when the scorer rates its text
// against the gold text strictly above the threshold. Unaligned predictions
// cost precision; unmatched golds cost recall.
inline std::pair<double, bool> intermediates_score(const tree::EntailmentTree& pred,
                                                   const tree::EntailmentTree& gold,
                                                   const Alignment& alignment,
                                                   const Scorer& scorer,
                                                   double threshold) {
    long correct = 0;
    for (const auto& st : pred.steps) {
        auto it = alignment.pred_to_gold.find(st.conclusion_id);
        if (it == alignment.pred_to_gold.end()) continue;
        const double s = scorer(pred.node_text(st.conclusion_id), gold.node_text(it->second));
        if (s > threshold) ++correct;
    }
    return detail::prf(correct, static_cast<long>(pred.steps.size()),
                       static_cast<long>(gold.steps.size()));
}

// ---------------------------------------------------------------------------
// Reports.

struct EvalConfig {
    std::string scorer = "token-f1";
    double threshold = 0.7;
};

struct EvalReport {
    double leaves_f1 = 0.0;
    bool leaves_all = false;
    double steps_f1 = 0.0;
    bool steps_all = false;
    double inter_f1 = 0.0;
    bool inter_all = false;
    bool overall_all = false;

    EvalReport() = default;
    EvalReport(std::pair<double, bool> leaves, std::pair<double, bool> steps,
               std::pair<double, bool> inter)
        : leaves_f1(leaves.first),
          leaves_all(leaves.second),
          steps_f1(steps.first),
          steps_all(steps.second),
          inter_f1(inter.first),
          inter_all(inter.second),
          overall_all(leaves.second && steps.second && inter.second) {
        auto check = [](double f1, bool all, const char* dim) {
            if (f1 < 0.0 || f1 > 1.0)
                throw ValidationError("report", std::string(dim) + " F1 outside [0,1]");
            if (all && f1 != 1.0)
                throw ValidationError("report", std::string(dim) + " AllCorrect without F1 = 1");
        };
        check(leaves_f1, leaves_all, "leaves");
        check(steps_f1, steps_all, "steps");
        check(inter_f1, inter_all, "intermediates");
    }
};

inline EvalReport evaluate(const tree::EntailmentTree& pred, const tree::EntailmentTree& gold,
                           const EvalConfig& cfg = {}) {
    tree::validate(pred);
    tree::validate(gold);
    const Scorer scorer = scorer_by_name(cfg.scorer);
    const Alignment a = align(pred, gold);
    return EvalReport(leaves_score(pred, gold), steps_score(pred, gold, a),
                      intermediates_score(pred, gold, a, scorer, cfg.threshold));
}

// Corpus means, reported in percent as in the standard results tables.
struct CorpusReport {
    double leaves_f1 = 0.0;
    double leaves_all = 0.0;
    double steps_f1 = 0.0;
    double steps_all = 0.0;
    double inter_f1 = 0.0;
    double inter_all = 0.0;
    double overall_all = 0.0;
    long count = 0;
};

inline CorpusReport summarize(const std::vector<EvalReport>& reports) {
    CorpusReport c;
    c.count = static_cast<long>(reports.size());
    if (reports.empty()) return c;
    for (const auto& r : reports) {
        c.leaves_f1 += r.leaves_f1;
        c.leaves_all += r.leaves_all ? 1.0 : 0.0;
        c.steps_f1 += r.steps_f1;
        c.steps_all += r.steps_all ? 1.0 : 0.0;
        c.inter_f1 += r.inter_f1;
        c.inter_all += r.inter_all ? 1.0 : 0.0;
        c.overall_all += r.overall_all ? 1.0 : 0.0;
    }
    const double scale = 100.0 / static_cast<double>(c.count);
    c.leaves_f1 *= scale;
    c.leaves_all *= scale;
    c.steps_f1 *= scale;
    c.steps_all *= scale;
    c.inter_f1 *= scale;
    c.inter_all *= scale;
    c.overall_all *= scale;
    return c;
}

inline CorpusReport evaluate_corpus(const std::vector<tree::EntailmentTree>& preds,
                                    const std::vector<tree::EntailmentTree>& golds,
                                    const EvalConfig& cfg = {}) {
    if (preds.size() != golds.size())
        throw InputError("corpus evaluation needs equal tree counts, got " +
                         std::to_string(preds.size()) + " predicted vs " +
                         std::to_string(golds.size()) + " gold");
    std::vector<EvalReport> rows;
    rows.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) rows.push_back(evaluate(preds[i], golds[i], cfg));
    return summarize(rows);
}

inline std::string csv_header() {
    return "Leaves F1,Leaves AllCorrect,Steps F1,Steps AllCorrect,"
           "Intermediates F1,Intermediates AllCorrect,Overall AllCorrect";
}

inline std::string csv_row(const CorpusReport& c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f", c.leaves_f1,
                  c.leaves_all, c.steps_f1, c.steps_all, c.inter_f1, c.inter_all, c.overall_all);
    return buf;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    return {{"leaves_f1", r.leaves_f1},   {"leaves_all", r.leaves_all ? 1 : 0},
            {"steps_f1", r.steps_f1},     {"steps_all", r.steps_all ? 1 : 0},
            {"inter_f1", r.inter_f1},     {"inter_all", r.inter_all ? 1 : 0},
            {"overall_all", r.overall_all ? 1 : 0}};
}

inline nlohmann::json report_to_json(const CorpusReport& c) {
    return {{"leaves_f1", c.leaves_f1},   {"leaves_all", c.leaves_all},
            {"steps_f1", c.steps_f1},     {"steps_all", c.steps_all},
            {"inter_f1", c.inter_f1},     {"inter_all", c.inter_all},
            {"overall_all", c.overall_all}, {"count", c.count}};
}

}  // namespace lmpm::eval
