#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmpm/abstraction.hpp"
#include "lmpm/builder.hpp"
#include "lmpm/dataset.hpp"
#include "lmpm/error.hpp"
#include "lmpm/evaluator.hpp"
#include "lmpm/trainer.hpp"
#include "lmpm/treebank.hpp"
#include "lmpm/vocab.hpp"

namespace lmpm::cmd {

// Every subcommand merges configuration as flag > config file > default. The
// caller passes explicitly-set flags as a flat JSON object; file keys it does
// not mention survive.
inline nlohmann::json merged_config(const std::string& config_path,
                                    const nlohmann::json& flag_overrides) {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot read config file " + config_path);
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
        }
        if (!doc.is_object()) throw ConfigError("config file " + config_path + " must hold a JSON object");
    }
    doc.update(flag_overrides);
    return doc;
}

inline std::string vocab_sidecar(const std::string& ckpt_path) { return ckpt_path + ".vocab"; }

namespace detail {

inline std::string join(const std::vector<std::string>& toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) s += ' ';
        s += toks[i];
    }
    return s;
}

// Fine-tuning data: one text triple per binarized gold step.
inline std::vector<TripleRecord> treebank_triples(const std::vector<tree::EntailmentTree>& trees) {
    std::vector<TripleRecord> out;
    for (const auto& t : trees)
        for (const auto& p : tree::extract_pairs(t)) out.push_back({p.p1, p.p2, p.c, "", {}});
    return out;
}

inline Vocabulary vocab_for_run(const std::vector<TripleRecord>& corpus,
                                const std::vector<TripleRecord>& extra) {
    std::vector<std::vector<std::string>> docs;
    for (const auto* set : {&corpus, &extra}) {
        for (const auto& r : *set) {
            docs.push_back(tokenize(r.p1));
            docs.push_back(tokenize(r.p2));
            docs.push_back(tokenize(r.c));
        }
    }
    return build_vocab(docs, 1);
}

}  // namespace detail

// --- abstract ---------------------------------------------------------------

struct AbstractArgs {
    std::string in;
    std::string out;
    double fraction = 1.0;
    std::uint64_t seed = 0;
    bool no_abstraction = false;
};

inline nlohmann::ordered_json cmd_abstract(const AbstractArgs& a) {
    if (a.no_abstraction) {
        const auto raw = load_triples(a.in);
        const auto idx = select_fraction(raw.size(), a.fraction, a.seed);
        std::vector<TripleRecord> kept;
        for (auto i : idx) kept.push_back(raw[i]);
        save_triples(kept, a.out);
        return {{"status", "ok"},
                {"abstraction", false},
                {"count", static_cast<long long>(kept.size())}};
    }
    DatasetOptions opts;
    opts.fraction = a.fraction;
    opts.seed = a.seed;
    const auto stats = build_dataset(a.in, a.out, abstraction::PosTagger::standard(),
                                     abstraction::EntityMatcher::form_matcher(), opts);
    auto j = stats.to_json();
    j["status"] = "ok";
    j["abstraction"] = true;
    return j;
}

// --- pretrain ---------------------------------------------------------------

struct PretrainArgs {
    std::string corpus;                  // abstract (or raw) triple jsonl
    std::string treebank;                // optional: folds its tokens into the vocabulary
    std::string out_checkpoint;
    std::string config_path;             // optional JSON config file
    nlohmann::json flag_overrides = nlohmann::json::object();
};

inline nlohmann::ordered_json cmd_pretrain(const PretrainArgs& a) {
    const auto doc = merged_config(a.config_path, a.flag_overrides);
    auto tc = train::train_config_from_json(doc);
    tc.phase = train::Phase::pretrain;
    const auto mc = train::model_config_from_json(doc);

    const auto corpus = load_triples(a.corpus);
    std::vector<TripleRecord> extra;
    if (!a.treebank.empty()) extra = detail::treebank_triples(tree::load_treebank(a.treebank));
    const auto vocab = detail::vocab_for_run(corpus, extra);

    ModelConfig mc_sized = mc;
    mc_sized.vocab_size = vocab.size();
    auto model = train::LmpmModel::init(mc_sized, tc.seed);
    model.use_memory = !tc.no_memory;

    nlohmann::ordered_json out = {{"status", "ok"}, {"vocab", vocab.size()}};
    if (tc.no_lpp) {
        out["status"] = "phase skipped";
    } else {
        const auto curve = train::pretrain(model, corpus, tc, vocab);
        curve.save_csv(a.out_checkpoint + ".loss.csv");
        out["steps"] = static_cast<long long>(curve.rows.size());
        out["initial_loss"] = curve.initial_total();
        out["final_loss"] = curve.final_total();
    }
    vocab.save(vocab_sidecar(a.out_checkpoint));
    train::save_checkpoint(a.out_checkpoint, model, vocab.hash());
    return out;
}

// --- finetune ---------------------------------------------------------------

struct FinetuneArgs {
    std::string treebank;
    std::string in_checkpoint;
    std::string out_checkpoint;
    std::string config_path;
    nlohmann::json flag_overrides = nlohmann::json::object();
};

inline nlohmann::ordered_json cmd_finetune(const FinetuneArgs& a) {
    const auto doc = merged_config(a.config_path, a.flag_overrides);
    auto tc = train::train_config_from_json(doc);
    tc.phase = train::Phase::finetune;

    const auto vocab = Vocabulary::load(vocab_sidecar(a.in_checkpoint));
    auto model = train::load_checkpoint(a.in_checkpoint, vocab.hash());
    // A bypass-trained checkpoint has no usable memory to re-enable.
    if (!model.use_memory) tc.no_memory = true;
    const auto pairs = detail::treebank_triples(tree::load_treebank(a.treebank));

    const auto curve = train::finetune(model, pairs, tc, vocab);
    curve.save_csv(a.out_checkpoint + ".loss.csv");
    vocab.save(vocab_sidecar(a.out_checkpoint));
    train::save_checkpoint(a.out_checkpoint, model, vocab.hash());
    return {{"status", "ok"},
            {"pairs", static_cast<long long>(pairs.size())},
            {"steps", static_cast<long long>(curve.rows.size())},
            {"initial_loss", curve.initial_total()},
            {"final_loss", curve.final_total()}};
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
    std::string treebank;
    std::string checkpoint;
    std::string out;
    std::string mode = "oracle";  // oracle | heuristic
    build::BuildConfig build;
};

inline nlohmann::ordered_json cmd_generate(const GenerateArgs& a) {
    if (a.mode != "oracle" && a.mode != "heuristic")
        throw ConfigError("unknown generation mode '" + a.mode + "' (available: oracle, heuristic)");
    const auto vocab = Vocabulary::load(vocab_sidecar(a.checkpoint));
    const auto model = train::load_checkpoint(a.checkpoint, vocab.hash());
    const auto golds = tree::load_treebank(a.treebank);

    std::vector<tree::EntailmentTree> preds;
    preds.reserve(golds.size());
    for (const auto& g : golds) {
        if (a.mode == "oracle") {
            preds.push_back(build::oracle_build(g, model, vocab, a.build));
        } else {
            build::BuildConfig bc = a.build;
            bc.tree_id = g.id;
            auto p = build::heuristic_build(g.hypothesis, g.sentences, model, vocab, bc);
            p.task_setting = g.task_setting;
            preds.push_back(std::move(p));
        }
    }
    tree::save_treebank(preds, a.out);
    return {{"status", "ok"},
            {"mode", a.mode},
            {"trees", static_cast<long long>(preds.size())}};
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
    std::string pred;
    std::string gold;
    std::string out_csv;        // corpus CSV (header + one row)
    std::string out_per_tree;   // optional JSONL, one report per tree
    eval::EvalConfig eval;
};

inline nlohmann::ordered_json cmd_evaluate(const EvaluateArgs& a) {
    const auto preds = tree::load_treebank(a.pred);
    const auto golds = tree::load_treebank(a.gold);

    std::map<std::string, const tree::EntailmentTree*> by_id;
    for (const auto& p : preds) {
        if (!by_id.emplace(p.id, &p).second)
            throw InputError("duplicate predicted tree id '" + p.id + "'");
    }

    std::vector<eval::EvalReport> rows;
    std::ofstream per_tree;
    if (!a.out_per_tree.empty()) {
        per_tree.open(a.out_per_tree, std::ios::binary);
        if (!per_tree) throw IoError("cannot write report file " + a.out_per_tree);
    }
    for (const auto& g : golds) {
        auto it = by_id.find(g.id);
        if (it == by_id.end()) throw InputError("no prediction for gold tree '" + g.id + "'");
        // Steps compare against the same binary structure the builders emit.
        const auto r = eval::evaluate(*it->second, tree::binarize_tree(g), a.eval);
        if (per_tree.is_open()) {
            auto j = eval::report_to_json(r);
            j["id"] = g.id;
            per_tree << j.dump() << '\n';
        }
        rows.push_back(r);
    }
    const auto corpus = eval::summarize(rows);

    if (!a.out_csv.empty()) {
        std::ofstream out(a.out_csv, std::ios::binary);
        if (!out) throw IoError("cannot write report file " + a.out_csv);
        out << eval::csv_header() << '\n' << eval::csv_row(corpus) << '\n';
    }
    auto j = eval::report_to_json(corpus);
    j["status"] = "ok";
    return j;
}

// --- inspect-memory ---------------------------------------------------------

struct InspectArgs {
    std::string corpus;   // triple jsonl with type labels
    std::string checkpoint;
    std::string out_csv;  // per-example mixture rows; summary lands in .summary.csv
};

struct TypeSlotSummary {
    std::string type;
    long count = 0;
    int majority_slot = -1;
    double purity = 0.0;
    std::vector<double> mean_alpha;
};

inline nlohmann::ordered_json cmd_inspect_memory(const InspectArgs& a) {
    const auto vocab = Vocabulary::load(vocab_sidecar(a.checkpoint));
    const auto model = train::load_checkpoint(a.checkpoint, vocab.hash());
    const auto triples = load_triples(a.corpus);
    if (triples.empty()) throw InputError("corpus " + a.corpus + " holds no triples");
    const int slots = model.cfg.slots;

    struct Row {
        std::string type;
        std::size_t index;
        std::vector<double> alpha;
        int argmax;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto alpha = train::selection_probs(model, triples[i], vocab);
        const int am = static_cast<int>(std::max_element(alpha.begin(), alpha.end()) - alpha.begin());
        rows.push_back({triples[i].type.empty() ? "untyped" : triples[i].type, i, alpha, am});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& x, const Row& y) { return x.type < y.type; });

    std::ofstream out(a.out_csv, std::ios::binary);
    if (!out) throw IoError("cannot write mixture file " + a.out_csv);
    out << "type,index";
    for (int s = 0; s < slots; ++s) out << ",slot_" << s;
    out << ",argmax\n";
    char buf[32];
    for (const auto& r : rows) {
        out << r.type << ',' << r.index;
        for (double v : r.alpha) {
            std::snprintf(buf, sizeof(buf), ",%.6f", v);
            out << buf;
        }
        out << ',' << r.argmax << '\n';
    }

    // Per-type summary: mean mixture, majority slot, and its purity.
    std::vector<TypeSlotSummary> summaries;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        TypeSlotSummary s;
        s.type = rows[i].type;
        s.mean_alpha.assign(slots, 0.0);
        std::vector<long> votes(slots, 0);
        for (; j < rows.size() && rows[j].type == s.type; ++j) {
            for (int k = 0; k < slots; ++k) s.mean_alpha[k] += rows[j].alpha[k];
            ++votes[rows[j].argmax];
            ++s.count;
        }
        for (int k = 0; k < slots; ++k) s.mean_alpha[k] /= static_cast<double>(s.count);
        s.majority_slot =
            static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        s.purity = static_cast<double>(votes[s.majority_slot]) / static_cast<double>(s.count);
        summaries.push_back(std::move(s));
        i = j;
    }

    std::ofstream sum(a.out_csv + ".summary.csv", std::ios::binary);
    if (!sum) throw IoError("cannot write summary file " + a.out_csv + ".summary.csv");
    sum << "type,count,majority_slot,purity";
    for (int s = 0; s < slots; ++s) sum << ",mean_slot_" << s;
    sum << '\n';
    nlohmann::ordered_json per_type = nlohmann::ordered_json::object();
    double min_purity = 1.0;
    for (const auto& s : summaries) {
        sum << s.type << ',' << s.count << ',' << s.majority_slot;
        std::snprintf(buf, sizeof(buf), ",%.4f", s.purity);
        sum << buf;
        for (double v : s.mean_alpha) {
            std::snprintf(buf, sizeof(buf), ",%.6f", v);
            sum << buf;
        }
        sum << '\n';
        per_type[s.type] = {{"count", s.count},
                            {"majority_slot", s.majority_slot},
                            {"purity", s.purity}};
        min_purity = std::min(min_purity, s.purity);
    }
    return {{"status", "ok"},
            {"examples", static_cast<long long>(rows.size())},
            {"types", per_type},
            {"min_purity", min_purity}};
}

}  // namespace lmpm::cmd
