// Batch pipeline driver: abstract -> pretrain -> finetune -> generate ->
// evaluate, plus memory inspection. Every run is deterministic under --seed;
// results print as one JSON line on stdout, errors as one JSON line on stderr.
#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmpm/commands.hpp"

using namespace lmpm;

namespace {

struct TrainFlags {
    int epochs = 0;
    int batch_size = 0;
    double lr = 0.0;
    std::uint64_t seed = 0;
    double temperature_start = 0.0;
    double temperature_end = 0.0;
    double fraction = 0.0;
    bool no_lpp = false;
    bool no_memory = false;
    bool no_abstraction = false;
    bool freeze_memory = false;
    bool bow_in_finetune = false;

    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_batch = nullptr;
    CLI::Option* o_lr = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_tstart = nullptr;
    CLI::Option* o_tend = nullptr;
    CLI::Option* o_fraction = nullptr;

    void attach(CLI::App* sc, bool with_pretrain_only) {
        o_epochs = sc->add_option("--epochs", epochs, "training epochs");
        o_batch = sc->add_option("--batch-size", batch_size, "examples per update");
        o_lr = sc->add_option("--lr", lr, "learning rate");
        o_seed = sc->add_option("--seed", seed, "run seed");
        o_tstart = sc->add_option("--temperature-start", temperature_start,
                                  "initial selection temperature");
        o_tend = sc->add_option("--temperature-end", temperature_end,
                                "final selection temperature");
        sc->add_flag("--no-memory", no_memory, "bypass the pattern memory");
        sc->add_flag("--freeze-memory", freeze_memory, "exclude memory parameters from updates");
        sc->add_flag("--bow-in-finetune", bow_in_finetune, "keep the bag-of-words loss in phase 2");
        if (with_pretrain_only) {
            o_fraction = sc->add_option("--fraction", fraction, "fraction of the corpus to use");
            sc->add_flag("--no-lpp", no_lpp, "skip pattern pre-training");
            sc->add_flag("--no-abstraction", no_abstraction, "corpus was not entity-abstracted");
        }
    }

    nlohmann::json overrides() const {
        nlohmann::json ov = nlohmann::json::object();
        if (o_epochs->count()) ov["epochs"] = epochs;
        if (o_batch->count()) ov["batch_size"] = batch_size;
        if (o_lr->count()) ov["lr"] = lr;
        if (o_seed->count()) ov["seed"] = seed;
        if (o_tstart->count()) ov["temperature_start"] = temperature_start;
        if (o_tend->count()) ov["temperature_end"] = temperature_end;
        if (o_fraction && o_fraction->count()) ov["pretrain_fraction"] = fraction;
        if (no_lpp) ov["no_lpp"] = true;
        if (no_memory) ov["no_memory"] = true;
        if (no_abstraction) ov["no_abstraction"] = true;
        if (freeze_memory) ov["freeze_memory"] = true;
        if (bow_in_finetune) ov["bow_in_finetune"] = true;
        return ov;
    }
};

struct ModelFlags {
    int d_model = 0, n_layers = 0, n_heads = 0, d_ff = 0, max_len = 0, d_m = 0, slots = 0;
    CLI::Option *o_dmodel = nullptr, *o_layers = nullptr, *o_heads = nullptr, *o_dff = nullptr,
                *o_maxlen = nullptr, *o_dm = nullptr, *o_slots = nullptr;

    void attach(CLI::App* sc) {
        o_dmodel = sc->add_option("--d-model", d_model, "transformer width");
        o_layers = sc->add_option("--n-layers", n_layers, "encoder/decoder layers");
        o_heads = sc->add_option("--n-heads", n_heads, "attention heads");
        o_dff = sc->add_option("--d-ff", d_ff, "feed-forward width");
        o_maxlen = sc->add_option("--max-len", max_len, "maximum sequence length");
        o_dm = sc->add_option("--d-m", d_m, "memory slot width");
        o_slots = sc->add_option("--slots", slots, "memory slot count");
    }

    void fold_into(nlohmann::json& ov) const {
        if (o_dmodel->count()) ov["d_model"] = d_model;
        if (o_layers->count()) ov["n_layers"] = n_layers;
        if (o_heads->count()) ov["n_heads"] = n_heads;
        if (o_dff->count()) ov["d_ff"] = d_ff;
        if (o_maxlen->count()) ov["max_len"] = max_len;
        if (o_dm->count()) ov["d_m"] = d_m;
        if (o_slots->count()) ov["slots"] = slots;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"logical-pattern memory pipeline"};
    app.require_subcommand(1);
    nlohmann::ordered_json result;

    // abstract
    cmd::AbstractArgs aa;
    auto* sc_abs = app.add_subcommand("abstract", "entity-abstract a raw triple corpus");
    sc_abs->add_option("in", aa.in, "raw triple jsonl")->required();
    sc_abs->add_option("out", aa.out, "abstract triple jsonl")->required();
    sc_abs->add_option("--fraction", aa.fraction, "fraction of triples to keep");
    sc_abs->add_option("--seed", aa.seed, "subset selection seed");
    sc_abs->add_flag("--no-abstraction", aa.no_abstraction, "copy triples without abstraction");
    sc_abs->callback([&] { result = cmd::cmd_abstract(aa); });

    // pretrain
    cmd::PretrainArgs pa;
    TrainFlags ptf;
    ModelFlags pmf;
    auto* sc_pre = app.add_subcommand("pretrain", "phase 1: logical pattern pre-training");
    sc_pre->add_option("corpus", pa.corpus, "abstract triple jsonl")->required();
    sc_pre->add_option("out-checkpoint", pa.out_checkpoint, "checkpoint to write")->required();
    sc_pre->add_option("--config", pa.config_path, "JSON config file");
    sc_pre->add_option("--treebank", pa.treebank,
                       "fold this treebank's tokens into the vocabulary");
    ptf.attach(sc_pre, true);
    pmf.attach(sc_pre);
    sc_pre->callback([&] {
        pa.flag_overrides = ptf.overrides();
        pmf.fold_into(pa.flag_overrides);
        result = cmd::cmd_pretrain(pa);
    });

    // finetune
    cmd::FinetuneArgs fa;
    TrainFlags ftf;
    auto* sc_fin = app.add_subcommand("finetune", "phase 2: entailment step fine-tuning");
    sc_fin->add_option("treebank", fa.treebank, "gold treebank jsonl")->required();
    sc_fin->add_option("in-checkpoint", fa.in_checkpoint, "checkpoint to start from")->required();
    sc_fin->add_option("out-checkpoint", fa.out_checkpoint, "checkpoint to write")->required();
    sc_fin->add_option("--config", fa.config_path, "JSON config file");
    ftf.attach(sc_fin, false);
    sc_fin->callback([&] {
        fa.flag_overrides = ftf.overrides();
        result = cmd::cmd_finetune(fa);
    });

    // generate
    cmd::GenerateArgs ga;
    auto* sc_gen = app.add_subcommand("generate", "build predicted entailment trees");
    sc_gen->add_option("treebank", ga.treebank, "gold treebank jsonl")->required();
    sc_gen->add_option("checkpoint", ga.checkpoint, "trained checkpoint")->required();
    sc_gen->add_option("out", ga.out, "predicted treebank jsonl")->required();
    sc_gen->add_option("--mode", ga.mode, "oracle | heuristic");
    sc_gen->add_option("--w1", ga.build.w1, "pair-overlap weight");
    sc_gen->add_option("--w2", ga.build.w2, "hypothesis-overlap weight");
    sc_gen->add_option("--stop-threshold", ga.build.stop_threshold,
                       "hypothesis similarity that ends construction");
    sc_gen->add_option("--step-cap", ga.build.step_cap, "maximum construction steps");
    sc_gen->add_option("--max-decode-steps", ga.build.max_decode_steps,
                       "token budget per generated conclusion");
    sc_gen->callback([&] { result = cmd::cmd_generate(ga); });

    // evaluate
    cmd::EvaluateArgs ea;
    auto* sc_eval = app.add_subcommand("evaluate", "score predicted trees against gold");
    sc_eval->add_option("pred", ea.pred, "predicted treebank jsonl")->required();
    sc_eval->add_option("gold", ea.gold, "gold treebank jsonl")->required();
    sc_eval->add_option("--out", ea.out_csv, "corpus report CSV");
    sc_eval->add_option("--per-tree", ea.out_per_tree, "per-tree report jsonl");
    sc_eval->add_option("--scorer", ea.eval.scorer, "intermediate text scorer");
    sc_eval->add_option("--threshold", ea.eval.threshold, "intermediate correctness threshold");
    sc_eval->callback([&] { result = cmd::cmd_evaluate(ea); });

    // inspect-memory
    cmd::InspectArgs ia;
    auto* sc_ins = app.add_subcommand("inspect-memory", "pattern mixtures per inference type");
    sc_ins->add_option("corpus", ia.corpus, "typed triple jsonl")->required();
    sc_ins->add_option("checkpoint", ia.checkpoint, "trained checkpoint")->required();
    sc_ins->add_option("out-csv", ia.out_csv, "per-example mixture CSV")->required();
    sc_ins->callback([&] { result = cmd::cmd_inspect_memory(ia); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        nlohmann::json err = {{"error", "cli"}, {"message", e.what()}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    } catch (const Error& e) {
        nlohmann::json err = {{"error", e.kind()}, {"message", e.what()}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", "internal"}, {"message", e.what()}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }

    std::printf("%s\n", result.dump().c_str());
    return 0;
}
