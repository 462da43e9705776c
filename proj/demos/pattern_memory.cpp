// Trains the pattern store on three abstracted inference templates, then
// shows where each example routes in memory and what the decoder writes
// back from the selected slot. Self-contained; runs in a few seconds.

#include <cstdio>
#include <string>
#include <vector>

#include "lmpm/builder.hpp"
#include "lmpm/trainer.hpp"

using namespace lmpm;

namespace {

std::string join(const std::vector<std::string>& ts) {
    std::string s;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i) s += ' ';
        s += ts[i];
    }
    return s;
}

}  // namespace

int main() {
    const std::vector<TripleRecord> corpus = {
        {"<E1> is a stage of <E3>", "<E2> is a stage of <E3>",
         "<E1> resembles <E2>", "stage-of", {}},
        {"<E1> is a kind of <E2>", "<E2> needs <E3>",
         "<E1> needs <E3>", "substitution", {}},
        {"if <E1> gets <E2> then <E1> makes <E3>", "<E1> gets <E2>",
         "<E1> makes <E3>", "if-then", {}},
    };

    std::vector<std::vector<std::string>> lines;
    for (const auto& r : corpus) {
        lines.push_back(tokenize(r.p1));
        lines.push_back(tokenize(r.p2));
        lines.push_back(tokenize(r.c));
    }
    const auto vocab = build_vocab(lines, 1);

    ModelConfig mc;
    mc.d_model = 32;
    mc.n_layers = 1;
    mc.n_heads = 4;
    mc.d_ff = 64;
    mc.max_len = 24;
    mc.vocab_size = static_cast<int>(vocab.size());
    mc.d_m = 32;
    mc.slots = 3;

    train::TrainConfig tc;
    tc.phase = train::Phase::pretrain;
    tc.epochs = 300;
    tc.batch_size = 3;
    tc.lr = 1e-3;
    tc.seed = 0;

    auto model = train::LmpmModel::init(mc, tc.seed);
    std::printf("pre-training %d epochs on %zu templates "
                "(vocab %d, %d slots)...\n",
                tc.epochs, corpus.size(), static_cast<int>(vocab.size()), mc.slots);
    const auto curve = train::pretrain(model, corpus, tc, vocab);
    std::printf("loss %.4f -> %.4f over %zu steps\n\n", curve.initial_total(),
                curve.final_total(), curve.rows.size());

    std::printf("%-14s %-22s %s\n", "template", "slot mixture", "decoded conclusion");
    for (const auto& r : corpus) {
        const auto alpha = train::selection_probs(model, r, vocab);
        std::string mix;
        for (double a : alpha) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%s%.2f", mix.empty() ? "[" : " ", a);
            mix += buf;
        }
        mix += "]";
        const auto text = build::detail::generate_text(model, vocab, r.p1, r.p2, 16);
        const std::string note =
            text == join(tokenize(r.c)) ? "" : "   (expected: " + r.c + ")";
        std::printf("%-14s %-22s %s%s\n", r.type.c_str(), mix.c_str(), text.c_str(),
                    note.c_str());
    }
    return 0;
}
