// Walks through entailment-tree scoring on a hand-built example: a gold
// two-step chain, a prediction that misses one leaf, and the resulting
// alignment and per-dimension scores. Self-contained and instant.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "lmpm/evaluator.hpp"
#include "lmpm/treebank.hpp"

using namespace lmpm;

namespace {

tree::EntailmentTree mk(const std::string& hyp,
                        std::vector<std::pair<std::string, std::string>> sents,
                        const std::string& proof) {
    tree::EntailmentTree t;
    t.id = "demo";
    t.hypothesis = hyp;
    t.sentences = std::move(sents);
    t.steps = tree::parse_proof(proof);
    tree::validate(t);
    return t;
}

void show(const char* name, const tree::EntailmentTree& t) {
    std::printf("%s:\n", name);
    for (const auto& [sid, text] : t.sentences)
        std::printf("  %s: %s\n", sid.c_str(), text.c_str());
    std::printf("  proof: %s\n  hypothesis: %s\n", tree::proof_string(t.steps).c_str(),
                t.hypothesis.c_str());
}

}  // namespace

int main() {
    const auto gold = mk("young plants grow fast",
                         {{"s1", "plants need water"},
                          {"s2", "rain gives water"},
                          {"s3", "young plants drink often"}},
                         "s1 & s2 -> int1: plants get water from rain; "
                         "int1 & s3 -> hypothesis");
    const auto pred = mk("young plants grow fast",
                         {{"s1", "plants need water"},
                          {"s2", "rain gives water"},
                          {"s4", "young plants like light"}},
                         "s1 & s2 -> int1: plants get water from the rain; "
                         "int1 & s4 -> hypothesis");

    show("gold", gold);
    std::printf("\n");
    show("predicted", pred);

    const auto align = eval::align(pred, gold);
    std::printf("\nalignment (predicted node -> gold node, with leaf jaccard):\n");
    for (const auto& [p, g] : align.pred_to_gold)
        std::printf("  %s -> %s (%.2f)\n", p.c_str(), g.c_str(), align.jaccard.at(p));

    const auto report = eval::evaluate(pred, gold, {});
    std::printf("\nscores:\n%s\n", eval::report_to_json(report).dump(2).c_str());

    const auto corpus = eval::summarize({report, eval::evaluate(gold, gold, {})});
    std::printf("\ncorpus means over {prediction, gold-vs-gold} (percent):\n%s\n%s\n",
                eval::csv_header().c_str(), eval::csv_row(corpus).c_str());
    return 0;
}
