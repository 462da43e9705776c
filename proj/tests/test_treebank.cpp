#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <set>

#include "lmpm/treebank.hpp"

using namespace lmpm;
using namespace lmpm::tree;
using nlohmann::json;

namespace {

json minimal_record() {
    return json::parse(R"({
        "id": "t1",
        "hypothesis": "plants make their own food",
        "sentences": {"s1": "plants have chlorophyll", "s2": "chlorophyll turns sunlight into food"},
        "proof": "s1 & s2 -> hypothesis"
    })");
}

json chain_record() {
    return json::parse(R"({
        "id": "t2",
        "hypothesis": "the forest grows back after the fire",
        "sentences": {
            "s1": "fires clear old growth",
            "s2": "cleared ground receives sunlight",
            "s3": "sunlight helps seedlings grow",
            "s4": "seedlings become trees"
        },
        "proof": "s1 & s2 -> int1: the fire opens ground to sunlight; int1 & s3 -> int2: seedlings grow in the burned area; int2 & s4 -> hypothesis"
    })");
}

std::string kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return "none";
}

}  // namespace

TEST_CASE("minimal tree parses to one step with two leaves") {
    auto t = parse_tree(minimal_record());
    REQUIRE(t.steps.size() == 1);
    CHECK(t.steps[0].premises == std::vector<std::string>{"s1", "s2"});
    CHECK(t.steps[0].conclusion_id == "hypothesis");
    CHECK(t.leaves_used() == std::vector<std::string>{"s1", "s2"});
    CHECK(t.node_text("hypothesis") == "plants make their own food");
    CHECK(t.node_text("s1") == "plants have chlorophyll");
    CHECK(t.task_setting == "task1");
}

TEST_CASE("chain record parses to three steps with two intermediates") {
    auto t = parse_tree(chain_record());
    REQUIRE(t.steps.size() == 3);
    CHECK(t.steps[0].conclusion_id == "int1");
    CHECK(t.steps[0].conclusion_text == "the fire opens ground to sunlight");
    CHECK(t.steps[1].premises == std::vector<std::string>{"int1", "s3"});
    CHECK(t.steps[2].conclusion_id == "hypothesis");
    CHECK(t.leaves_used() == std::vector<std::string>{"s1", "s2", "s3", "s4"});
    CHECK(t.node_text("int2") == "seedlings grow in the burned area");
}

TEST_CASE("validation failures carry distinct kinds") {
    auto rec = minimal_record();

    rec["proof"] = "s1 & s9 -> hypothesis";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.dangling");

    rec["proof"] = "s1 & s2 -> int1: x; s1 & int1 -> int1: y";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.cycle");

    rec["proof"] = "s1 & s2 -> int1: x; s1 & int1 -> hypothesis";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.multiple-parents");

    rec["proof"] = "s1 & s2 -> int1: x";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.no-hypothesis");

    rec["proof"] = "s1 & s2 -> hypothesis; s1 & s2 -> hypothesis";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.multiple-hypothesis");

    rec = chain_record();
    rec["proof"] = "s1 & s2 -> int1: x; s3 & s4 -> hypothesis";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.unused-intermediate");

    rec = minimal_record();
    rec["proof"] = "s1 & s1 -> hypothesis";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.duplicate");
}

TEST_CASE("grammar failures are rejected") {
    auto rec = minimal_record();
    for (const char* bad :
         {"s1 -> hypothesis",                 // one premise
          "s1 & s2 -> int1",                  // intermediate without text
          "s1 & s2 -> hypothesis: extra",     // hypothesis with text
          "s1 & s2 -> int1a: x",              // letter-suffixed id
          "s1 & x2 -> hypothesis",            // bad premise id
          "s1 & s2 => hypothesis",            // missing arrow
          "s1 & s2 -> s3 -> hypothesis"}) {   // two arrows
        rec["proof"] = bad;
        INFO(bad);
        CHECK(kind_of([&] { parse_tree(rec); }) == "validation.grammar");
    }
}

TEST_CASE("proof strings round-trip through parse and serialize") {
    const std::string canonical =
        "s1 & s2 -> int1: the fire opens ground to sunlight; int1 & s3 -> int2: seedlings grow "
        "in the burned area; int2 & s4 -> hypothesis";
    auto steps = parse_proof(canonical);
    CHECK(proof_string(steps) == canonical);

    // sloppy whitespace canonicalizes
    auto sloppy = parse_proof("s1&s2->int1: x;   int1 & s3->hypothesis");
    CHECK(proof_string(sloppy) == "s1 & s2 -> int1: x; int1 & s3 -> hypothesis");

    auto t = parse_tree(chain_record());
    auto r = serialize(t);
    auto t2 = parse_tree(r);
    CHECK(serialize(t2) == r);
    CHECK(r["proof"].get<std::string>() == canonical);
}

TEST_CASE("task2 setting survives the round trip") {
    auto rec = minimal_record();
    rec["task"] = "task2";
    rec["sentences"]["s3"] = "the moon orbits the earth";  // distractor, unused
    auto t = parse_tree(rec);
    CHECK(t.task_setting == "task2");
    auto r = serialize(t);
    CHECK(r["task"] == "task2");
    CHECK(parse_tree(r).sentences.size() == 3);

    rec["task"] = "task9";
    CHECK(kind_of([&] { parse_tree(rec); }) == "validation.grammar");
}

TEST_CASE("binarize leaves 2-premise steps alone and left-folds larger ones") {
    Step two{{"s1", "s2"}, "int1", "x"};
    auto same = binarize(two);
    REQUIRE(same.size() == 1);
    CHECK(same[0].premises == two.premises);
    CHECK(same[0].conclusion_text == "x");

    Step three{{"s1", "s2", "s3"}, "int1", "x"};
    auto parts = binarize(three);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].premises == std::vector<std::string>{"s1", "s2"});
    CHECK(parts[0].conclusion_id == "int1a");
    CHECK(parts[0].conclusion_text.empty());
    CHECK(parts[1].premises == std::vector<std::string>{"int1a", "s3"});
    CHECK(parts[1].conclusion_id == "int1");
    CHECK(parts[1].conclusion_text == "x");

    Step four{{"s1", "s2", "s3", "s4"}, "hypothesis", ""};
    auto chain = binarize(four);
    REQUIRE(chain.size() == 3);
    CHECK(chain[0].conclusion_id == "hypothesisa");
    CHECK(chain[1].conclusion_id == "hypothesisb");
    CHECK(chain[2].conclusion_id == "hypothesis");
    CHECK(chain[2].premises == std::vector<std::string>{"hypothesisb", "s4"});

    // leaf multiset is preserved
    std::multiset<std::string> leaves;
    for (const auto& st : chain)
        for (const auto& p : st.premises)
            if (is_sentence_id(p)) leaves.insert(p);
    CHECK(leaves == std::multiset<std::string>{"s1", "s2", "s3", "s4"});
}

TEST_CASE("extract_pairs resolves texts through intermediate nodes") {
    auto t = parse_tree(minimal_record());
    auto pairs = extract_pairs(t);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].p1 == "plants have chlorophyll");
    CHECK(pairs[0].p2 == "chlorophyll turns sunlight into food");
    CHECK(pairs[0].c == "plants make their own food");

    auto chain = parse_tree(chain_record());
    auto triples = extract_pairs(chain);
    REQUIRE(triples.size() == 3);
    CHECK(triples[1].p1 == "the fire opens ground to sunlight");
    CHECK(triples[1].p2 == "sunlight helps seedlings grow");
    CHECK(triples[1].c == "seedlings grow in the burned area");
    CHECK(triples[2].c == chain.hypothesis);
}

TEST_CASE("n-premise steps contribute one triple with concatenated aux premises") {
    auto rec = json::parse(R"({
        "id": "t3",
        "hypothesis": "the garden thrives",
        "sentences": {"s1": "soil is rich", "s2": "rain falls often", "s3": "the sun shines"},
        "proof": "s1 & s2 & s3 -> hypothesis"
    })");
    auto t = parse_tree(rec);
    auto pairs = extract_pairs(t);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].p1 == "soil is rich rain falls often");
    CHECK(pairs[0].p2 == "the sun shines");
    CHECK(pairs[0].c == "the garden thrives");
}

TEST_CASE("treebank files load, save, and report bad lines") {
    const std::string path = "treebank_test.jsonl";
    {
        std::ofstream out(path);
        out << minimal_record().dump() << "\n";
        out << chain_record().dump() << "\n";
    }
    auto trees = load_treebank(path);
    REQUIRE(trees.size() == 2);
    CHECK(trees[1].id == "t2");

    save_treebank(trees, path);
    auto again = load_treebank(path);
    REQUIRE(again.size() == 2);
    CHECK(serialize(again[0]) == serialize(trees[0]));

    {
        std::ofstream out(path);
        out << minimal_record().dump() << "\n";
        out << "{\"id\": \"broken\"}\n";
    }
    try {
        load_treebank(path);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(path.c_str());
}
