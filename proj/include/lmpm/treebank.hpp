#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lmpm/error.hpp"

namespace lmpm::tree {

inline bool is_sentence_id(const std::string& id) {
    if (id.size() < 2 || id[0] != 's') return false;
    for (std::size_t i = 1; i < id.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
    return true;
}

inline bool is_intermediate_id(const std::string& id) {
    if (id.size() < 4 || id.compare(0, 3, "int") != 0) return false;
    for (std::size_t i = 3; i < id.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
    return true;
}

struct Step {
    std::vector<std::string> premises;  // >= 2 node ids
    std::string conclusion_id;          // "intK" or "hypothesis"
    std::string conclusion_text;        // empty for the hypothesis step
};

struct EntailmentTree {
    std::string id;
    std::string hypothesis;
    std::vector<std::pair<std::string, std::string>> sentences;  // insertion order
    std::vector<Step> steps;
    std::string task_setting = "task1";

    const std::string* sentence_text(const std::string& sid) const {
        for (const auto& [k, v] : sentences)
            if (k == sid) return &v;
        return nullptr;
    }

    // Resolves any node id to its statement text.
    std::string node_text(const std::string& nid) const {
        if (nid == "hypothesis") return hypothesis;
        if (const auto* s = sentence_text(nid)) return *s;
        for (const auto& st : steps)
            if (st.conclusion_id == nid) return st.conclusion_text;
        throw IndexError("unknown node id '" + nid + "' in tree " + id);
    }

    // Sentence ids that actually appear as premises, in first-use order.
    std::vector<std::string> leaves_used() const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& st : steps)
            for (const auto& p : st.premises)
                if (is_sentence_id(p) && seen.insert(p).second) out.push_back(p);
        return out;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace detail

// Grammar: step (';' step)*, step := id ('&' id)+ '->' conclusion,
// conclusion := 'intK' ':' text | 'hypothesis'.
inline std::vector<Step> parse_proof(const std::string& proof) {
    std::vector<Step> steps;
    for (const auto& raw_part : detail::split(proof, ';')) {
        const std::string part = detail::trim(raw_part);
        if (part.empty()) continue;
        const auto arrow = part.find("->");
        if (arrow == std::string::npos || part.find("->", arrow + 2) != std::string::npos) {
            throw ValidationError("grammar", "step '" + part + "' needs exactly one '->'");
        }
        Step st;
        for (const auto& p : detail::split(part.substr(0, arrow), '&')) {
            const std::string id = detail::trim(p);
            if (!is_sentence_id(id) && !is_intermediate_id(id)) {
                throw ValidationError("grammar", "bad premise id '" + id + "'");
            }
            st.premises.push_back(id);
        }
        std::string rhs = detail::trim(part.substr(arrow + 2));
        const auto colon = rhs.find(':');
        if (colon != std::string::npos) {
            st.conclusion_text = detail::trim(rhs.substr(colon + 1));
            rhs = detail::trim(rhs.substr(0, colon));
        }
        st.conclusion_id = rhs;
        if (st.conclusion_id == "hypothesis") {
            if (!st.conclusion_text.empty()) {
                throw ValidationError("grammar", "the hypothesis step carries no text");
            }
        } else if (!is_intermediate_id(st.conclusion_id)) {
            throw ValidationError("grammar", "bad conclusion id '" + st.conclusion_id + "'");
        } else if (st.conclusion_text.empty()) {
            throw ValidationError("grammar",
                                  "intermediate " + st.conclusion_id + " needs ': text'");
        }
        if (st.premises.size() < 2) {
            throw ValidationError("grammar", "step '" + part + "' needs at least two premises");
        }
        steps.push_back(std::move(st));
    }
    return steps;
}

inline std::string proof_string(const std::vector<Step>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out += "; ";
        for (std::size_t p = 0; p < steps[i].premises.size(); ++p) {
            if (p) out += " & ";
            out += steps[i].premises[p];
        }
        out += " -> " + steps[i].conclusion_id;
        if (!steps[i].conclusion_text.empty()) out += ": " + steps[i].conclusion_text;
    }
    return out;
}

// Structural invariants: premises resolve to earlier-defined nodes, node ids
// are never redefined, every intermediate feeds exactly one later step, no
// node feeds two steps, and exactly one step concludes the hypothesis.
inline void validate(const EntailmentTree& t) {
    std::set<std::string> defined;
    for (const auto& [sid, text] : t.sentences) {
        if (!is_sentence_id(sid)) throw ValidationError("grammar", "bad sentence id '" + sid + "'");
        if (!defined.insert(sid).second) {
            throw ValidationError("duplicate", "sentence id '" + sid + "' defined twice");
        }
        if (text.empty()) throw ValidationError("grammar", "sentence " + sid + " is empty");
    }
    if (t.hypothesis.empty()) throw ValidationError("grammar", "empty hypothesis");
    if (t.steps.empty()) throw ValidationError("no-hypothesis", "tree has no steps");
    if (t.task_setting != "task1" && t.task_setting != "task2") {
        throw ValidationError("grammar", "unknown task setting '" + t.task_setting + "'");
    }

    std::map<std::string, int> parent_count;
    int hypothesis_steps = 0;
    for (const auto& st : t.steps) {
        std::set<std::string> local;
        for (const auto& p : st.premises) {
            if (!local.insert(p).second) {
                throw ValidationError("duplicate", "step repeats premise '" + p + "'");
            }
            if (!defined.count(p)) {
                throw ValidationError("dangling", "premise '" + p + "' is not defined yet");
            }
            ++parent_count[p];
        }
        if (st.conclusion_id == "hypothesis") {
            if (++hypothesis_steps > 1) {
                throw ValidationError("multiple-hypothesis",
                                      "more than one step concludes the hypothesis");
            }
        } else if (st.conclusion_text.empty()) {
            throw ValidationError("grammar",
                                  "intermediate " + st.conclusion_id + " has no text");
        }
        if (st.conclusion_text.find(';') != std::string::npos) {
            throw ValidationError("grammar", "conclusion text may not contain ';'");
        }
        if (!defined.insert(st.conclusion_id).second) {
            throw ValidationError("cycle", "node '" + st.conclusion_id + "' concluded twice");
        }
    }
    if (hypothesis_steps == 0) {
        throw ValidationError("no-hypothesis", "no step concludes the hypothesis");
    }
    for (const auto& [node, uses] : parent_count) {
        if (uses > 1) {
            throw ValidationError("multiple-parents",
                                  "node '" + node + "' feeds " + std::to_string(uses) + " steps");
        }
    }
    for (const auto& st : t.steps) {
        if (st.conclusion_id != "hypothesis" && parent_count[st.conclusion_id] == 0) {
            throw ValidationError("unused-intermediate",
                                  "intermediate '" + st.conclusion_id + "' feeds no step");
        }
    }
}

inline EntailmentTree parse_tree(const nlohmann::json& j) {
    EntailmentTree t;
    for (const char* field : {"id", "hypothesis", "proof"}) {
        if (!j.contains(field) || !j[field].is_string()) {
            throw InputError(std::string("tree record missing string field '") + field + "'");
        }
    }
    if (!j.contains("sentences") || !j["sentences"].is_object()) {
        throw InputError("tree record missing object field 'sentences'");
    }
    t.id = j["id"].get<std::string>();
    t.hypothesis = j["hypothesis"].get<std::string>();
    for (auto& [sid, text] : j["sentences"].items()) {
        t.sentences.emplace_back(sid, text.get<std::string>());
    }
    t.steps = parse_proof(j["proof"].get<std::string>());
    if (j.contains("task")) t.task_setting = j["task"].get<std::string>();
    validate(t);
    return t;
}

inline nlohmann::ordered_json serialize(const EntailmentTree& t) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["hypothesis"] = t.hypothesis;
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [sid, text] : t.sentences) s[sid] = text;
    j["sentences"] = s;
    j["proof"] = proof_string(t.steps);
    if (t.task_setting != "task1") j["task"] = t.task_setting;
    return j;
}

inline std::vector<EntailmentTree> load_treebank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read treebank file " + path);
    std::vector<EntailmentTree> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            out.push_back(parse_tree(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw InputError("line " + std::to_string(lineno) + ": not valid JSON (" + e.what() +
                             ")");
        } catch (const Error& e) {
            throw InputError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void save_treebank(const std::vector<EntailmentTree>& trees, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write treebank file " + path);
    for (const auto& t : trees) out << serialize(t).dump() << '\n';
    if (!out) throw IoError("failed writing treebank file " + path);
}

// Left fold of an n-premise step into 2-premise steps. Auxiliary conclusions
// take letter-suffixed ids ("int1a") and empty texts; they exist only in
// memory and are renamed before any serialization.
inline std::vector<Step> binarize(const Step& step) {
    if (step.premises.size() < 2) {
        throw ValidationError("grammar", "cannot binarize a step with fewer than two premises");
    }
    if (step.premises.size() == 2) return {step};
    std::vector<Step> out;
    std::string acc = step.premises[0];
    for (std::size_t i = 1; i + 1 < step.premises.size(); ++i) {
        Step part;
        part.premises = {acc, step.premises[i]};
        part.conclusion_id = step.conclusion_id + static_cast<char>('a' + (i - 1));
        out.push_back(part);
        acc = part.conclusion_id;
    }
    Step last;
    last.premises = {acc, step.premises.back()};
    last.conclusion_id = step.conclusion_id;
    last.conclusion_text = step.conclusion_text;
    out.push_back(last);
    return out;
}

// Whole-tree binarization: every step becomes a chain of 2-premise steps and
// auxiliary conclusions take fresh numeric ids, so the result stays a valid,
// serializable tree. Auxiliary texts are the concatenation of what they cover.
inline EntailmentTree binarize_tree(const EntailmentTree& t) {
    validate(t);
    long next_int = 1;
    for (const auto& st : t.steps) {
        if (st.conclusion_id == "hypothesis") continue;
        long v = 0;
        for (std::size_t i = 3; i < st.conclusion_id.size(); ++i)
            v = v * 10 + (st.conclusion_id[i] - '0');
        next_int = std::max(next_int, v + 1);
    }

    EntailmentTree out;
    out.id = t.id;
    out.hypothesis = t.hypothesis;
    out.sentences = t.sentences;
    out.task_setting = t.task_setting;

    std::map<std::string, std::string> text;
    for (const auto& [sid, s] : t.sentences) text[sid] = s;

    for (const auto& st : t.steps) {
        std::map<std::string, std::string> rename;
        for (auto part : binarize(st)) {
            for (auto& p : part.premises) {
                auto it = rename.find(p);
                if (it != rename.end()) p = it->second;
            }
            if (part.conclusion_id != st.conclusion_id) {
                const std::string fresh = "int" + std::to_string(next_int++);
                rename[part.conclusion_id] = fresh;
                part.conclusion_id = fresh;
                part.conclusion_text =
                    text.at(part.premises[0]) + " " + text.at(part.premises[1]);
            }
            text[part.conclusion_id] = part.conclusion_id == "hypothesis"
                                           ? t.hypothesis
                                           : part.conclusion_text;
            out.steps.push_back(std::move(part));
        }
    }

    validate(out);
    return out;
}

// One (p1, p2, conclusion) text triple per binarized step that has gold text.
// Auxiliary premises read as the concatenation of the texts they cover.
struct TextTriple {
    std::string p1, p2, c;
};

inline std::vector<TextTriple> extract_pairs(const EntailmentTree& t) {
    std::unordered_map<std::string, std::string> text;
    for (const auto& [sid, s] : t.sentences) text[sid] = s;
    for (const auto& st : t.steps) {
        text[st.conclusion_id] =
            st.conclusion_id == "hypothesis" ? t.hypothesis : st.conclusion_text;
    }
    std::vector<TextTriple> out;
    for (const auto& st : t.steps) {
        std::unordered_map<std::string, std::string> aux;
        for (const auto& part : binarize(st)) {
            auto resolve = [&](const std::string& nid) -> std::string {
                auto a = aux.find(nid);
                if (a != aux.end()) return a->second;
                auto it = text.find(nid);
                if (it == text.end()) throw IndexError("unknown node id '" + nid + "'");
                return it->second;
            };
            const std::string p1 = resolve(part.premises[0]);
            const std::string p2 = resolve(part.premises[1]);
            const std::string c = part.conclusion_id == "hypothesis"
                                      ? t.hypothesis
                                      : part.conclusion_text;
            if (c.empty()) {
                aux[part.conclusion_id] = p1 + " " + p2;
            } else {
                out.push_back({p1, p2, c});
            }
        }
    }
    return out;
}

}  // namespace lmpm::tree
