#pragma once

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmpm/abstraction.hpp"
#include "lmpm/error.hpp"
#include "lmpm/rng.hpp"

namespace lmpm {

// One premise-pair training example as stored on disk, one JSON object per
// line. `entity_map` is present only after abstraction; `type` is an optional
// label carried through untouched.
struct TripleRecord {
    std::string p1, p2, c;
    std::string type;
    std::vector<std::pair<std::string, std::string>> entity_map;
};

inline TripleRecord parse_triple_line(const std::string& line, std::size_t lineno) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("line " + std::to_string(lineno) + ": not valid JSON (" + e.what() + ")");
    }
    TripleRecord r;
    for (const char* field : {"p1", "p2", "c"}) {
        if (!j.contains(field) || !j[field].is_string()) {
            throw InputError("line " + std::to_string(lineno) + ": missing string field '" +
                             field + "'");
        }
    }
    r.p1 = j["p1"].get<std::string>();
    r.p2 = j["p2"].get<std::string>();
    r.c = j["c"].get<std::string>();
    if (j.contains("type")) r.type = j["type"].get<std::string>();
    if (j.contains("entity_map")) {
        if (!j["entity_map"].is_object()) {
            throw InputError("line " + std::to_string(lineno) + ": entity_map must be an object");
        }
        for (auto& [phrase, ph] : j["entity_map"].items()) {
            r.entity_map.emplace_back(phrase, ph.get<std::string>());
        }
    }
    return r;
}

inline std::vector<TripleRecord> load_triples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read triple file " + path);
    std::vector<TripleRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        out.push_back(parse_triple_line(line, lineno));
    }
    return out;
}

inline std::string triple_to_line(const TripleRecord& r) {
    nlohmann::ordered_json j;
    j["p1"] = r.p1;
    j["p2"] = r.p2;
    j["c"] = r.c;
    if (!r.type.empty()) j["type"] = r.type;
    if (!r.entity_map.empty()) {
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto& [phrase, ph] : r.entity_map) m[phrase] = ph;
        j["entity_map"] = m;
    }
    return j.dump();
}

inline void save_triples(const std::vector<TripleRecord>& triples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write triple file " + path);
    for (const auto& r : triples) out << triple_to_line(r) << '\n';
    if (!out) throw IoError("failed writing triple file " + path);
}

// Deterministic subset: shuffle indices with the seeded generator, keep the
// first ceil(fraction*N), then restore input order.
inline std::vector<std::size_t> select_fraction(std::size_t n, double fraction,
                                                std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) {
        throw ConfigError("fraction must lie in [0,1], got " + std::to_string(fraction));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    idx.resize(std::min(keep, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct DatasetOptions {
    double fraction = 1.0;
    std::uint64_t seed = 0;
};

struct DatasetStats {
    long long count = 0;
    double mean_len = 0.0;   // tokens per triple (p1 + p2 + c)
    long long max_len = 0;
    long long conclusion_novel = 0;  // placeholders first seen in a conclusion

    nlohmann::ordered_json to_json() const {
        return {{"count", count},
                {"mean_len", mean_len},
                {"max_len", max_len},
                {"conclusion_novel", conclusion_novel}};
    }
};

inline TripleRecord abstract_record(const TripleRecord& raw,
                                    const abstraction::PosTagger& tagger,
                                    const abstraction::EntityMatcher& matcher) {
    auto at = abstraction::abstract(raw.p1, raw.p2, raw.c, tagger, matcher);
    TripleRecord out;
    auto join = [](const std::vector<std::string>& toks) {
        std::string s;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            if (i) s += ' ';
            s += toks[i];
        }
        return s;
    };
    out.p1 = join(at.p1);
    out.p2 = join(at.p2);
    out.c = join(at.c);
    out.type = raw.type;
    out.entity_map = at.entity_map;
    return out;
}

// Abstract a raw triple file into the pattern dataset; returns corpus stats.
inline DatasetStats build_dataset(const std::string& in_path, const std::string& out_path,
                                  const abstraction::PosTagger& tagger,
                                  const abstraction::EntityMatcher& matcher,
                                  const DatasetOptions& opts) {
    auto raw = load_triples(in_path);
    auto idx = select_fraction(raw.size(), opts.fraction, opts.seed);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file " + out_path);

    DatasetStats stats;
    long long total_len = 0;
    for (std::size_t i : idx) {
        auto at = abstraction::abstract(raw[i].p1, raw[i].p2, raw[i].c, tagger, matcher);
        TripleRecord rec;
        rec.type = raw[i].type;
        rec.entity_map = at.entity_map;
        auto join = [](const std::vector<std::string>& toks) {
            std::string s;
            for (std::size_t k = 0; k < toks.size(); ++k) {
                if (k) s += ' ';
                s += toks[k];
            }
            return s;
        };
        rec.p1 = join(at.p1);
        rec.p2 = join(at.p2);
        rec.c = join(at.c);
        out << triple_to_line(rec) << '\n';

        const long long len = static_cast<long long>(at.p1.size() + at.p2.size() + at.c.size());
        total_len += len;
        stats.max_len = std::max(stats.max_len, len);
        stats.conclusion_novel += static_cast<long long>(at.conclusion_novel.size());
        ++stats.count;
    }
    if (!out) throw IoError("failed writing dataset file " + out_path);
    if (stats.count > 0) {
        stats.mean_len = static_cast<double>(total_len) / static_cast<double>(stats.count);
    }
    return stats;
}

}  // namespace lmpm
