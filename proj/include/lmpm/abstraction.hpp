#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lmpm/error.hpp"
#include "lmpm/rng.hpp"
#include "lmpm/vocab.hpp"

namespace lmpm::abstraction {

enum class Tag { NOUN, DET, ADJ, OTHER };

inline const char* tag_name(Tag t) {
    switch (t) {
        case Tag::NOUN: return "NOUN";
        case Tag::DET: return "DET";
        case Tag::ADJ: return "ADJ";
        default: return "OTHER";
    }
}

struct TaggedToken {
    std::string text;
    Tag tag = Tag::OTHER;
};

// Rule/lexicon tagger: closed determiner list, then lexicon lookup, then
// suffix heuristics, defaulting to OTHER. Markers like <E1> are always OTHER
// so abstracted text never re-matches a span pattern.
struct PosTagger {
    std::unordered_set<std::string> determiners;
    std::unordered_map<std::string, Tag> lexicon;

    Tag tag_word(const std::string& w) const {
        if (w.size() >= 2 && w.front() == '<' && w.back() == '>') return Tag::OTHER;
        if (determiners.count(w)) return Tag::DET;
        auto it = lexicon.find(w);
        if (it != lexicon.end()) return it->second;
        auto ends = [&w](const char* suf) {
            const std::size_t n = std::strlen(suf);
            return w.size() > n + 2 && w.compare(w.size() - n, n, suf) == 0;
        };
        if (ends("tion") || ends("tions") || ends("ment") || ends("ments") || ends("ness") ||
            ends("ity") || ends("ities")) {
            return Tag::NOUN;
        }
        if (ends("ive") || ends("ous") || ends("al") || ends("ical")) return Tag::ADJ;
        return Tag::OTHER;
    }

    std::vector<TaggedToken> tag(const std::vector<std::string>& tokens) const {
        if (tokens.empty()) throw InputError("pos_tag: empty token list");
        std::vector<TaggedToken> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back({t, tag_word(t)});
        return out;
    }

    static PosTagger standard() {
        PosTagger p;
        p.determiners = {"the", "a", "an", "this", "that", "these", "those"};
        const char* nouns[] = {
            "society",  "societies", "development", "dog",     "dogs",    "cat",      "cats",
            "animal",   "animals",   "plant",       "plants",  "water",   "food",     "energy",
            "sun",      "sunlight",  "tree",        "trees",   "bird",    "birds",    "fish",
            "human",    "humans",    "person",      "people",  "city",    "cities",   "forest",
            "forests",  "river",     "rivers",      "mountain", "mountains", "ocean", "oceans",
            "house",    "houses",    "car",         "cars",    "book",    "books",    "child",
            "children", "school",    "schools",     "scientist", "scientists", "farmer",
            "farmers",  "rock",      "rocks",       "soil",    "seed",    "seeds",    "leaf",
            "leaves",   "flower",    "flowers",     "root",    "roots",   "stem",     "stems",
            "insect",   "insects",   "bee",         "bees",    "ant",     "ants",     "wolf",
            "wolves",   "rabbit",    "rabbits",     "deer",    "fox",     "foxes",    "bear",
            "bears",    "winter",    "summer",      "spring",  "autumn",  "desert",   "deserts",
            "lake",     "lakes",     "island",      "islands", "village", "villages", "farm",
            "farms",    "garden",    "gardens",     "machine", "machines", "engine",  "engines",
            "metal",    "metals",    "iron",        "copper",  "oxygen",  "carbon",   "heat",
            "light",    "rain",      "snow",        "wind",    "storm",   "storms",   "cloud",
            "clouds",   "moon",      "star",        "stars",   "planet",  "planets",  "earth",
        };
        for (const char* n : nouns) p.lexicon[n] = Tag::NOUN;
        const char* adjs[] = {
            "primitive", "feudal", "social",  "big",    "small",  "large", "tiny",  "red",
            "green",     "blue",   "yellow",  "young",  "old",    "tall",  "short", "wild",
            "tame",      "warm",   "cold",    "hot",    "cool",   "dry",   "wet",   "bright",
            "dark",      "heavy",  "light",   "fast",   "slow",   "deep",  "shallow", "ancient",
            "modern",    "hungry", "thirsty", "strong", "weak",   "happy", "quiet", "loud",
        };
        for (const char* a : adjs) p.lexicon[a] = Tag::ADJ;
        // "light" appears as both; noun reading wins for span purposes
        p.lexicon["light"] = Tag::NOUN;
        return p;
    }
};

struct Span {
    int begin = 0;  // token index, inclusive
    int end = 0;    // token index, exclusive
    std::string text;
};

// Maximal non-overlapping left-to-right matches of
// det adj noun | det noun | adj noun | noun, longest first at each position.
inline std::vector<Span> extract_spans(const std::vector<TaggedToken>& tagged) {
    std::vector<Span> spans;
    const int n = static_cast<int>(tagged.size());
    auto is = [&](int i, Tag t) { return i < n && tagged[i].tag == t; };
    int i = 0;
    while (i < n) {
        int len = 0;
        if (is(i, Tag::DET) && is(i + 1, Tag::ADJ) && is(i + 2, Tag::NOUN)) {
            len = 3;
        } else if (is(i, Tag::DET) && is(i + 1, Tag::NOUN)) {
            len = 2;
        } else if (is(i, Tag::ADJ) && is(i + 1, Tag::NOUN)) {
            len = 2;
        } else if (is(i, Tag::NOUN)) {
            len = 1;
        }
        if (len == 0) {
            ++i;
            continue;
        }
        Span s;
        s.begin = i;
        s.end = i + len;
        for (int k = i; k < i + len; ++k) {
            if (k > i) s.text += ' ';
            s.text += tagged[k].text;
        }
        spans.push_back(std::move(s));
        i += len;
    }
    return spans;
}

// Two phrases denote one entity iff their normalized forms agree; the default
// folds case (already folded by tokenize) and plural suffixes word by word.
struct EntityMatcher {
    std::function<std::string(const std::string&)> normalize_word;

    std::string normalize_phrase(const std::string& phrase) const {
        std::string out;
        for (const auto& w : tokenize(phrase)) {
            if (!out.empty()) out += ' ';
            out += normalize_word(w);
        }
        return out;
    }

    bool same(const std::string& a, const std::string& b) const {
        return normalize_phrase(a) == normalize_phrase(b);
    }

    static EntityMatcher form_matcher() {
        EntityMatcher m;
        m.normalize_word = [](const std::string& w) -> std::string {
            auto ends = [&w](const char* suf) {
                const std::size_t n = std::strlen(suf);
                return w.size() > n + 2 && w.compare(w.size() - n, n, suf) == 0;
            };
            if (ends("ses") || ends("xes") || ends("zes") || ends("ches") || ends("shes")) {
                return w.substr(0, w.size() - 2);
            }
            if (w.size() > 3 && w.back() == 's' && w[w.size() - 2] != 's') {
                return w.substr(0, w.size() - 1);
            }
            return w;
        };
        return m;
    }

    static EntityMatcher exact() {
        EntityMatcher m;
        m.normalize_word = [](const std::string& w) { return w; };
        return m;
    }
};

struct AbstractTriple {
    std::vector<std::string> p1, p2, c;                    // abstracted tokens
    std::vector<std::pair<std::string, std::string>> entity_map;  // surface → <Ek>
    std::vector<std::string> conclusion_novel;             // placeholders first seen in c
    std::string type;                                      // optional label, passed through

    std::string placeholder_for(const std::string& surface) const {
        for (const auto& [phrase, ph] : entity_map)
            if (phrase == surface) return ph;
        return "";
    }
};

namespace detail {

inline std::vector<std::string> replace_spans(const std::vector<std::string>& tokens,
                                              const std::vector<Span>& spans,
                                              const std::vector<std::string>& placeholders) {
    std::vector<std::string> out;
    std::size_t si = 0;
    for (int i = 0; i < static_cast<int>(tokens.size());) {
        if (si < spans.size() && spans[si].begin == i) {
            out.push_back(placeholders[si]);
            i = spans[si].end;
            ++si;
        } else {
            out.push_back(tokens[i]);
            ++i;
        }
    }
    return out;
}

}  // namespace detail

inline AbstractTriple abstract(const std::string& p1, const std::string& p2, const std::string& c,
                               const PosTagger& tagger, const EntityMatcher& matcher) {
    if (p1.empty() || p2.empty() || c.empty()) {
        throw InputError("abstract: all three sentences must be non-empty");
    }
    AbstractTriple out;
    std::unordered_map<std::string, std::string> by_norm;   // normalized → placeholder
    std::set<std::pair<std::string, std::string>> emitted;  // (surface, placeholder)
    int next = 1;

    auto process = [&](const std::string& text, bool is_conclusion) {
        auto tokens = tokenize(text);
        auto spans = extract_spans(tagger.tag(tokens));
        std::vector<std::string> placeholders;
        for (const auto& sp : spans) {
            const std::string norm = matcher.normalize_phrase(sp.text);
            auto it = by_norm.find(norm);
            std::string ph;
            if (it == by_norm.end()) {
                if (next > kPlaceholderCount) {
                    throw CapacityError("triple uses more than " +
                                        std::to_string(kPlaceholderCount) + " distinct entities");
                }
                ph = "<E" + std::to_string(next++) + ">";
                by_norm.emplace(norm, ph);
                if (is_conclusion) out.conclusion_novel.push_back(ph);
            } else {
                ph = it->second;
            }
            if (emitted.emplace(sp.text, ph).second) out.entity_map.emplace_back(sp.text, ph);
            placeholders.push_back(ph);
        }
        return detail::replace_spans(tokens, spans, placeholders);
    };

    out.p1 = process(p1, false);
    out.p2 = process(p2, false);
    out.c = process(c, true);
    return out;
}

// Puts surface phrases back for each placeholder; requires the map to name a
// single surface per placeholder, else the restoration is ambiguous.
inline std::vector<std::string> restore(
    const std::vector<std::string>& tokens,
    const std::vector<std::pair<std::string, std::string>>& entity_map) {
    std::unordered_map<std::string, std::string> surface;
    for (const auto& [phrase, ph] : entity_map) {
        auto [it, fresh] = surface.emplace(ph, phrase);
        if (!fresh && it->second != phrase) {
            throw ValidationError("ambiguous",
                                  "placeholder " + ph + " maps to both '" + it->second +
                                      "' and '" + phrase + "'");
        }
    }
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        auto it = surface.find(t);
        if (it == surface.end()) {
            out.push_back(t);
        } else {
            for (const auto& w : tokenize(it->second)) out.push_back(w);
        }
    }
    return out;
}

}  // namespace lmpm::abstraction
