#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmpm/error.hpp"

namespace lmpm {

// Fixed low ids shared by every vocabulary: control tokens first, then the
// 120-entry placeholder alphabet <E1>..<E120>.
constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kZId = 2;
constexpr int kBosId = 3;  // <s>
constexpr int kEosId = 4;  // </s>
constexpr int kPlaceholderBase = 5;
constexpr int kPlaceholderCount = 120;
constexpr int kReservedCount = kPlaceholderBase + kPlaceholderCount;  // 125

inline std::vector<std::string> reserved_tokens() {
    std::vector<std::string> out = {"<pad>", "<unk>", "<z>", "<s>", "</s>"};
    for (int k = 1; k <= kPlaceholderCount; ++k) out.push_back("<E" + std::to_string(k) + ">");
    return out;
}

inline bool is_placeholder_token(const std::string& tok) {
    if (tok.size() < 4 || tok[0] != '<' || tok[1] != 'E' || tok.back() != '>') return false;
    for (std::size_t i = 2; i + 1 < tok.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
    int k = std::atoi(tok.substr(2, tok.size() - 3).c_str());
    return k >= 1 && k <= kPlaceholderCount;
}

// Whitespace split; everything except <...> markers is lowercased.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        if (!(tok.front() == '<' && tok.back() == '>')) {
            std::transform(tok.begin(), tok.end(), tok.begin(),
                           [](unsigned char c) { return std::tolower(c); });
        }
        out.push_back(tok);
    }
    return out;
}

class Vocabulary {
public:
    Vocabulary() : Vocabulary(reserved_tokens()) {}

    explicit Vocabulary(std::vector<std::string> id2tok) : id2tok_(std::move(id2tok)) {
        const auto reserved = reserved_tokens();
        if (id2tok_.size() < reserved.size()) {
            throw IntegrityError("vocabulary too small to hold the reserved block: " +
                                 std::to_string(id2tok_.size()) + " tokens");
        }
        for (std::size_t i = 0; i < reserved.size(); ++i) {
            if (id2tok_[i] != reserved[i]) {
                throw IntegrityError("reserved token slot " + std::to_string(i) +
                                     " holds '" + id2tok_[i] + "', expected '" + reserved[i] +
                                     "'");
            }
        }
        for (std::size_t i = 0; i < id2tok_.size(); ++i) {
            auto [it, fresh] = tok2id_.emplace(id2tok_[i], static_cast<int>(i));
            if (!fresh) throw IntegrityError("duplicate vocabulary token '" + id2tok_[i] + "'");
        }
    }

    int size() const { return static_cast<int>(id2tok_.size()); }

    bool has(const std::string& tok) const { return tok2id_.count(tok) > 0; }

    int id(const std::string& tok) const {
        auto it = tok2id_.find(tok);
        return it == tok2id_.end() ? kUnkId : it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || id >= size()) {
            throw IndexError("token id " + std::to_string(id) + " out of range [0," +
                             std::to_string(size()) + ")");
        }
        return id2tok_[static_cast<std::size_t>(id)];
    }

    std::vector<int> encode(const std::vector<std::string>& toks) const {
        std::vector<int> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(id(t));
        return out;
    }

    std::vector<std::string> decode(const std::vector<int>& ids) const {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (int i : ids) out.push_back(token(i));
        return out;
    }

    std::string decode_text(const std::vector<int>& ids) const {
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i) out += ' ';
            out += token(ids[i]);
        }
        return out;
    }

    std::uint64_t hash() const {
        std::uint64_t h = 14695981039346656037ULL;
        auto eat = [&h](char c) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        };
        for (const auto& tok : id2tok_) {
            for (char c : tok) eat(c);
            eat('\n');
        }
        return h;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write vocabulary file " + path);
        for (const auto& tok : id2tok_) out << tok << '\n';
        if (!out) throw IoError("failed writing vocabulary file " + path);
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read vocabulary file " + path);
        std::vector<std::string> toks;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            toks.push_back(line);
        }
        return Vocabulary(std::move(toks));
    }

private:
    std::vector<std::string> id2tok_;
    std::unordered_map<std::string, int> tok2id_;
};

// Reserved block first, then corpus words with count >= min_count ordered by
// descending frequency, ties broken lexicographically.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count) {
    if (corpus.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    std::unordered_map<std::string, long long> counts;
    for (const auto& seq : corpus)
        for (const auto& tok : seq) ++counts[tok];

    auto id2tok = reserved_tokens();
    std::unordered_map<std::string, bool> reserved;
    for (const auto& t : id2tok) reserved[t] = true;

    std::vector<std::pair<std::string, long long>> kept;
    for (const auto& [tok, n] : counts) {
        if (n >= min_count && !reserved.count(tok)) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (auto& [tok, n] : kept) id2tok.push_back(tok);
    return Vocabulary(std::move(id2tok));
}

// Model input for one premise pair: [<z>, <s>, p1, </s>, p2, </s>].
struct EncodedInput {
    std::vector<int> ids;
    int z_position = 0;
    int sep_internal = -1;  // position of the </s> between the premises
    int sep_final = -1;     // position of the trailing </s>

    EncodedInput() = default;

    explicit EncodedInput(std::vector<int> seq) : ids(std::move(seq)) {
        if (ids.size() < 5 || ids[0] != kZId || ids[1] != kBosId || ids.back() != kEosId) {
            throw ValidationError("input",
                                  "encoded input must run [<z>, <s>, ..., </s>], got " +
                                      std::to_string(ids.size()) + " ids");
        }
        for (std::size_t i = 2; i + 1 < ids.size(); ++i) {
            if (ids[i] == kEosId) {
                if (sep_internal != -1) {
                    throw ValidationError("input", "more than one internal premise separator");
                }
                sep_internal = static_cast<int>(i);
            }
        }
        if (sep_internal == -1) {
            throw ValidationError("input", "missing premise separator </s>");
        }
        if (sep_internal == 2 || sep_internal + 1 == static_cast<int>(ids.size()) - 1) {
            throw ValidationError("input", "a premise is empty");
        }
        sep_final = static_cast<int>(ids.size()) - 1;
    }
};

inline EncodedInput encode_pair(const std::vector<std::string>& p1,
                                const std::vector<std::string>& p2, const Vocabulary& vocab) {
    if (p1.empty() || p2.empty()) throw InputError("encode_pair: empty premise");
    std::vector<int> ids = {kZId, kBosId};
    for (const auto& t : p1) ids.push_back(vocab.id(t));
    ids.push_back(kEosId);
    for (const auto& t : p2) ids.push_back(vocab.id(t));
    ids.push_back(kEosId);
    return EncodedInput(std::move(ids));
}

}  // namespace lmpm
