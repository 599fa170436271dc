#ifndef ADPREDICT_MATCHER_HPP
#define ADPREDICT_MATCHER_HPP

#include <array>
#include <cctype>
#include <cstdint>
#include <queue>
#include <string_view>
#include <vector>

#include "adpredict/error.hpp"
#include "adpredict/lexicon.hpp"

namespace adpredict {

struct KeywordHit {
    std::uint32_t keyword = 0;  // lexicon index
    std::uint32_t offset = 0;   // byte offset of the first character

    friend bool operator==(const KeywordHit&, const KeywordHit&) = default;
    friend auto operator<=>(const KeywordHit&, const KeywordHit&) = default;
};

/// Aho-Corasick automaton over lowercased bytes. Reports every word-bounded,
/// case-insensitive occurrence of every lexicon keyword in one left-to-right pass.
/// Immutable after construction; safe to share across threads.
class KeywordMatcher {
public:
    explicit KeywordMatcher(const Lexicon& lexicon) {
        if (lexicon.empty()) throw ConfigError("cannot compile a matcher from an empty lexicon");
        lengths_.reserve(lexicon.size());
        nodes_.emplace_back();
        for (std::size_t k = 0; k < lexicon.size(); ++k) {
            const auto& word = lexicon[k].keyword;
            lengths_.push_back(static_cast<std::uint32_t>(word.size()));
            std::int32_t state = 0;
            for (unsigned char c : word) {
                auto& next = nodes_[state].next[c];
                if (next == 0) {
                    next = static_cast<std::int32_t>(nodes_.size());
                    nodes_.emplace_back();
                }
                state = nodes_[state].next[c];
            }
            nodes_[state].out.push_back(static_cast<std::uint32_t>(k));
        }
        build_links();
    }

    std::size_t keyword_count() const noexcept { return lengths_.size(); }

    /// Appends hits in order of match end position to `hits`.
    void scan(std::string_view text, std::vector<KeywordHit>& hits) const {
        std::int32_t state = 0;
        for (std::size_t i = 0; i < text.size(); ++i) {
            const auto c = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(text[i])));
            state = nodes_[state].next[c];
            const auto& out = nodes_[state].out;
            if (out.empty()) continue;
            const bool right_ok = i + 1 == text.size() || !is_word_char(static_cast<unsigned char>(text[i + 1]));
            if (!right_ok) continue;
            for (auto k : out) {
                const std::size_t begin = i + 1 - lengths_[k];
                if (begin == 0 || !is_word_char(static_cast<unsigned char>(text[begin - 1]))) {
                    hits.push_back({k, static_cast<std::uint32_t>(begin)});
                }
            }
        }
    }

    std::vector<KeywordHit> scan(std::string_view text) const {
        std::vector<KeywordHit> hits;
        scan(text, hits);
        return hits;
    }

private:
    struct Node {
        std::array<std::int32_t, 256> next{};
        std::int32_t fail = 0;
        std::vector<std::uint32_t> out;
    };

    void build_links() {
        // BFS: complete the goto function into a DFA and merge outputs along failure links.
        std::queue<std::int32_t> queue;
        for (int c = 0; c < 256; ++c) {
            const auto child = nodes_[0].next[c];
            if (child != 0) {
                nodes_[child].fail = 0;
                queue.push(child);
            }
        }
        while (!queue.empty()) {
            const auto s = queue.front();
            queue.pop();
            const auto fail = nodes_[s].fail;
            const auto& fail_out = nodes_[fail].out;
            nodes_[s].out.insert(nodes_[s].out.end(), fail_out.begin(), fail_out.end());
            for (int c = 0; c < 256; ++c) {
                const auto child = nodes_[s].next[c];
                if (child != 0) {
                    nodes_[child].fail = nodes_[fail].next[c];
                    queue.push(child);
                } else {
                    nodes_[s].next[c] = nodes_[fail].next[c];
                }
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> lengths_;
};

inline KeywordMatcher compile_matcher(const Lexicon& lexicon) { return KeywordMatcher(lexicon); }

}  // namespace adpredict

#endif  // ADPREDICT_MATCHER_HPP
