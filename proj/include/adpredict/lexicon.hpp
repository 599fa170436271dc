#ifndef ADPREDICT_LEXICON_HPP
#define ADPREDICT_LEXICON_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adpredict/error.hpp"

namespace adpredict {

enum class KeywordGroup {
    cognition_speech_language,
    cognition_memory,
    cognition_other,
    physiology_behavior,
    mood,
    testing,
    anatomy,
    other,
};

inline constexpr std::array<KeywordGroup, 8> all_keyword_groups{
    KeywordGroup::cognition_speech_language, KeywordGroup::cognition_memory, KeywordGroup::cognition_other,
    KeywordGroup::physiology_behavior,       KeywordGroup::mood,             KeywordGroup::testing,
    KeywordGroup::anatomy,                   KeywordGroup::other,
};

inline std::string_view to_string(KeywordGroup g) {
    switch (g) {
        case KeywordGroup::cognition_speech_language: return "cognition_speech_language";
        case KeywordGroup::cognition_memory: return "cognition_memory";
        case KeywordGroup::cognition_other: return "cognition_other";
        case KeywordGroup::physiology_behavior: return "physiology_behavior";
        case KeywordGroup::mood: return "mood";
        case KeywordGroup::testing: return "testing";
        case KeywordGroup::anatomy: return "anatomy";
        case KeywordGroup::other: return "other";
    }
    return "other";
}

inline std::optional<KeywordGroup> parse_keyword_group(std::string_view s) {
    for (auto g : all_keyword_groups) {
        if (to_string(g) == s) return g;
    }
    return std::nullopt;
}

inline bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct LexiconEntry {
    std::string keyword;  // lowercase
    KeywordGroup group = KeywordGroup::other;
    bool is_cognitive_test = false;
};

/// The keyword panel scanned for in note text.
class Lexicon {
public:
    Lexicon() = default;

    explicit Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
        validate();
        for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].keyword, i);
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const LexiconEntry& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }

    std::optional<std::size_t> find(std::string_view keyword) const {
        const auto it = index_.find(std::string(keyword));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t index_of(std::string_view keyword) const {
        const auto i = find(keyword);
        if (!i) throw ArgumentError("keyword not in lexicon: " + std::string(keyword));
        return *i;
    }

    /// Copy without entries flagged as cognitive tests.
    Lexicon without_cognitive_tests() const {
        std::vector<LexiconEntry> kept;
        std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(kept),
                     [](const LexiconEntry& e) { return !e.is_cognitive_test; });
        return Lexicon(std::move(kept));
    }

    /// Lexicon file: `keyword<TAB>group<TAB>0|1` per line; '#' starts a comment line.
    static Lexicon parse(std::string_view text) {
        std::vector<LexiconEntry> entries;
        std::istringstream in{std::string(text)};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            std::vector<std::string> cols;
            std::size_t start = 0;
            for (;;) {
                const auto tab = line.find('\t', start);
                cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
                if (tab == std::string::npos) break;
                start = tab + 1;
            }
            if (cols.size() != 3) {
                throw ConfigError("lexicon line " + std::to_string(lineno) + ": expected 3 tab-separated columns");
            }
            const auto group = parse_keyword_group(cols[1]);
            if (!group) throw ConfigError("lexicon line " + std::to_string(lineno) + ": unknown group " + cols[1]);
            if (cols[2] != "0" && cols[2] != "1") {
                throw ConfigError("lexicon line " + std::to_string(lineno) + ": cognitive-test flag must be 0 or 1");
            }
            entries.push_back({cols[0], *group, cols[2] == "1"});
        }
        return Lexicon(std::move(entries));
    }

    static Lexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open lexicon file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    std::string serialize() const {
        std::string out;
        for (const auto& e : entries_) {
            out += e.keyword;
            out += '\t';
            out += to_string(e.group);
            out += e.is_cognitive_test ? "\t1\n" : "\t0\n";
        }
        return out;
    }

    /// Pairs (i, j) where keyword i occurs word-bounded inside keyword j. Such pairs make a
    /// single mention count twice, which breaks count calibration in generated text.
    std::vector<std::pair<std::size_t, std::size_t>> nested_keywords() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            for (std::size_t j = 0; j < entries_.size(); ++j) {
                if (i == j) continue;
                const auto& a = entries_[i].keyword;
                const auto& b = entries_[j].keyword;
                for (auto pos = b.find(a); pos != std::string::npos; pos = b.find(a, pos + 1)) {
                    const bool left = pos == 0 || !is_word_char(static_cast<unsigned char>(b[pos - 1]));
                    const auto end = pos + a.size();
                    const bool right = end == b.size() || !is_word_char(static_cast<unsigned char>(b[end]));
                    if (left && right) {
                        out.emplace_back(i, j);
                        break;
                    }
                }
            }
        }
        return out;
    }

private:
    void validate() const {
        std::unordered_map<std::string, int> seen;
        for (const auto& e : entries_) {
            if (e.keyword.empty()) throw ConfigError("lexicon: empty keyword");
            if (e.keyword != to_lower_ascii(e.keyword)) throw ConfigError("lexicon: keyword not lowercase: " + e.keyword);
            const auto front = static_cast<unsigned char>(e.keyword.front());
            const auto back = static_cast<unsigned char>(e.keyword.back());
            if (!is_word_char(front) || !is_word_char(back)) {
                throw ConfigError("lexicon: keyword must start and end with a letter or digit: " + e.keyword);
            }
            if (++seen[e.keyword] > 1) throw ConfigError("lexicon: duplicate keyword: " + e.keyword);
        }
    }

    std::vector<LexiconEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Reconstructed default panel. Seeds are the keywords named in the study text
/// (memory, mood, concentration, speaking, language, affect, judgement, MMSE, Mini-Cog,
/// forgetfulness, depression); the rest fill out the eight groups.
inline Lexicon default_lexicon() {
    using G = KeywordGroup;
    std::vector<LexiconEntry> e{
        {"speaking", G::cognition_speech_language, false},
        {"language", G::cognition_speech_language, false},
        {"speech", G::cognition_speech_language, false},
        {"word finding", G::cognition_speech_language, false},
        {"aphasia", G::cognition_speech_language, false},
        {"verbal", G::cognition_speech_language, false},
        {"naming", G::cognition_speech_language, false},
        {"articulation", G::cognition_speech_language, false},
        {"memory", G::cognition_memory, false},
        {"forgetfulness", G::cognition_memory, false},
        {"forgetful", G::cognition_memory, false},
        {"amnesia", G::cognition_memory, false},
        {"recall", G::cognition_memory, false},
        {"remembering", G::cognition_memory, false},
        {"misplacing", G::cognition_memory, false},
        {"repetitive questions", G::cognition_memory, false},
        {"concentration", G::cognition_other, false},
        {"judgement", G::cognition_other, false},
        {"judgment", G::cognition_other, false},
        {"confusion", G::cognition_other, false},
        {"disorientation", G::cognition_other, false},
        {"attention", G::cognition_other, false},
        {"cognition", G::cognition_other, false},
        {"reasoning", G::cognition_other, false},
        {"executive function", G::cognition_other, false},
        {"comprehension", G::cognition_other, false},
        {"wandering", G::physiology_behavior, false},
        {"agitation", G::physiology_behavior, false},
        {"insomnia", G::physiology_behavior, false},
        {"apathy", G::physiology_behavior, false},
        {"falls", G::physiology_behavior, false},
        {"gait", G::physiology_behavior, false},
        {"incontinence", G::physiology_behavior, false},
        {"weight loss", G::physiology_behavior, false},
        {"appetite", G::physiology_behavior, false},
        {"irritability", G::physiology_behavior, false},
        {"hallucinations", G::physiology_behavior, false},
        {"fatigue", G::physiology_behavior, false},
        {"mood", G::mood, false},
        {"depression", G::mood, false},
        {"anxiety", G::mood, false},
        {"affect", G::mood, false},
        {"dysphoric", G::mood, false},
        {"sadness", G::mood, false},
        {"tearful", G::mood, false},
        {"anhedonia", G::mood, false},
        {"mmse", G::testing, true},
        {"mini-cog", G::testing, true},
        {"moca", G::testing, true},
        {"slums", G::testing, true},
        {"clock drawing", G::testing, true},
        {"trail making", G::testing, true},
        {"neuropsychological testing", G::testing, true},
        {"cognitive screen", G::testing, true},
        {"hippocampus", G::anatomy, false},
        {"atrophy", G::anatomy, false},
        {"ventricles", G::anatomy, false},
        {"white matter", G::anatomy, false},
        {"temporal lobe", G::anatomy, false},
        {"amyloid", G::anatomy, false},
        {"caregiver", G::other, false},
        {"driving", G::other, false},
        {"finances", G::other, false},
        {"medication management", G::other, false},
    };
    return Lexicon(std::move(e));
}

}  // namespace adpredict

#endif  // ADPREDICT_LEXICON_HPP
