#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "adpredict/features.hpp"
#include "test_support.hpp"

using namespace adpredict;

namespace {

Lexicon small_lexicon() {
    return Lexicon({{"memory", KeywordGroup::cognition_memory, false},
                    {"mood", KeywordGroup::mood, false},
                    {"mmse", KeywordGroup::testing, true},
                    {"speaking", KeywordGroup::cognition_speech_language, false}});
}

PatientRecord patient_with(Date birth, std::vector<std::pair<Date, std::string>> notes) {
    PatientRecord p;
    p.patient_id = "p1";
    p.birth_date = birth;
    for (auto& [d, text] : notes) p.notes.push_back({d, NoteType::primary_care, 323, 1, text});
    std::sort(p.notes.begin(), p.notes.end(), [](const Note& a, const Note& b) { return a.date < b.date; });
    return p;
}

ObservationWindow window_to(Date end) { return {Date::ymd(2004, 1, 1), end, 0, false}; }

std::uint32_t key(std::uint32_t kw, int age) { return KeywordAgePair{kw, age}.key(); }

}  // namespace

TEST(PairAge, WholeYears) {
    EXPECT_EQ(pair_age(Date::ymd(1940, 3, 1), Date::ymd(2010, 5, 1)), 70);
    EXPECT_THROW(pair_age(Date::ymd(2010, 3, 1), Date::ymd(2009, 5, 1)), DataError);
    EXPECT_EQ(KeywordAgePair::from_key(key(3, 77)), (KeywordAgePair{3, 77}));
}

TEST(ScanPatient, Examples) {
    const auto lex = small_lexicon();
    const auto m = compile_matcher(lex);
    const auto p = patient_with(Date::ymd(1940, 3, 1), {{Date::ymd(2010, 5, 1), "memory poor"},
                                                        {Date::ymd(2011, 5, 1), "good mood"},
                                                        {Date::ymd(2013, 5, 1), "mood dysphoric"},
                                                        {Date::ymd(2016, 5, 1), "memory memory"}});
    const auto counts = scan_patient(p, window_to(Date::ymd(2015, 12, 31)), m, NoteFilter::all());
    const PairCounts want{{key(0, 70), 1}, {key(1, 71), 1}, {key(1, 73), 1}};
    EXPECT_EQ(counts, want);
    // Nothing from outside the window.
    EXPECT_TRUE(scan_patient(p, window_to(Date::ymd(2010, 4, 30)), m, NoteFilter::all()).empty());
    EXPECT_TRUE(scan_patient(p, window_to(Date::ymd(2020, 1, 1)), m, NoteFilter::only(NoteType::neurology)).empty());
}

TEST(ScanPatient, PrescannedEquivalentAndWindowMonotone) {
    const auto lex = small_lexicon();
    const auto m = compile_matcher(lex);
    testgen::Rng rng(21);
    const std::vector<std::string> words{"memory", "mood", "MMSE", "speaking", "filler", "moody", "memoryx"};
    for (int t = 0; t < 200; ++t) {
        std::vector<std::pair<Date, std::string>> notes;
        const int n = testgen::uniform_int(rng, 1, 30);
        for (int i = 0; i < n; ++i) {
            std::string text;
            for (int w = testgen::uniform_int(rng, 1, 6); w > 0; --w) {
                text += words[testgen::uniform_int(rng, 0, static_cast<int>(words.size()) - 1)] + " ";
            }
            notes.push_back({testgen::random_date(rng, Date::ymd(2004, 1, 1), Date::ymd(2019, 12, 31)), text});
        }
        auto p = patient_with(Date::ymd(1945, 7, 9), notes);
        p.notes.front().note_type = NoteType::neurology;
        const auto scanned = scan_full(p, m);
        const Date index = Date::ymd(2018, 1, 1);
        PairCounts wider;
        for (int clean = 0; clean <= 10; ++clean) {
            const auto w = frame_window(Date::ymd(2004, 1, 1), index, clean, Date::ymd(2004, 1, 1));
            for (const auto filter : {NoteFilter::all(), NoteFilter::only(NoteType::primary_care)}) {
                ASSERT_EQ(pairs_in_window(scanned, w, filter), scan_patient(p, w, m, filter));
            }
            const auto counts = pairs_in_window(scanned, w, NoteFilter::all());
            if (clean > 0) {
                for (const auto& [k, c] : counts) {
                    ASSERT_TRUE(wider.count(k));
                    ASSERT_LE(c, wider.at(k)) << "clean " << clean;
                }
            }
            wider = counts;
        }
    }
}

TEST(Vocabulary, TopKAndTieRule) {
    const auto lex = small_lexicon();
    // doc freq: memory@70 -> 5, mood@70 -> 3, speaking@70 -> 1
    std::vector<PairCounts> counts(5);
    for (int i = 0; i < 5; ++i) counts[i][key(0, 70)] = 1;
    for (int i = 0; i < 3; ++i) counts[i][key(1, 70)] = 4;
    counts[0][key(3, 70)] = 9;
    std::vector<PatientPairs> train;
    for (int i = 0; i < 5; ++i) train.push_back({"t" + std::to_string(i), &counts[i]});
    const auto v = select_vocabulary(train, 2, lex);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v.keywords, (std::vector<std::string>{"memory", "mood"}));
    EXPECT_EQ(v.doc_freq, (std::vector<int>{5, 3}));
    EXPECT_EQ(v.n_train, 5);
    EXPECT_EQ(v.source_ids.size(), 5u);

    // Total count ranks speaking (9) above memory (5) and mood (12 > 9 first).
    const auto by_total = select_vocabulary(train, 2, lex, SelectionMetric::total_count);
    EXPECT_EQ(by_total.keywords, (std::vector<std::string>{"mood", "speaking"}));

    // Equal doc freq: lexicographically smaller keyword, then smaller age.
    std::vector<PairCounts> tie(2);
    tie[0][key(1, 60)] = 1;
    tie[1][key(0, 80)] = 1;
    tie[0][key(0, 61)] = 1;
    const auto t = select_vocabulary({{"a", &tie[0]}, {"b", &tie[1]}}, 1, lex);
    EXPECT_EQ(t.keywords.front(), "memory");
    EXPECT_EQ(t.pairs.front().age, 61);

    // Fewer distinct pairs than requested: all of them.
    EXPECT_EQ(select_vocabulary(train, 50, lex).size(), 3u);
}

TEST(Vocabulary, CsvRoundTrip) {
    const auto lex = small_lexicon();
    PairCounts c{{key(2, 71), 2}, {key(0, 70), 1}};
    const auto v = select_vocabulary({{"a", &c}}, 10, lex);
    std::stringstream ss;
    write_vocab_csv(ss, v);
    const auto back = read_vocab_csv(ss, lex, v.n_train);
    EXPECT_EQ(back.pairs, v.pairs);
    EXPECT_EQ(back.doc_freq, v.doc_freq);
    EXPECT_EQ(back.keywords, v.keywords);
}

TEST(Tfidf, Examples) {
    EXPECT_NEAR(tfidf_weight(2, 10, 100), 4.6052, 5e-5);
    EXPECT_DOUBLE_EQ(tfidf_weight(2, 10, 100), 2 * std::log(10.0));
    EXPECT_EQ(tfidf_weight(3, 100, 100), 0.0);
    EXPECT_EQ(tfidf_weight(0, 10, 100), 0.0);
    EXPECT_THROW(tfidf_weight(1, 0, 100), ArgumentError);
}

TEST(Vectorize, ExamplesAndLinearity) {
    PairVocabulary v;
    v.pairs = {{0, 70}, {1, 70}, {2, 72}};
    v.keywords = {"memory", "mood", "mmse"};
    v.doc_freq = {10, 20, 5};
    v.n_train = 100;
    EXPECT_EQ(vectorize({}, v), std::vector<double>(3, 0.0));
    const auto one = vectorize({{key(0, 70), 3}, {key(3, 50), 7}}, v);
    EXPECT_EQ(std::count_if(one.begin(), one.end(), [](double x) { return x != 0; }), 1);
    EXPECT_DOUBLE_EQ(one[0], 3 * std::log(10.0));

    testgen::Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        PairCounts c, doubled;
        for (const auto& p : v.pairs) {
            const int n = testgen::uniform_int(rng, 0, 6);
            if (n) {
                c[p.key()] = n;
                doubled[p.key()] = 2 * n;
            }
        }
        const auto a = vectorize(c, v), b = vectorize(doubled, v);
        for (std::size_t j = 0; j < a.size(); ++j) EXPECT_DOUBLE_EQ(b[j], 2 * a[j]);
    }
}

TEST(Vocabulary, CognitiveTestMaskKeepsThemOut) {
    const auto lex = small_lexicon();
    const auto m = compile_matcher(lex);
    const auto p = patient_with(Date::ymd(1940, 3, 1), {{Date::ymd(2010, 5, 1), "MMSE 22 memory"},
                                                        {Date::ymd(2011, 5, 1), "mmse mmse mood"}});
    const auto s = scan_full(p, m);
    std::vector<bool> mask(lex.size());
    for (std::size_t k = 0; k < lex.size(); ++k) mask[k] = !lex[k].is_cognitive_test;
    const auto counts = pairs_in_window(s, window_to(Date::ymd(2015, 1, 1)), NoteFilter::all(), &mask);
    const auto v = select_vocabulary({{"p1", &counts}}, 10, lex);
    ASSERT_EQ(v.size(), 2u);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_FALSE(lex[v.pairs[i].keyword].is_cognitive_test);
}

TEST(FeaturesCsv, RoundTrip) {
    std::stringstream ss;
    std::vector<FeatureVector> rows(2);
    rows[0] = {"p1", {1.5, 0}, {}};
    rows[1] = {"p2", {0, 0.1}, {}};
    write_features_csv(ss, {"a", "b"}, rows, {1, 0});
    const auto t = read_features_csv(ss);
    EXPECT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.patient_ids, (std::vector<std::string>{"p1", "p2"}));
    EXPECT_EQ(t.labels, (std::vector<int>{1, 0}));
    EXPECT_EQ(t.rows[1][1], 0.1);
}
