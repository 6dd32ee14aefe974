#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "mmorient/errors.hpp"
#include "mmorient/taskfeat.hpp"

using namespace mmorient;

namespace {

std::size_t idx(std::string_view name) {
    for (std::size_t i = 0; i < kEmotionNames.size(); ++i)
        if (kEmotionNames[i] == name) return i;
    throw std::logic_error("bad category");
}

std::string error_of(std::string_view text) {
    try {
        EmotionLexicon::parse(text);
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(EmotionFeatures, EmptyTextIsZero) {
    const auto f = emotion_features("", default_lexicon());
    for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(EmotionFeatures, RepeatedWordCountsEachCategory) {
    const auto lex = EmotionLexicon::parse("happy\tjoy,positive\n");
    const auto f = emotion_features("happy happy", lex);
    for (std::size_t c = 0; c < kEmotionCount; ++c) {
        const bool hit = c == idx("joy") || c == idx("positive");
        EXPECT_EQ(f[c], hit ? 2.0 : 0.0) << kEmotionNames[c];
    }
}

TEST(EmotionFeatures, MultiCategoryWord) {
    const auto lex = EmotionLexicon::parse("dread\tfear,anticipation,negative\n");
    const auto f = emotion_features("dread and dread again", lex);
    EXPECT_EQ(f[idx("fear")], 2.0);
    EXPECT_EQ(f[idx("anticipation")], 2.0);
    EXPECT_EQ(f[idx("negative")], 2.0);
    EXPECT_EQ(std::accumulate(f.begin(), f.end(), 0.0), 6.0);
}

TEST(EmotionFeatures, TrailingPunctuationStillMatches) {
    const auto lex = EmotionLexicon::parse("happy\tjoy\n");
    EXPECT_EQ(emotion_features("so happy!! happy, 'happy'", lex)[idx("joy")], 3.0);
}

TEST(EmotionFeatures, AdditiveUnderConcatenation) {
    const auto& lex = default_lexicon();
    const auto words = lex.words();
    const std::vector<std::string> filler = {"the", "a", "meme", "today", "!", "x"};
    std::mt19937_64 rng(3);
    auto random_text = [&] {
        std::string s;
        const std::size_t n = rng() % 12;
        for (std::size_t i = 0; i < n; ++i) {
            if (!s.empty()) s += ' ';
            s += (rng() % 2) ? words[rng() % words.size()] : filler[rng() % filler.size()];
        }
        return s;
    };
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = random_text();
        const auto b = random_text();
        const auto fa = emotion_features(a, lex);
        const auto fb = emotion_features(b, lex);
        const auto fab = emotion_features(a + " " + b, lex);
        std::size_t tokens = 0;
        for (const auto* s : {&a, &b})
            tokens += static_cast<std::size_t>(std::count(s->begin(), s->end(), ' ')) + !s->empty();
        for (std::size_t c = 0; c < kEmotionCount; ++c) {
            ASSERT_EQ(fab[c], fa[c] + fb[c]);
            ASSERT_LE(fab[c], static_cast<double>(tokens));
        }
    }
}

TEST(Sentiment, OneHot) {
    for (int code = 0; code < 5; ++code) {
        const auto v = encode_sentiment(code);
        for (int i = 0; i < 5; ++i) EXPECT_EQ(v[static_cast<std::size_t>(i)], i == code ? 1.0 : 0.0);
    }
    EXPECT_THROW(encode_sentiment(-1), std::out_of_range);
    EXPECT_THROW(encode_sentiment(5), std::out_of_range);
}

TEST(Assemble, OrderAndLength) {
    const std::array<double, 10> emo{};
    const auto sent = encode_sentiment(0);
    const std::vector<double> tox(768, 0.0);
    const auto t = assemble_task_features(emo, sent, tox);
    ASSERT_EQ(t.size(), 783u);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], i == 10 ? 1.0 : 0.0);
}

TEST(Assemble, LengthMatchesToxicityWidth) {
    std::array<double, 10> emo{};
    emo[3] = 2;
    const auto sent = encode_sentiment(4);
    for (std::size_t w : {0u, 1u, 8u, 33u}) {
        std::vector<double> tox(w, 0.5);
        const auto t = assemble_task_features(emo, sent, tox);
        ASSERT_EQ(t.size(), task_feature_width(w));
        EXPECT_EQ(t[3], 2.0);
        EXPECT_EQ(t[14], 1.0);
        if (w) EXPECT_EQ(t.back(), 0.5);
    }
}

TEST(Assemble, DimensionMismatchThrows) {
    const std::vector<double> emo(9, 0.0), sent(5, 0.0), tox(4, 0.0);
    EXPECT_THROW(assemble_task_features(emo, sent, tox), ShapeError);
    const std::vector<double> emo10(10, 0.0), sent4(4, 0.0);
    EXPECT_THROW(assemble_task_features(emo10, sent4, tox), ShapeError);
}

TEST(Lexicon, DefaultHasFiftyWords) {
    EXPECT_EQ(default_lexicon().size(), 50u);
    const auto reparsed = EmotionLexicon::parse(default_lexicon_text());
    EXPECT_EQ(reparsed.words(), default_lexicon().words());
}

TEST(Lexicon, CaseInsensitiveAndLowercased) {
    const auto lex = EmotionLexicon::parse("# comment\n\nHaPpY\tjoy\n");
    EXPECT_EQ(lex.words(), std::vector<std::string>{"happy"});
    EXPECT_EQ(lex.categories("HAPPY"), lex.categories("happy"));
    EXPECT_NE(lex.categories("happy"), 0u);
    EXPECT_EQ(lex.categories("sad"), 0u);
}

TEST(Lexicon, MalformedLinesReportLineNumber) {
    EXPECT_NE(error_of("happy\tjoy\nsad sadness\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("a\tjoy\n\nb\tglee\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of("a\tjoy\n\nb\tglee\n").find("glee"), std::string::npos);
    EXPECT_NE(error_of("\tjoy\n").find("line 1"), std::string::npos);
}

TEST(TaskFeatures, BuiltFromBundle) {
    SyntheticConfig cfg;
    cfg.samples = 20;
    const auto bundle = generate_synthetic(cfg, 4);
    const auto t = build_task_features(bundle, default_lexicon());
    ASSERT_EQ(t.rows(), 20u);
    ASSERT_EQ(t.cols(), task_feature_width(cfg.toxicity_width));
    double emotion_total = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        const auto row = t.row(i);
        EXPECT_EQ(std::accumulate(row.begin() + 10, row.begin() + 15, 0.0), 1.0);
        EXPECT_EQ(row[10 + bundle.sentiment[i]], 1.0);
        for (std::size_t j = 0; j < cfg.toxicity_width; ++j) EXPECT_EQ(row[15 + j], bundle.toxicity(i, j));
        emotion_total += std::accumulate(row.begin(), row.begin() + 10, 0.0);
    }
    EXPECT_GT(emotion_total, 0.0);
}
