#include "mmorient/taskfeat.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mmorient/errors.hpp"

namespace mmorient {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

int category_index(std::string_view name) {
    for (std::size_t i = 0; i < kEmotionNames.size(); ++i) {
        if (kEmotionNames[i] == name) return static_cast<int>(i);
    }
    return -1;
}

// Sentence punctuation survives cleaning, so "happy!" must still hit "happy".
std::string_view strip_punctuation(std::string_view token) {
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    while (!token.empty() && is_punct(token.front())) token.remove_prefix(1);
    while (!token.empty() && is_punct(token.back())) token.remove_suffix(1);
    return token;
}

constexpr std::string_view kDefaultLexicon =
    "# word\tcategories\n"
    "happy\tjoy,positive\n"
    "joy\tjoy,positive\n"
    "love\tjoy,positive,trust\n"
    "laugh\tjoy,positive,surprise\n"
    "funny\tjoy,positive\n"
    "hilarious\tjoy,positive,surprise\n"
    "smile\tjoy,positive,trust\n"
    "friend\tjoy,positive,trust\n"
    "celebrate\tjoy,positive,anticipation\n"
    "hope\tanticipation,positive,trust\n"
    "win\tanticipation,joy,positive,surprise\n"
    "success\tanticipation,joy,positive\n"
    "inspire\tanticipation,joy,positive,trust\n"
    "believe\tpositive,trust\n"
    "trust\ttrust,positive\n"
    "honest\tpositive,trust\n"
    "wait\tanticipation\n"
    "soon\tanticipation\n"
    "plan\tanticipation\n"
    "sudden\tsurprise,fear\n"
    "shock\tsurprise,fear,negative\n"
    "wow\tsurprise,positive\n"
    "sad\tsadness,negative\n"
    "cry\tsadness,negative\n"
    "lonely\tsadness,negative,fear\n"
    "loss\tsadness,negative,anger,fear\n"
    "hurt\tsadness,negative,anger,fear\n"
    "angry\tanger,negative,disgust\n"
    "hate\tanger,negative,disgust,fear,sadness\n"
    "rage\tanger,negative\n"
    "fight\tanger,negative,fear\n"
    "stupid\tanger,negative,disgust\n"
    "annoying\tanger,negative,disgust\n"
    "afraid\tfear,negative\n"
    "dread\tfear,anticipation,negative\n"
    "scary\tfear,negative\n"
    "panic\tfear,negative\n"
    "danger\tfear,negative\n"
    "gross\tdisgust,negative\n"
    "disgusting\tdisgust,negative,anger\n"
    "awful\tdisgust,negative,anger,fear,sadness\n"
    "bad\tnegative,sadness,anger,disgust\n"
    "terrible\tnegative,anger,fear,sadness,disgust\n"
    "good\tpositive,joy,trust,anticipation,surprise\n"
    "great\tpositive,joy\n"
    "wonderful\tpositive,joy,surprise,trust\n"
    "beautiful\tpositive,joy,trust\n"
    "proud\tpositive,joy,trust,anticipation\n"
    "worry\tfear,negative,anticipation,sadness\n"
    "mock\tnegative,anger,disgust\n";

}  // namespace

EmotionLexicon EmotionLexicon::parse(std::string_view text) {
    EmotionLexicon lex;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty() || trim(line).front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        const auto where = "lexicon line " + std::to_string(line_no);
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw DataError(where + ": expected word<TAB>categories");
        const auto word = trim(line.substr(0, tab));
        if (word.empty() || word.find(' ') != std::string_view::npos) {
            throw DataError(where + ": invalid word");
        }
        std::vector<std::string_view> cats;
        std::string_view rest = line.substr(tab + 1);
        for (;;) {
            const auto comma = rest.find(',');
            const auto cat = trim(rest.substr(0, comma));
            if (category_index(cat) < 0) {
                throw DataError(where + ": unknown emotion category '" + std::string(cat) + "'");
            }
            cats.push_back(cat);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        lex.add(word, cats);
        if (end == text.size()) break;
    }
    return lex;
}

EmotionLexicon EmotionLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void EmotionLexicon::add(std::string_view word, std::span<const std::string_view> category_names) {
    unsigned mask = 0;
    for (auto name : category_names) {
        const int idx = category_index(name);
        if (idx < 0) throw DataError("unknown emotion category '" + std::string(name) + "'");
        mask |= 1u << idx;
    }
    entries_[lowercase(word)] |= mask;
}

unsigned EmotionLexicon::categories(std::string_view word) const {
    const auto it = entries_.find(lowercase(word));
    return it == entries_.end() ? 0u : it->second;
}

std::vector<std::string> EmotionLexicon::words() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [word, mask] : entries_) out.push_back(word);
    return out;
}

const EmotionLexicon& default_lexicon() {
    static const EmotionLexicon lex = EmotionLexicon::parse(kDefaultLexicon);
    return lex;
}

std::string_view default_lexicon_text() { return kDefaultLexicon; }

std::array<double, kEmotionCount> emotion_features(std::string_view cleaned_text,
                                                   const EmotionLexicon& lexicon) {
    std::array<double, kEmotionCount> counts{};
    std::size_t pos = 0;
    while (pos < cleaned_text.size()) {
        auto end = cleaned_text.find(' ', pos);
        if (end == std::string_view::npos) end = cleaned_text.size();
        const auto token = strip_punctuation(cleaned_text.substr(pos, end - pos));
        pos = end + 1;
        if (token.empty()) continue;
        const unsigned mask = lexicon.categories(token);
        for (std::size_t c = 0; c < kEmotionCount; ++c) {
            if (mask & (1u << c)) counts[c] += 1.0;
        }
    }
    return counts;
}

std::array<double, kSentimentCodes> encode_sentiment(int code) {
    if (code < 0 || code >= static_cast<int>(kSentimentCodes)) {
        throw std::out_of_range("sentiment code " + std::to_string(code) + " outside [0, 4]");
    }
    std::array<double, kSentimentCodes> onehot{};
    onehot[static_cast<std::size_t>(code)] = 1.0;
    return onehot;
}

std::vector<double> assemble_task_features(std::span<const double> emotion,
                                           std::span<const double> sentiment,
                                           std::span<const double> toxicity) {
    if (emotion.size() != kEmotionCount) {
        throw ShapeError("emotion features must have " + std::to_string(kEmotionCount) +
                         " entries, got " + std::to_string(emotion.size()));
    }
    if (sentiment.size() != kSentimentCodes) {
        throw ShapeError("sentiment one-hot must have " + std::to_string(kSentimentCodes) +
                         " entries, got " + std::to_string(sentiment.size()));
    }
    std::vector<double> out;
    out.reserve(emotion.size() + sentiment.size() + toxicity.size());
    out.insert(out.end(), emotion.begin(), emotion.end());
    out.insert(out.end(), sentiment.begin(), sentiment.end());
    out.insert(out.end(), toxicity.begin(), toxicity.end());
    return out;
}

Matrix build_task_features(const DatasetBundle& bundle, const EmotionLexicon& lexicon) {
    const std::size_t n = bundle.size();
    Matrix out(n, task_feature_width(bundle.toxicity.cols()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto emotion = emotion_features(bundle.records[i].cleaned_text, lexicon);
        const auto sentiment = encode_sentiment(bundle.sentiment[i]);
        const auto row = assemble_task_features(emotion, sentiment, bundle.toxicity.row(i));
        std::copy(row.begin(), row.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace mmorient
