#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmorient/dataio.hpp"
#include "mmorient/matrix.hpp"

namespace mmorient {

inline constexpr std::size_t kEmotionCount = 10;
inline constexpr std::size_t kSentimentCodes = 5;

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "fear", "anger", "anticipation", "trust", "surprise",
    "positive", "negative", "sadness", "disgust", "joy"};

/// Word → emotion categories (bitmask over kEmotionNames).
class EmotionLexicon {
public:
    /// Lines are `word<TAB>cat1,cat2,...`; blank lines and `#` comments are
    /// ignored. Malformed lines raise DataError with the line number.
    static EmotionLexicon parse(std::string_view text);
    static EmotionLexicon load(const std::filesystem::path& path);

    /// `category_names` must all appear in kEmotionNames.
    void add(std::string_view word, std::span<const std::string_view> category_names);

    /// Category bitmask of `word` (0 when unknown). Lookup is case-insensitive.
    unsigned categories(std::string_view word) const;
    std::vector<std::string> words() const;
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, unsigned, std::less<>> entries_;
};

/// 50-word lexicon bundled with the library.
const EmotionLexicon& default_lexicon();
/// Text of the bundled lexicon in the file format accepted by EmotionLexicon::parse.
std::string_view default_lexicon_text();

/// Per-category occurrence counts over the space-separated tokens of cleaned text.
std::array<double, kEmotionCount> emotion_features(std::string_view cleaned_text,
                                                   const EmotionLexicon& lexicon);

/// Throws std::out_of_range for codes outside [0, 4].
std::array<double, kSentimentCodes> encode_sentiment(int code);

/// emotion ∥ sentiment ∥ toxicity.
std::vector<double> assemble_task_features(std::span<const double> emotion,
                                           std::span<const double> sentiment,
                                           std::span<const double> toxicity);

inline std::size_t task_feature_width(std::size_t toxicity_width) {
    return kEmotionCount + kSentimentCodes + toxicity_width;
}

/// Task features for every sample of the bundle: N × (15 + toxicity width).
Matrix build_task_features(const DatasetBundle& bundle, const EmotionLexicon& lexicon);

}  // namespace mmorient
