#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace crowding {

/// The ten-letter alphabet. The first eight are trainable targets; S and H
/// only ever appear as flankers.
enum class Letter : std::uint8_t { A, B, C, E, G, M, Y, Q, S, H };

inline constexpr std::array<Letter, 8> kTargetLetters{Letter::A, Letter::B, Letter::C, Letter::E,
                                                      Letter::G, Letter::M, Letter::Y, Letter::Q};
inline constexpr std::array<Letter, 10> kAllLetters{Letter::A, Letter::B, Letter::C, Letter::E, Letter::G,
                                                    Letter::M, Letter::Y, Letter::Q, Letter::S, Letter::H};

/// Output layout of the classifier: 8 letter classes then 2 background classes.
inline constexpr int kNumClasses = 10;
inline constexpr int kNumLetterClasses = 8;
inline constexpr int kBackgroundClass0 = 8;
inline constexpr int kBackgroundClass1 = 9;

char symbol(Letter l);
std::optional<Letter> letter_from_char(char c);

inline bool is_target_letter(Letter l) { return static_cast<int>(l) < kNumLetterClasses; }

/// Class index of a target letter; nullopt for S and H.
inline std::optional<int> class_index(Letter l) {
    if (!is_target_letter(l)) return std::nullopt;
    return static_cast<int>(l);
}

/// "A".."Q" for letter classes, "BG0"/"BG1" for the background classes.
std::string class_name(int class_id);
std::optional<int> class_from_name(std::string_view name);

enum class Polarity : std::uint8_t { White, Black };

std::string_view polarity_name(Polarity p);
std::optional<Polarity> polarity_from_name(std::string_view s);

}  // namespace crowding
