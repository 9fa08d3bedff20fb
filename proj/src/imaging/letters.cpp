#include "crowding/letters.hpp"

#include <array>

namespace crowding {

namespace {
constexpr std::array<char, 10> kSymbols{'A', 'B', 'C', 'E', 'G', 'M', 'Y', 'Q', 'S', 'H'};
}

char symbol(Letter l) { return kSymbols[static_cast<std::size_t>(l)]; }

std::optional<Letter> letter_from_char(char c) {
    for (std::size_t i = 0; i < kSymbols.size(); ++i)
        if (kSymbols[i] == c) return static_cast<Letter>(i);
    return std::nullopt;
}

std::string class_name(int class_id) {
    if (class_id >= 0 && class_id < kNumLetterClasses) return std::string(1, kSymbols[class_id]);
    if (class_id == kBackgroundClass0) return "BG0";
    if (class_id == kBackgroundClass1) return "BG1";
    return "?";
}

std::optional<int> class_from_name(std::string_view name) {
    if (name == "BG0") return kBackgroundClass0;
    if (name == "BG1") return kBackgroundClass1;
    if (name.size() == 1) {
        if (auto l = letter_from_char(name[0])) return class_index(*l);
    }
    return std::nullopt;
}

std::string_view polarity_name(Polarity p) { return p == Polarity::White ? "white" : "black"; }

std::optional<Polarity> polarity_from_name(std::string_view s) {
    if (s == "white") return Polarity::White;
    if (s == "black") return Polarity::Black;
    return std::nullopt;
}

}  // namespace crowding
