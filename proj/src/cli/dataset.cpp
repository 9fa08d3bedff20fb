#include <algorithm>
#include <cmath>

#include "crowding/background.hpp"
#include "crowding/cli.hpp"
#include "crowding/rng.hpp"

namespace crowding::cli {

namespace {

ImageBuffer shift_brightness(const ImageBuffer& image, int offset) {
    ImageBuffer out = image;
    for (auto& v : out.data()) v = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + offset, 0, 255));
    return out;
}

std::array<std::vector<ImageBuffer>, 2> gather_backgrounds(const ExperimentConfig& config,
                                                           std::vector<std::string>* notes) {
    std::array<std::vector<ImageBuffer>, 2> bg;
    bool synthetic = config.background_source == "synthetic";
    if (!synthetic) {
        const bool present = !config.background_dir_a.empty() && !config.background_dir_b.empty() &&
                             std::filesystem::is_directory(config.background_dir_a) &&
                             std::filesystem::is_directory(config.background_dir_b);
        if (present) {
            for (auto& item : load_backgrounds(config.background_dir_a, config.background_dir_b, config.canvas))
                bg[static_cast<std::size_t>(item.class_id)].push_back(std::move(item.image));
        } else if (config.synthetic_fallback) {
            synthetic = true;
            if (notes) notes->push_back("background directories missing; using synthetic backgrounds");
        } else {
            throw ConfigError("background directories '" + config.background_dir_a + "' and '" + config.background_dir_b +
                              "' are not both readable and the synthetic fallback is disabled");
        }
    }
    if (synthetic) {
        for (int cls = 0; cls < 2; ++cls)
            for (int i = 0; i < config.background_count; ++i)
                bg[static_cast<std::size_t>(cls)].push_back(
                    synth_background(cls, mix_seed(config.seed, 0xb6000 + 0x1000 * cls + i), config.canvas));
    }
    if (config.background_flip)
        for (auto& cls : bg)
            for (auto& img : cls) img = flip_vertical(img);
    return bg;
}

}  // namespace

nn::Dataset build_training_set(const ExperimentConfig& config, std::vector<std::string>* notes) {
    config.validate();
    const SceneSettings scene = config.scene();
    const auto backgrounds = gather_backgrounds(config, notes);

    // Letter classes are oversampled to the mean background class size.
    const std::size_t per_class = (backgrounds[0].size() + backgrounds[1].size()) / 2;
    const std::size_t variants = 2 * config.grid.sizes.size();
    const std::size_t copies = std::max<std::size_t>(1, (per_class + variants / 2) / variants);

    Rng jitter(mix_seed(config.seed, 0x1e77e5));
    nn::Dataset data;
    for (Letter letter : kTargetLetters)
        for (Polarity pol : {Polarity::White, Polarity::Black})
            for (int size : config.grid.sizes) {
                StimulusSpec spec;
                spec.target = letter;
                spec.target_polarity = pol;
                spec.size_pt = size;
                spec.side = config.grid.side;
                spec.eccentricity_px = config.grid.eccentricity_px;
                const ImageBuffer base = compose_scene(spec, scene);
                for (std::size_t c = 0; c < copies; ++c) {
                    const int offset =
                        c == 0 ? 0 : static_cast<int>(jitter.below(2 * config.letter_jitter + 1)) - config.letter_jitter;
                    data.add(offset == 0 ? base : shift_brightness(base, offset), static_cast<int>(letter));
                }
            }
    for (int cls = 0; cls < 2; ++cls)
        for (const auto& img : backgrounds[static_cast<std::size_t>(cls)]) data.add(img, kBackgroundClass0 + cls);

    if (config.acuity_train) {
        const AcuityProfile profile = config.acuity_profile();
        for (auto& img : data.images) img = apply_acuity(img, profile);
    }
    return data;
}

}  // namespace crowding::cli
