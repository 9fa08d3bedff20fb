#include "crowding/sweep.hpp"

#include <string>

namespace crowding {

std::vector<int> GridConfig::angles() const {
    const int range = mode == FlankMode::Pair ? 180 : 360;
    std::vector<int> out;
    for (int a = 0; a < range; a += angle_step) out.push_back(a);
    return out;
}

std::size_t GridConfig::flanked_count() const {
    return targets.size() * flankers.size() * polarities.size() * sizes.size() * distances.size() * angles().size();
}

void GridConfig::validate() const {
    if (mode == FlankMode::Unflanked) throw ConfigError("grid mode must be single or pair");
    if (targets.empty() || flankers.empty() || polarities.empty() || sizes.empty() || distances.empty())
        throw ConfigError("grid factor lists must be non-empty");
    const int range = mode == FlankMode::Pair ? 180 : 360;
    if (angle_step <= 0 || range % angle_step != 0)
        throw ConfigError("angle step " + std::to_string(angle_step) + " must divide " + std::to_string(range));
    for (Letter t : targets)
        if (!is_target_letter(t)) throw ConfigError(std::string("'") + symbol(t) + "' cannot be a target");
    for (int d : distances)
        if (d <= 0) throw ConfigError("flanker distances must be positive");
    for (int s : sizes)
        if (s <= 0) throw ConfigError("letter sizes must be positive");
}

std::vector<StimulusSpec> build_grid(const GridConfig& config) {
    config.validate();
    const std::vector<int> angles = config.angles();
    std::vector<StimulusSpec> grid;
    grid.reserve(config.flanked_count() + config.targets.size() * 4);
    StimulusSpec spec;
    spec.mode = config.mode;
    spec.side = config.side;
    spec.eccentricity_px = config.eccentricity_px;
    spec.acuity = config.acuity;
    for (Letter target : config.targets)
        for (Letter flanker : config.flankers)
            for (const PolarityPair& pol : config.polarities)
                for (int size : config.sizes)
                    for (int distance : config.distances)
                        for (int angle : angles) {
                            spec.target = target;
                            spec.flanker = flanker;
                            spec.target_polarity = pol.target;
                            spec.flanker_polarity = pol.flanker;
                            spec.size_pt = size;
                            spec.spacing_px = distance;
                            spec.angle_deg = angle;
                            grid.push_back(spec);
                        }
    if (!config.include_unflanked) return grid;

    StimulusSpec base;
    base.mode = FlankMode::Unflanked;
    base.side = config.side;
    base.eccentricity_px = config.eccentricity_px;
    base.acuity = config.acuity;
    for (Letter target : config.targets)
        for (Polarity pol : {Polarity::White, Polarity::Black})
            for (int size : config.sizes) {
                base.target = target;
                base.target_polarity = pol;
                base.size_pt = size;
                grid.push_back(base);
            }
    return grid;
}

}  // namespace crowding
