#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "crowding/nn/network.hpp"
#include "crowding/rng.hpp"
#include "crowding/sweep.hpp"
#include "test_support.hpp"

using namespace crowding;

namespace {

GridConfig desk_grid(FlankMode mode) {
    GridConfig g;
    g.mode = mode;
    g.eccentricity_px = 16;
    g.distances = {7, 9};
    g.sizes = {6};
    g.angle_step = mode == FlankMode::Pair ? 36 : 72;
    g.targets = {Letter::A, Letter::G};
    g.flankers = {Letter::C, Letter::S};
    g.polarities = {{Polarity::White, Polarity::Black}};
    return g;
}

SweepSettings desk_settings() {
    SweepSettings s;
    s.scene.canvas = {64, 64};
    s.run_id = "rtest";
    s.model_id = "tiny";
    return s;
}

nn::Network small_net() {
    nn::SimpleNetPlan plan;
    plan.conv_channels = {4, 4, 4, 4, 4};
    plan.dense_units = {16, 16};
    return nn::build_simplenet({64, 64}, 10, 0.01f, plan, 7);
}

TrialRecord random_record(Rng& rng, std::size_t i) {
    StimulusSpec s;
    s.target = kTargetLetters[rng.below(8)];
    s.target_polarity = rng.below(2) ? Polarity::Black : Polarity::White;
    s.side = rng.below(2) ? Side::Right : Side::Left;
    s.acuity = rng.below(2) == 1;
    s.size_pt = 20 + static_cast<int>(rng.below(7));
    const auto m = rng.below(3);
    if (m > 0) {
        s.mode = m == 1 ? FlankMode::Single : FlankMode::Pair;
        s.flanker = kAllLetters[rng.below(10)];
        s.flanker_polarity = rng.below(2) ? Polarity::Black : Polarity::White;
        s.spacing_px = 25 + 2 * static_cast<int>(rng.below(11));
        s.angle_deg = 18 * static_cast<int>(rng.below(20));
    }
    std::vector<float> p(10);
    double sum = 0.0;
    for (auto& v : p) {
        v = static_cast<float>(rng.uniform01());
        sum += v;
    }
    for (auto& v : p) v = static_cast<float>(v / sum);
    return make_record(s, p, "r" + std::to_string(i % 3), i % 2 ? "simplenet" : "other");
}

}  // namespace

TEST_CASE("canonical grids have the published cardinalities") {
    GridConfig pair;
    CHECK(pair.angles().size() == 10);
    CHECK(pair.flanked_count() == 70400);
    const auto pg = build_grid(pair);
    CHECK(pg.size() == 70400 + 32);

    GridConfig single;
    single.mode = FlankMode::Single;
    CHECK(single.angles().size() == 20);
    CHECK(single.flanked_count() == 140800);
    CHECK(build_grid(single).size() == 140800 + 32);
}

TEST_CASE("one of everything gives exactly one flanked spec") {
    GridConfig g;
    g.targets = {Letter::Q};
    g.flankers = {Letter::H};
    g.polarities = {{Polarity::Black, Polarity::White}};
    g.sizes = {26};
    g.distances = {31};
    g.angle_step = 180;
    g.include_unflanked = false;
    const auto grid = build_grid(g);
    REQUIRE(grid.size() == 1);
    CHECK(grid[0].target == Letter::Q);
    CHECK(grid[0].flanker == Letter::H);
    CHECK(grid[0].target_polarity == Polarity::Black);
    CHECK(grid[0].flanker_polarity == Polarity::White);
    CHECK(grid[0].spacing_px == 31);
    CHECK(grid[0].angle_deg == 0);
    CHECK(grid[0].mode == FlankMode::Pair);
}

TEST_CASE("grid covers every tuple once in lexicographic order") {
    GridConfig g;
    g.mode = FlankMode::Single;
    g.targets = {Letter::A, Letter::C, Letter::Y};
    g.flankers = {Letter::B, Letter::S, Letter::H};
    g.distances = {25, 35, 45};
    g.angle_step = 90;
    const auto grid = build_grid(g);
    REQUIRE(grid.size() == g.flanked_count() + 3 * 2 * 2);

    auto pol_index = [&](const StimulusSpec& s) {
        for (std::size_t i = 0; i < g.polarities.size(); ++i)
            if (g.polarities[i] == PolarityPair{s.target_polarity, s.flanker_polarity}) return i;
        return g.polarities.size();
    };
    using Key = std::tuple<int, int, std::size_t, int, int, int>;
    std::set<Key> seen;
    std::optional<Key> prev;
    for (std::size_t i = 0; i < g.flanked_count(); ++i) {
        const auto& s = grid[i];
        REQUIRE(s.flanker.has_value());
        const Key k{static_cast<int>(s.target), static_cast<int>(*s.flanker), pol_index(s), s.size_pt, s.spacing_px,
                    s.angle_deg};
        if (prev) CHECK(*prev < k);
        prev = k;
        seen.insert(k);
    }
    CHECK(seen.size() == 3 * 3 * 4 * 2 * 3 * 4);

    for (std::size_t i = g.flanked_count(); i < grid.size(); ++i) {
        CHECK(grid[i].mode == FlankMode::Unflanked);
        CHECK_FALSE(grid[i].flanker.has_value());
    }
}

TEST_CASE("invalid grid configurations are rejected") {
    GridConfig g;
    g.distances.clear();
    CHECK_THROWS_AS(build_grid(g), ConfigError);
    g = GridConfig{};
    g.angle_step = 7;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = GridConfig{};
    g.targets = {Letter::S};
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = GridConfig{};
    g.mode = FlankMode::Unflanked;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("records survive a write/read round trip") {
    Rng rng(99);
    std::vector<TrialRecord> records;
    for (std::size_t i = 0; i < 300; ++i) records.push_back(random_record(rng, i));

    std::stringstream buf;
    write_records(records, buf);
    const auto back = read_records(buf);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        TrialRecord expect = records[i];
        // The file has no eccentricity column.
        expect.spec.eccentricity_px = back[i].spec.eccentricity_px;
        for (std::size_t k = 0; k < 10; ++k) expect.probabilities[k] = back[i].probabilities[k];
        CHECK(back[i] == expect);
    }

    // The printed probabilities are within 5e-7 of the originals and read
    // back as the nearest float to the printed value.
    std::stringstream text(buf.str());
    std::string line;
    std::getline(text, line);
    for (std::size_t i = 0; std::getline(text, line); ++i) {
        std::vector<std::string> cols;
        std::stringstream row(line);
        for (std::string c; std::getline(row, c, ',');) cols.push_back(c);
        REQUIRE(cols.size() == 24);
        for (std::size_t k = 0; k < 10; ++k) {
            const double printed = std::stod(cols[14 + k]);
            CHECK(std::abs(printed - static_cast<double>(records[i].probabilities[k])) <= 5e-7);
            CHECK(back[i].probabilities[k] == static_cast<float>(printed));
        }
    }

    std::stringstream again;
    write_records(back, again);
    CHECK(again.str() == buf.str());
}

TEST_CASE("record files on disk and edge cases") {
    const auto dir = test_support::scratch_dir("sweep_records");
    write_records({}, dir / "empty.csv");
    CHECK(read_records(dir / "empty.csv").empty());
    {
        std::ifstream in(dir / "empty.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == record_header());
    }
    CHECK_THROWS_AS(read_records(dir / "missing.csv"), DataError);

    std::stringstream shuffled;
    shuffled << "model_id,run_id" << record_header().substr(std::string("run_id,model_id").size()) << "\n";
    CHECK_THROWS_AS(read_records(shuffled), FormatError);

    Rng rng(3);
    std::stringstream good;
    write_records({random_record(rng, 0), random_record(rng, 1)}, good);
    std::string text = good.str();
    const auto second_row = text.find('\n', text.find('\n') + 1) + 1;
    std::string broken = text.substr(0, second_row) + "garbage,row\n";
    std::stringstream in(broken);
    try {
        read_records(in, "fixture");
        FAIL("malformed row accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("fixture:3:") != std::string::npos);
    }

    // correct flag contradicting the prediction
    TrialRecord r = random_record(rng, 2);
    r.correct = !r.correct;
    std::stringstream bad;
    write_records({r}, bad);
    CHECK_THROWS_AS(read_records(bad), FormatError);
}

TEST_CASE("sweep output is independent of the worker count") {
    const auto net = small_net();
    const auto grid = build_grid(desk_grid(FlankMode::Pair));
    const auto settings = desk_settings();
    std::size_t last_done = 0;
    const auto one = run_sweep(net, grid, settings, 1, [&](std::size_t done, std::size_t total) {
        CHECK(total == grid.size());
        last_done = std::max(last_done, done);
    });
    CHECK(last_done == grid.size());
    const auto three = run_sweep(net, grid, settings, 3);
    REQUIRE(one.size() == grid.size());
    CHECK(one == three);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(one[i].spec == grid[i]);
        CHECK(one[i].correct == (one[i].predicted == static_cast<int>(grid[i].target)));
    }
    std::stringstream a, b;
    write_records(one, a);
    write_records(three, b);
    CHECK(a.str() == b.str());
}

TEST_CASE("pair trials at opposite angles classify identically") {
    const auto net = small_net();
    auto settings = desk_settings();
    std::vector<StimulusSpec> specs;
    for (int angle : {0, 36, 72, 108, 144}) {
        StimulusSpec s;
        s.mode = FlankMode::Pair;
        s.target = Letter::E;
        s.flanker = Letter::M;
        s.flanker_polarity = Polarity::Black;
        s.size_pt = 6;
        s.spacing_px = 9;
        s.eccentricity_px = 16;
        s.angle_deg = angle;
        specs.push_back(s);
        s.angle_deg = angle + 180;
        specs.push_back(s);
    }
    const auto records = run_sweep(net, specs, settings, 2);
    for (std::size_t i = 0; i < records.size(); i += 2) {
        CHECK(records[i].predicted == records[i + 1].predicted);
        CHECK(records[i].probabilities == records[i + 1].probabilities);
    }
}

TEST_CASE("acuity specs are foveated before classification") {
    const auto net = small_net();
    auto settings = desk_settings();
    StimulusSpec s;
    s.target = Letter::B;
    s.size_pt = 8;
    s.eccentricity_px = 16;
    s.acuity = true;
    const auto rec = run_sweep(net, {s}, settings).at(0);
    const auto expect = nn::predict(net, apply_acuity(compose_scene(s, settings.scene), settings.profile));
    for (std::size_t k = 0; k < 10; ++k) CHECK(rec.probabilities[k] == expect[k]);
}

TEST_CASE("a failing spec aborts the sweep with the completed prefix") {
    const auto net = small_net();
    auto grid = build_grid(desk_grid(FlankMode::Single));
    REQUIRE(grid.size() > 30);
    grid[20].spacing_px = 0;  // flanked spec on top of the target cannot be placed
    try {
        run_sweep(net, grid, desk_settings(), 1);
        FAIL("sweep did not fail");
    } catch (const SweepError& e) {
        CHECK(e.completed == 20);
        REQUIRE(e.partial.size() == 20);
        for (std::size_t i = 0; i < 20; ++i) CHECK(e.partial[i].spec == grid[i]);
    }
    auto settings = desk_settings();
    settings.scene.canvas = {96, 96};
    CHECK_THROWS_AS(run_sweep(net, grid, settings), ConfigError);
}
