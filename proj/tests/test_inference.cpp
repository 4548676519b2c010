#include <gtest/gtest.h>

#include "sclp/inference.hpp"
#include "sclp/kmeans.hpp"
#include "test_util.hpp"

namespace sclp {
namespace {

SuperpixelSegmentation halves(int w, int h, int split_x) {
    std::vector<int> ids(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ids[y * w + x] = x < split_x ? 0 : 1;
    return segmentation_from_ids(w, h, ids);
}

ProbabilityField field(std::initializer_list<std::initializer_list<double>> rows) {
    ProbabilityField f(FieldTag::Visual, rows.size(), static_cast<int>(rows.begin()->size()));
    std::size_t i = 0;
    for (const auto& r : rows)
        for (double v : r) f.values[i++] = v;
    return f;
}

ProbabilityField random_field(std::size_t l, int m, std::mt19937_64& rng) {
    ProbabilityField f(FieldTag::Visual, l, m);
    for (double& v : f.values) v = unit_uniform(rng) + 1e-3;
    for (std::size_t i = 0; i < l; ++i) normalize_or_uniform(f.row(i));
    return f;
}

TEST(GlobalVote, SingleVoterHandExample) {
    // classes: 1 = sky, 2 = road; two 10x10 superpixels in a 1x2 grid
    auto seg = halves(20, 10, 10);
    assign_blocks(seg, BlockGrid(1, 2, 20, 10));
    ASSERT_EQ(seg.superpixels[0].pixel_count, 100u);
    BlockClassCounts bc(2, 2);
    bc.at(0, 1) = 1;
    bc.at(1, 1) = 3;
    bc.at(1, 2) = 7;
    const BlockClassCounts* set[] = {&bc};
    const auto g = extract_global_sclp(set, 2, 2, 0.0);
    ASSERT_DOUBLE_EQ(g.p(2, 1, 0, 1), 0.7);
    const auto visual = field({{0.9, 0.1}, {0.5, 0.5}});
    for (const auto& votes : {global_votes_naive(seg, visual, g), global_votes(seg, visual, g)}) {
        EXPECT_NEAR(votes.p(1, 1), 27.0, 1e-12);
        EXPECT_NEAR(votes.p(1, 2), 63.0, 1e-12);
    }
    const auto p = vote_global(seg, visual, g);
    EXPECT_EQ(p.tag, FieldTag::Global);
    EXPECT_NEAR(p.p(1, 1), 0.3, 1e-12);
    EXPECT_NEAR(p.p(1, 2), 0.7, 1e-12);
}

TEST(GlobalVote, UniformPriorGivesUniformField) {
    std::mt19937_64 rng(1);
    auto seg = segmentation_from_ids(30, 30, [] {
        std::vector<int> ids(900);
        for (int i = 0; i < 900; ++i) ids[i] = (i / 30 / 10) * 3 + (i % 30) / 10;
        return ids;
    }());
    assign_blocks(seg, BlockGrid(3, 3, 30, 30));
    GlobalSCLP g(4, 9);
    g.normalize(1.0);
    const auto p = vote_global(seg, random_field(seg.superpixels.size(), 4, rng), g);
    for (double v : p.values) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(GlobalVote, SingleBlockGridHasNoVoters) {
    std::mt19937_64 rng(2);
    auto seg = halves(20, 10, 7);
    assign_blocks(seg, BlockGrid(1, 1, 20, 10));
    GlobalSCLP g(3, 1);
    g.normalize(1.0);
    const auto p = vote_global(seg, random_field(2, 3, rng), g);
    for (double v : p.values) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(GlobalVote, MissingBlockIdsAreRejected) {
    auto seg = halves(20, 10, 10);
    GlobalSCLP g(2, 2);
    EXPECT_THROW(vote_global(seg, field({{1, 0}, {0, 1}}), g), ArgumentError);
}

struct RandomScene {
    SuperpixelSegmentation seg;
    GlobalSCLP g;
    ProbabilityField visual;
};

RandomScene random_scene(std::mt19937_64& rng, int m) {
    const int w = 24 + static_cast<int>(unit_uniform(rng) * 16), h = 20 + static_cast<int>(unit_uniform(rng) * 16);
    std::vector<int> ids(static_cast<std::size_t>(w) * h);
    const int tile = 3 + static_cast<int>(unit_uniform(rng) * 4);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ids[y * w + x] = (y / tile) * 64 + x / tile;
    RandomScene s;
    s.seg = segmentation_from_ids(w, h, ids);
    const int rows = 1 + static_cast<int>(unit_uniform(rng) * 4), cols = 1 + static_cast<int>(unit_uniform(rng) * 4);
    const BlockGrid grid(rows, cols, w, h);
    assign_blocks(s.seg, grid);
    s.g = GlobalSCLP(m, grid.size());
    std::vector<BlockClassCounts> counts;
    for (int i = 0; i < 3; ++i) {
        BlockClassCounts bc(grid.size(), m);
        for (auto& v : bc.counts) v = static_cast<std::uint64_t>(unit_uniform(rng) * 20);
        s.g.accumulate(bc, GlobalCountMode::Presence);
    }
    s.g.normalize(1.0);
    s.visual = random_field(s.seg.superpixels.size(), m, rng);
    return s;
}

TEST(GlobalVote, FastPathEqualsNaiveLoop) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto s = random_scene(rng, 2 + t % 4);
        for (auto mode : {WeightMode::Voter, WeightMode::Receiver}) {
            const auto slow = global_votes_naive(s.seg, s.visual, s.g, mode);
            const auto fast = global_votes(s.seg, s.visual, s.g, mode);
            double scale = 1.0;
            for (double v : slow.values) scale = std::max(scale, std::abs(v));
            for (std::size_t i = 0; i < slow.values.size(); ++i) EXPECT_NEAR(slow.values[i] / scale, fast.values[i] / scale, 1e-12);
            const auto a = vote_global_naive(s.seg, s.visual, s.g, mode), b = vote_global(s.seg, s.visual, s.g, mode);
            for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-9);
            EXPECT_TRUE(b.on_simplex());
        }
    }
}

TEST(GlobalVote, ThreeVotersMatchTermwiseOracle) {
    // four superpixels in four quadrant blocks; receiver 3 hears the other three
    std::vector<int> ids(20 * 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) ids[y * 20 + x] = (y < 10 ? 0 : 2) + (x < 10 ? 0 : 1);
    auto seg = segmentation_from_ids(20, 20, ids);
    assign_blocks(seg, BlockGrid(2, 2, 20, 20));
    std::mt19937_64 rng(4);
    GlobalSCLP g(3, 4);
    BlockClassCounts bc(4, 3);
    for (auto& v : bc.counts) v = static_cast<std::uint64_t>(unit_uniform(rng) * 9);
    g.accumulate(bc, GlobalCountMode::Presence);
    g.normalize(1.0);
    const auto visual = random_field(4, 3, rng);
    std::vector<double> expect(3, 0.0);
    for (int q = 0; q < 3; ++q) {
        int best = 1;
        for (int c = 2; c <= 3; ++c)
            if (visual.p(q, c) > visual.p(q, best)) best = c;
        const double wq = visual.p(q, best) * 100.0;
        for (int c = 1; c <= 3; ++c) expect[c - 1] += wq * g.p(c, best, *seg.superpixels[q].block_id, 3);
    }
    const double total = expect[0] + expect[1] + expect[2];
    const auto p = vote_global(seg, visual, g);
    for (int c = 1; c <= 3; ++c) EXPECT_NEAR(p.p(3, c), expect[c - 1] / total, 1e-12);
}

TEST(GlobalVote, CommonPixelScaleCancels) {
    std::mt19937_64 rng(5);
    auto s = random_scene(rng, 3);
    const auto before = vote_global(s.seg, s.visual, s.g);
    for (auto& sp : s.seg.superpixels) sp.pixel_count *= 10;
    const auto after = vote_global(s.seg, s.visual, s.g);
    for (std::size_t i = 0; i < before.values.size(); ++i) EXPECT_NEAR(before.values[i], after.values[i], 1e-12);
}

LocalSCLP local_prior_b_row() {
    PairCounts pc(2);
    pc.at(2, 1) = 7;
    pc.at(2, 2) = 3;
    pc.at(1, 2) = 7;
    const PairCounts* set[] = {&pc};
    return extract_local_sclp(set, 2, 0.0);
}

TEST(LocalVote, SingleNeighborHandExample) {
    // classes: 1 = A, 2 = B; the left 50-pixel superpixel votes for the right one
    const auto seg = halves(10, 10, 5);
    const auto l = local_prior_b_row();
    ASSERT_DOUBLE_EQ(l.p(1, 2), 0.7);
    const auto visual = field({{0.1, 0.9}, {0.5, 0.5}});
    const auto votes = local_votes(seg, visual, l);
    EXPECT_NEAR(votes.p(1, 1), 31.5, 1e-12);
    EXPECT_NEAR(votes.p(1, 2), 13.5, 1e-12);
    const auto p = vote_local(seg, visual, l);
    EXPECT_EQ(p.tag, FieldTag::Local);
    EXPECT_NEAR(p.p(1, 1), 0.7, 1e-12);
    EXPECT_NEAR(p.p(1, 2), 0.3, 1e-12);
}

TEST(LocalVote, IsolatedSuperpixelIsUniform) {
    const auto seg = segmentation_from_ids(8, 8, std::vector<int>(64, 0));
    const auto p = vote_local(seg, field({{0.2, 0.8}}), local_prior_b_row());
    EXPECT_DOUBLE_EQ(p.p(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(p.p(0, 2), 0.5);
}

TEST(LocalVote, TwoIdenticalNeighborsMatchOne) {
    // stripes X | R | X' with X and X' identical voters
    std::vector<int> ids(15 * 5);
    for (int i = 0; i < 75; ++i) ids[i] = (i % 15) / 5;
    const auto seg = segmentation_from_ids(15, 5, ids);
    const auto l = local_prior_b_row();
    const auto three = vote_local(seg, field({{0.1, 0.9}, {0.5, 0.5}, {0.1, 0.9}}), l);
    const auto two = vote_local(halves(10, 5, 5), field({{0.1, 0.9}, {0.5, 0.5}}), l);
    EXPECT_NEAR(three.p(1, 1), two.p(1, 1), 1e-12);
    EXPECT_NEAR(three.p(1, 2), two.p(1, 2), 1e-12);
}

TEST(Fuse, IdentityWeightsReproduceInputs) {
    std::mt19937_64 rng(6);
    const auto v = random_field(7, 4, rng), g = random_field(7, 4, rng), l = random_field(7, 4, rng);
    const auto fv = fuse(v, g, l, {0, 0, 0, 1});
    const auto fg = fuse(v, g, l, {0, 1, 0, 0});
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        EXPECT_NEAR(fv.values[i], v.values[i], 1e-15);
        EXPECT_NEAR(fg.values[i], g.values[i], 1e-15);
    }
    EXPECT_EQ(fv.tag, FieldTag::Fused);
}

TEST(Fuse, ArithmeticHandExample) {
    const auto p = fuse(field({{0.5, 0.5}}), field({{0.6, 0.4}}), field({{0.2, 0.8}}), {0.1, 0.25, 0.25, 0.5});
    EXPECT_NEAR(p.p(0, 1), 0.55 / 1.2, 1e-12);
    EXPECT_NEAR(p.p(0, 2), 0.65 / 1.2, 1e-12);
    EXPECT_NEAR(p.p(0, 1), 0.4583, 5e-5);
    EXPECT_NEAR(p.p(0, 2), 0.5417, 5e-5);
}

TEST(Fuse, MismatchedFieldsAreRejected) {
    EXPECT_THROW(fuse(field({{0.5, 0.5}}), field({{0.5, 0.5}, {1, 0}}), field({{0.5, 0.5}}), {}), ArgumentError);
}

TEST(Fuse, ConstantTermNeverChangesLabels) {
    std::mt19937_64 rng(7);
    std::vector<int> ids(100);
    for (int i = 0; i < 100; ++i) ids[i] = i / 10;
    const auto seg = segmentation_from_ids(10, 10, ids);
    for (int t = 0; t < 20; ++t) {
        const auto v = random_field(10, 5, rng), g = random_field(10, 5, rng), l = random_field(10, 5, rng);
        const LabelMap base = assign_labels(fuse(v, g, l, {0, 0.3, 0.2, 0.5}), seg);
        for (double wc : {0.5, 10.0}) EXPECT_EQ(assign_labels(fuse(v, g, l, {wc, 0.3, 0.2, 0.5}), seg), base);
        EXPECT_TRUE(fuse(v, g, l, {10.0, 0.3, 0.2, 0.5}).on_simplex());
    }
}

TEST(FusionWeights, ParseAndValidate) {
    const auto w = FusionWeights::parse("0.1,0.2,0.3,0.4");
    EXPECT_DOUBLE_EQ(w.w_const, 0.1);
    EXPECT_DOUBLE_EQ(w.w_visual, 0.4);
    EXPECT_EQ(FusionWeights::parse(w.str()).w_local, w.w_local);
    EXPECT_THROW(FusionWeights::parse("1,2,3"), ArgumentError);
    EXPECT_THROW(FusionWeights::parse("0,0,0,0"), ArgumentError);
    EXPECT_THROW(FusionWeights::parse("0,-1,1,1"), ArgumentError);
    EXPECT_THROW(FusionWeights::parse("0,x,1,1"), ArgumentError);
    EXPECT_EQ(parse_weight_mode("receiver"), WeightMode::Receiver);
    EXPECT_THROW(parse_weight_mode("both"), ArgumentError);
}

TEST(AssignLabels, ArgmaxTiesAndBroadcast) {
    const auto seg = halves(6, 4, 3);
    EXPECT_EQ(assign_labels(field({{0.2, 0.7, 0.1}, {0.5, 0.5, 0.0}}), seg).labels[0], 2);
    EXPECT_EQ(assign_labels(field({{0.2, 0.7, 0.1}, {0.5, 0.5, 0.0}}), seg).labels[5], 1);

    std::mt19937_64 rng(8);
    std::vector<int> ids(16 * 12);
    for (auto& v : ids) v = static_cast<int>(unit_uniform(rng) * 9);
    const auto s = segmentation_from_ids(16, 12, ids);
    const auto f = random_field(s.superpixels.size(), 6, rng);
    const LabelMap out = assign_labels(f, s);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        const auto row = f.row(static_cast<std::size_t>(s.id_map[i]));
        int best = 0;
        for (int c = 1; c < 6; ++c)
            if (row[c] > row[best]) best = c;
        EXPECT_EQ(out.labels[i], best + 1);
        EXPECT_NE(out.labels[i], 0);
    }
}

} // namespace
} // namespace sclp
