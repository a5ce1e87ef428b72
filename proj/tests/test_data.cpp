#include <gtest/gtest.h>

#include <map>
#include <set>

#include "scnn/data.hpp"
#include "scnn/errors.hpp"
#include "scnn/image_io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

TEST(SplitCounts, MriClassSizes) {
    const auto c = scnn::split_counts({3200, 2240, 896, 64}, {});
    const std::size_t train[4] = {2560, 1792, 716, 51}, val[4] = {320, 224, 89, 6}, test[4] = {320, 224, 91, 7};
    std::size_t tt = 0, tv = 0, te = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c[i].train, train[i]);
        EXPECT_EQ(c[i].val, val[i]);
        EXPECT_EQ(c[i].test, test[i]);
        tt += c[i].train;
        tv += c[i].val;
        te += c[i].test;
    }
    EXPECT_EQ(tt, 5119u);
    EXPECT_EQ(tv, 639u);
    EXPECT_EQ(te, 642u);
}

TEST(SplitCounts, PartitionProperty) {
    for (std::size_t n = 1; n < 400; n += 7)
        for (const auto& r : {scnn::SplitSpec{0.8, 0.1, 0.1}, scnn::SplitSpec{0.7, 0.2, 0.1}, scnn::SplitSpec{0.6, 0.2, 0.2},
                              scnn::SplitSpec{1.0, 0.0, 0.0}}) {
            const auto c = scnn::split_counts({n}, r).front();
            EXPECT_EQ(c.train + c.val + c.test, n);
            EXPECT_LE(static_cast<double>(c.train), r.train * static_cast<double>(n) + 1e-9);
            EXPECT_GT(static_cast<double>(c.train) + 1, r.train * static_cast<double>(n));
        }
}

TEST(SplitCounts, RejectsBadRatios) {
    EXPECT_THROW(scnn::split_counts({10}, {0.5, 0.5, 0.5}), std::invalid_argument);
    EXPECT_THROW(scnn::split_counts({10}, {1.2, -0.1, -0.1}), std::invalid_argument);
}

TEST(SplitFolders, DisjointCompleteAndSeeded) {
    scnn_test::TempDir dir;
    scnn_test::make_placeholder_tree(dir / "src", {{"b_cls", 23}, {"a_cls", 17}});
    const auto counts = scnn::split_folders(dir / "src", dir / "one", {});
    scnn::split_folders(dir / "src", dir / "two", {});
    scnn::split_folders(dir / "src", dir / "other", {0.8, 0.1, 0.1, 1});
    ASSERT_EQ(counts.size(), 2u);
    EXPECT_EQ(counts[0].name, "a_cls");

    auto listing = [&](const fs::path& root) {
        std::map<std::string, std::set<std::string>> m;
        for (const char* subset : {"train", "val", "test"})
            for (const char* cls : {"a_cls", "b_cls"})
                if (fs::exists(root / subset / cls))
                    for (const auto& f : scnn::list_files(root / subset / cls))
                        m[std::string(subset) + "/" + cls].insert(f.filename().string());
        return m;
    };
    const auto one = listing(dir / "one");
    EXPECT_EQ(one, listing(dir / "two"));
    EXPECT_NE(one, listing(dir / "other"));
    for (const char* cls : {"a_cls", "b_cls"}) {
        std::set<std::string> all;
        std::size_t n = 0;
        for (const char* subset : {"train", "val", "test"}) {
            const auto it = one.find(std::string(subset) + "/" + cls);
            if (it == one.end()) continue;
            n += it->second.size();
            all.insert(it->second.begin(), it->second.end());
        }
        EXPECT_EQ(n, all.size()) << "subsets overlap";
        EXPECT_EQ(all.size(), std::string(cls) == "a_cls" ? 17u : 23u);
    }
    EXPECT_EQ(one.at("train/a_cls").size(), 13u);
    EXPECT_EQ(one.at("val/a_cls").size(), 1u);
    EXPECT_EQ(one.at("test/a_cls").size(), 3u);
}

TEST(SplitFolders, RefusesToOverwrite) {
    scnn_test::TempDir dir;
    scnn_test::make_placeholder_tree(dir / "src", {{"x", 5}});
    scnn::split_folders(dir / "src", dir / "dst", {});
    EXPECT_THROW(scnn::split_folders(dir / "src", dir / "dst", {}), scnn::IoError);
    EXPECT_THROW(scnn::split_folders(dir / "missing", dir / "dst2", {}), scnn::IoError);
}

TEST(SplitTable, TotalsAndPercentages) {
    auto c = scnn::split_counts({3200, 2240, 896, 64}, {});
    const char* names[4] = {"MildDemented", "ModerateDemented", "NonDemented", "VeryMildDemented"};
    for (std::size_t i = 0; i < 4; ++i) c[i].name = names[i];
    const std::string t = scnn::format_split_table(c);
    for (const char* needle : {"5119 (80%)", "639 (10%)", "642 (10%)", "6400", "2560", "716", "51"})
        EXPECT_NE(t.find(needle), std::string::npos) << needle << "\n" << t;
}

TEST(Index, ClassesLexicographicFilesSorted) {
    scnn_test::TempDir dir;
    scnn_test::make_placeholder_tree(dir.path(), {{"beta", 2}, {"Alpha", 1}, {"alpha", 3}});
    fs::create_directories(dir / ".hidden");
    const auto ds = scnn::index_dataset(dir.path());
    EXPECT_EQ(ds.classes, (std::vector<std::string>{"Alpha", "alpha", "beta"}));
    ASSERT_EQ(ds.size(), 6u);
    EXPECT_EQ(ds.samples[1].label, 1u);
    EXPECT_EQ(ds.samples[1].path.filename(), "img_00000.jpg");
    EXPECT_EQ(ds.samples[3].path.filename(), "img_00002.jpg");
}

TEST(Batches, CountsAndLastBatch) {
    const auto plan = scnn::plan_batches(5119, 32, std::nullopt);
    ASSERT_EQ(plan.size(), 160u);
    EXPECT_EQ(plan.back().size(), 31u);
    EXPECT_EQ(plan.front().front(), 0u);
    EXPECT_EQ(plan.back().back(), 5118u);
}

TEST(Batches, ShuffledPlanIsAPermutationAndSeeded) {
    const auto a = scnn::plan_batches(101, 8, 5u), b = scnn::plan_batches(101, 8, 5u), c = scnn::plan_batches(101, 8, 6u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    std::set<std::size_t> seen;
    for (const auto& batch : a) seen.insert(batch.begin(), batch.end());
    EXPECT_EQ(seen.size(), 101u);
    EXPECT_EQ(*seen.rbegin(), 100u);
}

TEST(Images, GrayscaleScaling) {
    scnn_test::TempDir dir;
    scnn::write_png(dir / "g.png", {2, 2, 1, {0, 128, 255, 64}});
    const scnn::Tensor t = scnn::load_grayscale_image(dir / "g.png", 2, 2);
    ASSERT_EQ(t.shape(), (scnn::Shape{2, 2, 1}));
    EXPECT_FLOAT_EQ(t[0], 0.0f);
    EXPECT_FLOAT_EQ(t[1], 128.0f / 255.0f);
    EXPECT_FLOAT_EQ(t[2], 1.0f);
}

TEST(Images, RgbUsesLuma) {
    scnn_test::TempDir dir;
    scnn::write_png(dir / "c.png", {1, 3, 3, {255, 0, 0, 0, 255, 0, 0, 0, 255}});
    const scnn::Tensor t = scnn::load_grayscale_image(dir / "c.png", 1, 3);
    EXPECT_NEAR(t[0], 0.299, 1.0 / 255);
    EXPECT_NEAR(t[1], 0.587, 1.0 / 255);
    EXPECT_NEAR(t[2], 0.114, 1.0 / 255);
}

TEST(Images, ResizeOfConstantIsConstant) {
    scnn_test::TempDir dir;
    scnn::write_png(dir / "k.png", {5, 7, 1, std::vector<std::uint8_t>(35, 200)});
    const scnn::Tensor t = scnn::load_grayscale_image(dir / "k.png", 16, 16);
    for (float v : t.data()) EXPECT_NEAR(v, 200.0f / 255.0f, 1e-6);
}

TEST(Images, PngRoundTripAndBadFiles) {
    scnn_test::TempDir dir;
    const scnn::Image8 img{3, 2, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18}};
    scnn::write_png(dir / "rt.png", img);
    const auto back = scnn::decode_image(dir / "rt.png");
    EXPECT_EQ(back.height, 3u);
    EXPECT_EQ(back.width, 2u);
    EXPECT_EQ(back.pixels, img.pixels);
    std::ofstream(dir / "junk.jpg") << "not an image";
    EXPECT_THROW(scnn::decode_image(dir / "junk.jpg"), scnn::FormatError);
    EXPECT_THROW(scnn::decode_image(dir / "none.png"), scnn::IoError);
}

TEST(Images, BilinearIsCornerAligned) {
    const std::vector<float> src = {0, 1, 1, 0};
    const auto out = scnn::resize_bilinear_plane(src, 2, 2, 3, 3);
    const float expect[9] = {0, 0.5f, 1, 0.5f, 0.5f, 0.5f, 1, 0.5f, 0};
    for (std::size_t i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(out[i], expect[i]);
}

TEST(BatchStream, LoadsOneHotBatches) {
    scnn_test::TempDir dir;
    scnn_test::make_two_class_tree(dir.path(), 3, 8, 1);
    const auto ds = scnn::index_dataset(dir.path());
    scnn::BatchStream s(ds, 4, std::nullopt, 8, 8);
    EXPECT_EQ(s.batch_count(), 2u);
    const auto b1 = s.next();
    ASSERT_TRUE(b1);
    EXPECT_EQ(b1->x.shape(), (scnn::Shape{4, 8, 8, 1}));
    EXPECT_EQ(b1->onehot.at({0, 0}), 1.0f);
    EXPECT_EQ(b1->onehot.at({3, 1}), 1.0f);
    const auto b2 = s.next();
    ASSERT_TRUE(b2);
    EXPECT_EQ(b2->x.shape()[0], 2u);
    EXPECT_FALSE(s.next());
}
